// Command-line front end. Talks to the simulator only through kvflow.h.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "kvflow/kvflow.h"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 ok, 1 runtime failure, 2 config error.
int exit_code(kvf_status s) {
    switch (s) {
        case KVF_OK: return 0;
        case KVF_ERR_CONFIG:
        case KVF_ERR_ARGUMENT: return 2;
        default: return 1;
    }
}

struct Failure {
    int code;
};

void check(kvf_status s) {
    if (s == KVF_OK) return;
    std::cerr << "error: " << kvf_last_error() << "\n";
    throw Failure{exit_code(s)};
}

// Owns a char* from the library.
std::string take(char* s) {
    std::string out = s ? s : "";
    kvf_string_free(s);
    return out;
}

template <typename Fn>
std::string get(Fn fn) {
    char* s = nullptr;
    check(fn(&s));
    return take(s);
}

struct ExpDeleter {
    void operator()(kvf_experiment* e) const { kvf_experiment_free(e); }
};
using ExpPtr = std::unique_ptr<kvf_experiment, ExpDeleter>;

ExpPtr load(const std::string& path, const std::vector<std::uint64_t>& seeds) {
    kvf_experiment* raw = nullptr;
    check(kvf_experiment_load_file(path.c_str(), &raw));
    ExpPtr exp(raw);
    if (!seeds.empty()) check(kvf_experiment_set_seeds(exp.get(), seeds.data(), seeds.size()));
    return exp;
}

// Write to a sibling temp file, then rename into place.
void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            std::cerr << "error: cannot write " << tmp << "\n";
            throw Failure{1};
        }
        out << content;
        if (!out.flush()) {
            std::cerr << "error: short write to " << tmp << "\n";
            throw Failure{1};
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << path << "\n";
        throw Failure{2};
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string safe_name(std::string s) {
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    }
    return s;
}

struct Common {
    std::vector<std::string> configs;
    std::vector<std::uint64_t> seeds;
    std::string out;
    unsigned jobs = 1;
    std::string format = "json";
};

fs::path out_dir(const Common& c, kvf_experiment* exp) {
    if (!c.out.empty()) return c.out;
    return get([&](char** s) { return kvf_experiment_outputs(exp, s); });
}

int cmd_run(const Common& c, bool events) {
    if (c.configs.size() != 1) {
        std::cerr << "error [config]: run takes exactly one --config\n";
        return 2;
    }
    ExpPtr exp = load(c.configs[0], c.seeds);
    fs::path dir = out_dir(c, exp.get());
    int mj = 0, mc = 0, sc = 0, ev = 0;
    check(kvf_experiment_emit(exp.get(), &mj, &mc, &sc, &ev));
    ev = ev || events;

    std::string header = get([](char** s) { return kvf_aggregate_csv_header(s); });
    fs::path sweep = dir / "sweep.csv";
    std::string sweep_text = fs::exists(sweep) ? read_file(sweep) : header;
    std::string summary_csv = header;
    std::string summary_json = "[";

    std::size_t n = kvf_experiment_policy_count(exp.get());
    for (std::size_t p = 0; p < n; ++p) {
        std::string label = get([&](char** s) { return kvf_experiment_policy_label(exp.get(), p, s); });
        int ok = 0;
        char* why = nullptr;
        check(kvf_experiment_policy_applicable(exp.get(), p, &ok, &why));
        std::string reason = take(why);
        if (!ok) {
            std::cerr << label << ": skipped, " << reason << "\n";
            continue;
        }
        kvf_batch* batch = nullptr;
        check(kvf_run_batch(exp.get(), p, c.jobs, ev, &batch));
        std::unique_ptr<kvf_batch, void (*)(kvf_batch*)> hold(batch, kvf_batch_free);
        fs::path pdir = dir / safe_name(label);
        for (std::size_t i = 0; i < kvf_batch_size(batch); ++i) {
            const kvf_result* r = kvf_batch_result(batch, i);
            std::string stem = "seed_" + std::to_string(kvf_result_seed(r));
            std::string mjson = get([&](char** s) { return kvf_result_metrics_json(r, s); });
            if (mj) write_atomic(pdir / (stem + ".metrics.json"), mjson + "\n");
            if (mc) write_atomic(pdir / (stem + ".metrics.csv"), get([&](char** s) {
                                     return kvf_result_metrics_csv(r, s);
                                 }));
            if (sc) write_atomic(pdir / (stem + ".series.csv"), get([&](char** s) {
                                     return kvf_result_series_csv(r, s);
                                 }));
            if (ev) write_atomic(pdir / (stem + ".events.csv"), get([&](char** s) {
                                     return kvf_result_events_csv(r, s);
                                 }));
            summary_json += (summary_json.size() > 1 ? ",\n" : "\n") + mjson;
        }
        std::string row = get([&](char** s) { return kvf_batch_aggregate_csv(batch, 0, s); });
        sweep_text += row;
        summary_csv += row;
    }
    write_atomic(sweep, sweep_text);
    std::cout << (c.format == "csv" ? summary_csv : summary_json + "\n]\n");
    return 0;
}

int cmd_compare(const Common& c) {
    if (c.configs.empty()) {
        std::cerr << "error [config]: compare needs at least one --config\n";
        return 2;
    }
    std::vector<ExpPtr> exps;
    std::vector<const kvf_experiment*> raw;
    for (const auto& path : c.configs) {
        exps.push_back(load(path, c.seeds));
        raw.push_back(exps.back().get());
    }
    kvf_comparison* cmp = nullptr;
    check(kvf_compare(raw.data(), raw.size(), c.seeds.data(), c.seeds.size(), c.jobs, &cmp));
    std::unique_ptr<kvf_comparison, void (*)(kvf_comparison*)> hold(cmp, kvf_comparison_free);
    std::string csv = get([&](char** s) { return kvf_comparison_csv(cmp, s); });
    std::string json = get([&](char** s) { return kvf_comparison_json(cmp, s); });
    fs::path dir = out_dir(c, exps.front().get());
    write_atomic(dir / "comparison.csv", csv);
    write_atomic(dir / "comparison.json", json + "\n");
    write_atomic(dir / "usage.csv", get([&](char** s) { return kvf_comparison_usage_csv(cmp, s); }));
    for (std::size_t i = 0; i < kvf_comparison_rows(cmp); ++i) {
        if (!kvf_comparison_row_applicable(cmp, i)) continue;
        std::string label = get([&](char** s) { return kvf_comparison_row_label(cmp, i, s); });
        write_atomic(dir / ("usage_" + safe_name(label) + ".csv"),
                     get([&](char** s) { return kvf_comparison_row_usage_csv(cmp, i, s); }));
    }
    std::cout << (c.format == "csv" ? csv : json + "\n");
    return 0;
}

int cmd_stability(const Common& c) {
    if (c.configs.size() != 1) {
        std::cerr << "error [config]: stability takes exactly one --config\n";
        return 2;
    }
    ExpPtr exp = load(c.configs[0], c.seeds);
    std::string json = get([&](char** s) { return kvf_stability_json(exp.get(), s); });
    if (!c.out.empty()) write_atomic(fs::path(c.out) / "stability.json", json + "\n");
    std::cout << json << "\n";
    return 0;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> g;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            g.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            std::cerr << "error [grid]: not a number: '" << item << "'\n";
            throw Failure{2};
        }
    }
    return g;
}

int cmd_budget_search(const Common& c, const std::string& family, const std::string& objective,
                      const std::string& grid_text) {
    if (c.configs.size() != 1) {
        std::cerr << "error [config]: budget-search takes exactly one --config\n";
        return 2;
    }
    ExpPtr exp = load(c.configs[0], c.seeds);
    std::vector<double> grid = grid_text.empty() ? std::vector<double>{} : parse_grid(grid_text);
    char* csv = nullptr;
    double best = 0;
    check(kvf_budget_search(exp.get(), family.c_str(), objective.c_str(), grid.empty() ? nullptr : grid.data(),
                            grid.size(), c.jobs, &csv, &best));
    std::string table = take(csv);
    if (!c.out.empty()) write_atomic(fs::path(c.out) / ("budget_search_" + family + ".csv"), table);
    if (c.format == "csv") {
        std::cout << table;
    } else {
        std::cout << "{\"family\": \"" << family << "\", \"objective\": \"" << objective << "\", \"best\": " << best
                  << "}\n";
    }
    return 0;
}

int cmd_oracle(const Common& c, const std::string& instance, const std::string& objective) {
    std::string json;
    if (!instance.empty()) {
        std::string text = read_file(instance);
        json = get([&](char** s) { return kvf_oracle_solve_json(text.c_str(), s); });
    } else if (c.configs.size() == 1) {
        ExpPtr exp = load(c.configs[0], c.seeds);
        std::uint64_t seed = kvf_experiment_seed(exp.get(), 0);
        json = get([&](char** s) { return kvf_oracle_solve_config(exp.get(), seed, objective.c_str(), s); });
    } else {
        std::cerr << "error [instance]: oracle needs --instance or one --config\n";
        return 2;
    }
    if (!c.out.empty()) write_atomic(fs::path(c.out) / "oracle.json", json + "\n");
    std::cout << json << "\n";
    return 0;
}

int cmd_ingest(const Common& c, const std::string& trace, const std::string& trace_format) {
    char* summary = nullptr;
    char* normalized = nullptr;
    check(kvf_ingest(trace.c_str(), trace_format.c_str(), &summary, &normalized));
    std::string s = take(summary);
    std::string n = take(normalized);
    if (!c.out.empty()) {
        write_atomic(fs::path(c.out) / "ingest_summary.json", s + "\n");
        write_atomic(fs::path(c.out) / "trace.normalized.jsonl", n);
    }
    std::cout << s << "\n";
    return 0;
}

void add_common(CLI::App* sub, Common& c, bool config_required) {
    auto* opt = sub->add_option("--config", c.configs, "experiment config (JSON)");
    if (config_required) opt->required();
    sub->add_option("--seed", c.seeds, "seed; repeat to override the config's list");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--jobs", c.jobs, "parallel runs")->check(CLI::PositiveNumber);
    sub->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KV-cache scheduling simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kvf_version()));

    Common c;
    bool events = false;
    std::string family = "flow_unknown", objective = "token_throughput", grid;
    std::string oracle_objective = "avg_latency", instance;
    std::string trace, trace_format = "jsonl";

    auto* run = app.add_subcommand("run", "simulate each configured policy over every seed");
    add_common(run, c, true);
    run->add_flag("--events", events, "also write per-seed event logs");

    auto* compare = app.add_subcommand("compare", "side-by-side policy table for configs sharing a workload");
    add_common(compare, c, true);

    auto* stability = app.add_subcommand("stability", "load analysis of the configured workload and budgets");
    add_common(stability, c, true);

    auto* search = app.add_subcommand("budget-search", "grid search over a budget family");
    add_common(search, c, true);
    search->add_option("--family", family, "flow_unknown | flow_known | alpha")
        ->check(CLI::IsMember({"flow_unknown", "flow_known", "alpha"}));
    search->add_option("--objective", objective, "avg_latency | p95_latency | request_throughput | token_throughput");
    search->add_option("--grid", grid, "comma separated budget values");

    auto* oracle = app.add_subcommand("oracle", "exact offline optimum of a small instance");
    add_common(oracle, c, false);
    oracle->add_option("--instance", instance, "offline instance (JSON)");
    oracle->add_option("--objective", oracle_objective, "objective when solving from --config");

    auto* ingest = app.add_subcommand("ingest", "read a trace and summarize its lengths");
    add_common(ingest, c, false);
    ingest->add_option("--trace", trace, "trace file")->required();
    ingest->add_option("--trace-format", trace_format, "jsonl | raw_pairs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(c, events);
        if (*compare) return cmd_compare(c);
        if (*stability) return cmd_stability(c);
        if (*search) return cmd_budget_search(c, family, objective, grid);
        if (*oracle) return cmd_oracle(c, instance, oracle_objective);
        if (*ingest) return cmd_ingest(c, trace, trace_format);
    } catch (const Failure& f) {
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
