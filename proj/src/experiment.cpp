#include "kvflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "kvflow/errors.hpp"
#include "kvflow/stability.hpp"

namespace kvflow {

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::FlowKnown: return "flow_known";
        case PolicyKind::FlowUnknown: return "flow_unknown";
        case PolicyKind::Alpha: return "alpha";
        case PolicyKind::Mc: return "mc";
        case PolicyKind::McSf: return "mc_sf";
        case PolicyKind::Amin: return "amin";
        case PolicyKind::Oracle: return "oracle";
    }
    return "?";
}

PolicyKind policy_kind_from_string(std::string_view name) {
    for (auto k : {PolicyKind::FlowKnown, PolicyKind::FlowUnknown, PolicyKind::Alpha, PolicyKind::Mc,
                   PolicyKind::McSf, PolicyKind::Amin, PolicyKind::Oracle}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("policy.name", "unknown policy '" + std::string(name) + "'");
}

namespace {

const Json& require(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw ConfigError(path + key, "missing field");
    return obj[key];
}

std::int64_t get_int(const Json& v, const std::string& field) {
    if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
    return v.get<std::int64_t>();
}

double get_double(const Json& v, const std::string& field) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    return v.get<double>();
}

Rational get_rational(const Json& v, const std::string& field) {
    try {
        if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
        if (v.is_number()) return Rational::from_double(v.get<double>());
        if (v.is_string()) return Rational::parse(v.get<std::string>());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(field, e.what());
    }
    throw ConfigError(field, "expected a number or a \"p/q\" string");
}

bool get_bool(const Json& obj, const std::string& key, bool fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) throw ConfigError(path + key, "expected true/false");
    return obj[key].get<bool>();
}

WorkloadSpec parse_workload(const Json& w, const std::filesystem::path& base_dir) {
    WorkloadSpec spec;
    std::string type = w.value("type", std::string("synthetic"));
    spec.horizon = get_int(require(w, "horizon", "workload."), "workload.horizon");
    spec.output_known = get_bool(w, "output_known", true, "workload.");
    if (type == "synthetic") {
        spec.kind = WorkloadKind::SyntheticClasses;
        const Json& classes = require(w, "classes", "workload.");
        if (!classes.is_array()) throw ConfigError("workload.classes", "expected an array");
        int next_id = 1;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            const Json& c = classes[i];
            std::string path = "workload.classes[" + std::to_string(i) + "].";
            ClassRate cr;
            cr.cls.class_id = c.contains("id") ? static_cast<int>(get_int(c["id"], path + "id")) : next_id;
            next_id = cr.cls.class_id + 1;
            cr.cls.prompt_len = get_int(require(c, "prompt_len", path), path + "prompt_len");
            cr.cls.decode_len = get_int(require(c, "decode_len", path), path + "decode_len");
            cr.rate = get_rational(require(c, "rate", path), path + "rate");
            spec.classes.push_back(cr);
        }
    } else if (type == "trace") {
        spec.kind = WorkloadKind::Trace;
        std::filesystem::path p = require(w, "path", "workload.").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        spec.trace_path = p.string();
        TraceFormat fmt = parse_trace_format(w.value("format", std::string("jsonl")));
        IngestResult ingested;
        try {
            ingested = ingest_trace(p, fmt);
        } catch (const std::runtime_error& e) {
            throw ConfigError("workload.path", e.what());
        }
        if (w.contains("max_records")) {
            auto n = static_cast<std::size_t>(get_int(w["max_records"], "workload.max_records"));
            if (ingested.records.size() > n) ingested.records.resize(n);
        }
        if (ingested.records.empty()) throw ConfigError("workload.path", "trace has no usable records");
        spec.trace = std::move(ingested.records);
        if (w.contains("rate")) {
            spec.trace_rate = get_rational(w["rate"], "workload.rate");
        } else if (w.contains("rate_per_second")) {
            Rational per_second = get_rational(w["rate_per_second"], "workload.rate_per_second");
            Rational slot_seconds = get_rational(require(w, "slot_seconds", "workload."), "workload.slot_seconds");
            spec.trace_rate = per_second * slot_seconds;
        } else {
            throw ConfigError("workload.rate", "missing field (or rate_per_second + slot_seconds)");
        }
    } else {
        throw ConfigError("workload.type", "expected synthetic or trace");
    }
    validate(spec);
    return spec;
}

PolicySpec parse_policy(const Json& p, const WorkloadSpec& workload, const std::string& path) {
    if (!p.is_object()) throw ConfigError(path, "expected an object");
    PolicySpec spec;
    spec.kind = policy_kind_from_string(require(p, "name", path + ".").get<std::string>());
    spec.label = p.value("label", std::string(to_string(spec.kind)));
    switch (spec.kind) {
        case PolicyKind::FlowKnown: {
            const Json& b = require(p, "budgets", path + ".");
            if (b.is_array()) {
                if (b.size() != workload.classes.size()) {
                    throw ConfigError(path + ".budgets", "need one budget per workload class");
                }
                for (std::size_t i = 0; i < b.size(); ++i) {
                    spec.budgets[workload.classes[i].cls.class_id] = get_int(b[i], path + ".budgets");
                }
            } else if (b.is_object()) {
                for (const auto& [k, v] : b.items()) spec.budgets[std::stoi(k)] = get_int(v, path + ".budgets." + k);
            } else {
                throw ConfigError(path + ".budgets", "expected an array or an object");
            }
            break;
        }
        case PolicyKind::FlowUnknown:
            spec.mean_budget = get_rational(require(p, "b", path + "."), path + ".b");
            if (spec.mean_budget < Rational(0)) throw ConfigError(path + ".b", "must be >= 0");
            if (p.contains("cap")) spec.cap = get_int(p["cap"], path + ".cap");
            break;
        case PolicyKind::Alpha:
            spec.alpha = get_double(require(p, "alpha", path + "."), path + ".alpha");
            if (!(spec.alpha >= 0 && spec.alpha < 1)) throw ConfigError(path + ".alpha", "must lie in [0, 1)");
            break;
        case PolicyKind::Mc:
            if (p.contains("assume_max_output")) {
                spec.assume_max_output = get_int(p["assume_max_output"], path + ".assume_max_output");
            }
            if (!workload.output_known && !spec.assume_max_output) {
                throw ConfigError(path + ".assume_max_output", "required when output lengths are unknown");
            }
            break;
        case PolicyKind::McSf: break;
        case PolicyKind::Amin:
            if (p.contains("o_min")) spec.o_min = get_int(p["o_min"], path + ".o_min");
            break;
        case PolicyKind::Oracle:
            try {
                spec.objective = objective_from_string(p.value("objective", std::string("avg_latency")));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(path + ".objective", e.what());
            }
            break;
    }
    return spec;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

ExperimentConfig parse_config(const Json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
    ExperimentConfig cfg;
    cfg.name = doc.value("name", std::string("experiment"));
    cfg.workload_json = require(doc, "workload", "");
    cfg.workload = parse_workload(cfg.workload_json, base_dir);
    cfg.kv_capacity = get_int(require(doc, "kv_capacity", ""), "kv_capacity");
    if (cfg.kv_capacity < 2) throw ConfigError("kv_capacity", "must be >= 2");

    if (doc.contains("policies")) {
        const Json& list = doc["policies"];
        if (!list.is_array() || list.empty()) throw ConfigError("policies", "expected a non-empty array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            cfg.policies.push_back(parse_policy(list[i], cfg.workload, "policies[" + std::to_string(i) + "]"));
        }
    } else if (doc.contains("policy")) {
        cfg.policies.push_back(parse_policy(doc["policy"], cfg.workload, "policy"));
    } else {
        throw ConfigError("policy", "missing field");
    }

    const Json& seeds = require(doc, "seeds", "");
    if (!seeds.is_array()) throw ConfigError("seeds", "expected an array of integers");
    for (const auto& s : seeds) {
        if (!s.is_number_unsigned()) throw ConfigError("seeds", "seeds must be nonnegative integers");
        cfg.seeds.push_back(s.get<std::uint64_t>());
    }
    if (cfg.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");

    cfg.outputs = doc.value("outputs", std::string("out"));
    if (doc.contains("emit")) {
        const Json& e = doc["emit"];
        cfg.emit.metrics_json = get_bool(e, "metrics_json", cfg.emit.metrics_json, "emit.");
        cfg.emit.metrics_csv = get_bool(e, "metrics_csv", cfg.emit.metrics_csv, "emit.");
        cfg.emit.series_csv = get_bool(e, "series_csv", cfg.emit.series_csv, "emit.");
        cfg.emit.event_log = get_bool(e, "event_log", cfg.emit.event_log, "emit.");
    }
    if (doc.contains("slot_cost")) {
        const Json& c = doc["slot_cost"];
        cfg.slot_cost.fixed = c.contains("fixed") ? get_double(c["fixed"], "slot_cost.fixed") : 1.0;
        cfg.slot_cost.per_prefill =
            c.contains("per_prefill") ? get_double(c["per_prefill"], "slot_cost.per_prefill") : 0.0;
        cfg.slot_cost.per_decode = c.contains("per_decode") ? get_double(c["per_decode"], "slot_cost.per_decode") : 0.0;
        if (cfg.slot_cost.fixed < 0 || cfg.slot_cost.per_prefill < 0 || cfg.slot_cost.per_decode < 0) {
            throw ConfigError("slot_cost", "coefficients must be nonnegative");
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc, path.parent_path());
}

bool applicable(const PolicySpec& spec, const WorkloadSpec& workload, std::string* reason) {
    auto fail = [&](const char* why) {
        if (reason) *reason = why;
        return false;
    };
    if (spec.kind == PolicyKind::McSf && !workload.output_known) {
        return fail("needs decode lengths; outputs are unknown");
    }
    if (spec.kind == PolicyKind::FlowKnown) {
        if (workload.kind != WorkloadKind::SyntheticClasses) return fail("needs request classes");
        if (!workload.output_known) return fail("needs decode lengths; outputs are unknown");
    }
    return true;
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const ExperimentConfig& config, std::uint64_t seed) {
    const WorkloadSpec& w = config.workload;
    switch (spec.kind) {
        case PolicyKind::FlowKnown: return std::make_unique<FlowControlKnown>(spec.budgets);
        case PolicyKind::FlowUnknown: return std::make_unique<FlowControlUnknown>(spec.mean_budget, spec.cap, seed);
        case PolicyKind::Alpha: return std::make_unique<AlphaProtection>(spec.alpha);
        case PolicyKind::Mc: return std::make_unique<MemoryConstrained>(spec.assume_max_output);
        case PolicyKind::McSf: return std::make_unique<MemoryConstrainedShortestFirst>();
        case PolicyKind::Amin: {
            Tokens o_min = 1;
            if (spec.o_min) {
                o_min = *spec.o_min;
            } else if (w.kind == WorkloadKind::SyntheticClasses && !w.classes.empty()) {
                o_min = std::numeric_limits<Tokens>::max();
                for (const auto& c : w.classes) o_min = std::min(o_min, c.cls.decode_len);
            } else if (!w.trace.empty()) {
                o_min = std::numeric_limits<Tokens>::max();
                for (const auto& r : w.trace) o_min = std::min(o_min, r.output_tokens);
            }
            return std::make_unique<Amin>(o_min);
        }
        case PolicyKind::Oracle:
            throw ConfigError("policy.name", "oracle is an offline solver, not an online policy");
    }
    return nullptr;
}

RunOptions run_options(const ExperimentConfig& config, bool record_events) {
    RunOptions o;
    o.record_events = record_events;
    o.cost = config.slot_cost;
    return o;
}

oracle::OfflineInstance offline_instance(const ExperimentConfig& config, std::uint64_t seed, Objective objective) {
    ArrivalStream arrivals = generate_arrivals(config.workload, seed);
    oracle::OfflineInstance inst;
    inst.kv_capacity = config.kv_capacity;
    inst.horizon = config.workload.horizon;
    inst.objective = objective;
    for (const auto& slot : arrivals.slots) {
        for (const auto& r : slot) inst.requests.push_back({r.id, r.prompt_len, r.decode_len, r.arrival_slot, r.class_id});
    }
    return inst;
}

SeedRun run_seed(const ExperimentConfig& config, const PolicySpec& spec, std::uint64_t seed, RunOptions options) {
    SeedRun out;
    out.seed = seed;
    if (spec.kind == PolicyKind::Oracle) {
        oracle::OfflineInstance inst = offline_instance(config, seed, spec.objective);
        oracle::Solution sol = oracle::solve(inst);
        ScheduledPolicy replay(sol.schedule);
        out.result = run(oracle::to_arrivals(inst), replay, inst.kv_capacity, true, options);
        out.result.policy = "oracle";
    } else {
        std::unique_ptr<Policy> policy = make_policy(spec, config, seed);
        out.result = run(config.workload, *policy, config.kv_capacity, seed, options);
    }
    out.metrics = compute_metrics(out.result);
    return out;
}

std::vector<SeedRun> run_seeds(const ExperimentConfig& config, const PolicySpec& spec,
                               std::span<const std::uint64_t> seeds, RunOptions options, unsigned jobs) {
    std::vector<SeedRun> out(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) { out[i] = run_seed(config, spec, seeds[i], options); });
    return out;
}

// --- aggregation -----------------------------------------------------------------

namespace {

const std::vector<std::string>& aggregate_metrics() {
    static const std::vector<std::string> names = {
        "completed",       "avg_latency",     "p95_latency",  "request_throughput", "token_throughput",
        "token_throughput_incl_wasted", "wasted_tokens", "overflow_events", "eviction_events",
        "kv_util_mean",    "kv_util_max",     "queue_growth_slope", "wall_time"};
    return names;
}

std::optional<double> metric_of(const MetricsReport& m, const std::string& name) {
    if (name == "completed") return static_cast<double>(m.completed);
    if (name == "avg_latency") return m.avg_latency;
    if (name == "p95_latency") {
        return m.p95_latency ? std::optional<double>(static_cast<double>(*m.p95_latency)) : std::nullopt;
    }
    if (name == "request_throughput") return m.request_throughput;
    if (name == "token_throughput") return m.token_throughput;
    if (name == "token_throughput_incl_wasted") return m.token_throughput_incl_wasted;
    if (name == "wasted_tokens") return static_cast<double>(m.wasted_tokens);
    if (name == "overflow_events") return static_cast<double>(m.overflow_events);
    if (name == "eviction_events") return static_cast<double>(m.eviction_events);
    if (name == "kv_util_mean") return m.kv_utilization.mean;
    if (name == "kv_util_max") return m.kv_utilization.max;
    if (name == "queue_growth_slope") return m.queue_growth_slope;
    if (name == "wall_time") return m.wall_time;
    return std::nullopt;
}

std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

}  // namespace

AggregateRow aggregate(std::string label, std::string policy, std::span<const MetricsReport> reports) {
    AggregateRow row;
    row.label = std::move(label);
    row.policy = std::move(policy);
    row.seeds = reports.size();
    for (const auto& name : aggregate_metrics()) {
        std::vector<double> xs;
        for (const auto& r : reports) {
            if (auto v = metric_of(r, name)) xs.push_back(*v);
        }
        MetricStat s;
        if (xs.empty()) {
            s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
        } else {
            double sum = 0;
            for (double x : xs) sum += x;
            s.mean = sum / static_cast<double>(xs.size());
            double sq = 0;
            for (double x : xs) sq += (x - s.mean) * (x - s.mean);
            s.std = xs.size() > 1 ? std::sqrt(sq / static_cast<double>(xs.size() - 1)) : 0.0;
        }
        row.metrics.emplace_back(name, s);
    }
    return row;
}

std::string aggregate_csv_header() {
    std::string out = "label,policy,applicable,seeds";
    for (const auto& name : aggregate_metrics()) out += "," + name + "_mean," + name + "_std";
    out += ",note";
    return out;
}

std::string aggregate_csv_row(const AggregateRow& row) {
    std::string out = row.label + "," + row.policy + "," + (row.applicable ? "true" : "false") + "," +
                      std::to_string(row.seeds);
    for (const auto& name : aggregate_metrics()) {
        auto it = std::find_if(row.metrics.begin(), row.metrics.end(), [&](const auto& m) { return m.first == name; });
        if (it == row.metrics.end() || !row.applicable) {
            out += ",,";
        } else {
            out += "," + cell(it->second.mean) + "," + cell(it->second.std);
        }
    }
    std::string note = row.note;
    std::replace(note.begin(), note.end(), ',', ';');
    out += "," + note;
    return out;
}

AggregateRow parse_aggregate_csv_row(std::string_view line) {
    auto c = split_csv_line(line);
    const auto& names = aggregate_metrics();
    if (c.size() != 5 + 2 * names.size()) throw std::invalid_argument("aggregate row has the wrong cell count");
    AggregateRow row;
    row.label = c[0];
    row.policy = c[1];
    row.applicable = c[2] == "true";
    row.seeds = static_cast<std::size_t>(std::stoull(c[3]));
    for (std::size_t i = 0; i < names.size(); ++i) {
        const std::string& m = c[4 + 2 * i];
        const std::string& s = c[5 + 2 * i];
        if (m.empty() && !row.applicable) continue;
        MetricStat st;
        st.mean = m.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(m);
        st.std = s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
        row.metrics.emplace_back(names[i], st);
    }
    row.note = c.back();
    return row;
}

// --- comparison ---------------------------------------------------------------

Comparison compare(std::span<const ExperimentConfig> configs, std::span<const std::uint64_t> seeds, unsigned jobs) {
    if (configs.empty()) throw ConfigError("config", "nothing to compare");
    const ExperimentConfig& base = configs.front();
    for (const auto& c : configs) {
        if (c.workload_json != base.workload_json) {
            throw ConfigError("workload", "configs '" + base.name + "' and '" + c.name + "' use different workloads");
        }
        if (c.kv_capacity != base.kv_capacity) {
            throw ConfigError("kv_capacity", "configs '" + base.name + "' and '" + c.name + "' differ in capacity");
        }
    }
    Comparison cmp;
    cmp.name = base.name;
    cmp.kv_capacity = base.kv_capacity;
    for (const auto& cfg : configs) {
        std::vector<std::uint64_t> use(seeds.begin(), seeds.end());
        if (use.empty()) use = cfg.seeds;
        for (const auto& spec : cfg.policies) {
            ComparisonRow row;
            std::string reason;
            if (!applicable(spec, cfg.workload, &reason)) {
                row.aggregate.label = spec.label;
                row.aggregate.policy = std::string(to_string(spec.kind));
                row.aggregate.applicable = false;
                row.aggregate.note = "inapplicable: " + reason;
                cmp.rows.push_back(std::move(row));
                continue;
            }
            auto runs = run_seeds(cfg, spec, use, run_options(cfg, false), jobs);
            std::vector<MetricsReport> reports;
            for (const auto& r : runs) {
                reports.push_back(r.metrics);
                for (Tokens u : r.result.usage) row.max_usage = std::max(row.max_usage, u);
            }
            row.aggregate = aggregate(spec.label, std::string(to_string(spec.kind)), reports);
            row.usage_series = runs.front().result.usage;
            cmp.rows.push_back(std::move(row));
        }
    }
    return cmp;
}

std::string comparison_csv(const Comparison& cmp) {
    std::string out = aggregate_csv_header() + "\n";
    for (const auto& row : cmp.rows) out += aggregate_csv_row(row.aggregate) + "\n";
    return out;
}

// --- stability report ---------------------------------------------------------

Json stability_report(const ExperimentConfig& config) {
    using namespace stability;
    const WorkloadSpec& w = config.workload;
    Json j;
    j["name"] = config.name;
    j["workload"] = w.kind == WorkloadKind::SyntheticClasses ? "synthetic" : "trace";
    j["capacity"] = config.kv_capacity;

    LengthDistribution dist;
    Rational total_rate(0);
    NecessaryCheck necessary;
    if (w.kind == WorkloadKind::SyntheticClasses) {
        std::vector<ClassLoad> loads;
        Json classes = Json::array();
        for (const auto& c : w.classes) {
            loads.push_back({c.cls.prompt_len, c.cls.decode_len, c.rate});
            total_rate += c.rate;
            classes.push_back({{"id", c.cls.class_id},
                               {"prompt_len", c.cls.prompt_len},
                               {"decode_len", c.cls.decode_len},
                               {"rate", c.rate.to_string()},
                               {"workload_tokens", workload_tokens(c.cls.prompt_len, c.cls.decode_len)}});
        }
        j["classes"] = classes;
        necessary = check_necessary_known(loads, config.kv_capacity);
        dist = LengthDistribution::from_classes(w.classes);
    } else {
        dist = LengthDistribution::empirical(w.trace);
        total_rate = w.trace_rate;
        necessary = check_necessary_unknown(dist, total_rate, config.kv_capacity);
        j["length_summary"] = to_json(sample_lengths_summary(w.trace));
    }
    j["arrival_rate"] = total_rate.to_double();
    j["mean_workload"] = dist.expected_workload().to_double();
    j["necessary"] = to_json(necessary);
    j["offered_load"] = necessary.offered_load.to_double();
    j["necessary_violated"] = necessary.necessary_violated;
    j["sufficient_holds"] = nullptr;
    j["epsilon_slack"] = nullptr;
    j["overflow_bound"] = nullptr;

    Json budgets = Json::array();
    for (const auto& spec : config.policies) {
        if (spec.kind == PolicyKind::FlowKnown && w.kind == WorkloadKind::SyntheticClasses) {
            std::vector<ClassLoad> loads;
            std::vector<std::int64_t> b;
            for (const auto& c : w.classes) {
                loads.push_back({c.cls.prompt_len, c.cls.decode_len, c.rate});
                auto it = spec.budgets.find(c.cls.class_id);
                b.push_back(it == spec.budgets.end() ? 0 : it->second);
            }
            SufficientCheck s = check_sufficient_known(loads, b, config.kv_capacity);
            Json entry = to_json(s);
            entry["policy"] = spec.label;
            budgets.push_back(entry);
            if (j["sufficient_holds"].is_null()) {
                j["sufficient_holds"] = s.sufficient_holds;
                j["epsilon_slack"] = s.epsilon_slack ? Json(*s.epsilon_slack) : Json(nullptr);
            }
        } else if (spec.kind == PolicyKind::FlowUnknown) {
            Json entry;
            entry["policy"] = spec.label;
            entry["b"] = spec.mean_budget.to_string();
            std::int64_t cap_a = spec.cap.value_or(spec.mean_budget.ceil());
            entry["cap_A"] = cap_a;
            entry["rate_condition"] = spec.mean_budget > total_rate;
            Rational eps = budget_slack(spec.mean_budget, dist, config.kv_capacity);
            entry["epsilon"] = eps.to_double();
            if (eps > Rational(0) && cap_a >= 1) {
                OverflowBound b = overflow_bound_from_slack(cap_a, eps.to_double(), dist.cap(), config.kv_capacity,
                                                            w.horizon);
                entry["overflow_bound"] = to_json(b);
                if (j["overflow_bound"].is_null()) j["overflow_bound"] = entry["overflow_bound"];
            } else {
                entry["overflow_bound"] = nullptr;
                entry["note"] = "b E[w] >= (1 - eps) M has no eps > 0; bound undefined";
            }
            if (j["epsilon_slack"].is_null()) j["epsilon_slack"] = eps.to_double();
            budgets.push_back(entry);
        }
    }
    j["budgets"] = budgets;
    return j;
}

// --- budget search ------------------------------------------------------------

BudgetFamily budget_family_from_string(std::string_view name) {
    if (name == "flow_unknown") return BudgetFamily::FlowUnknown;
    if (name == "flow_known") return BudgetFamily::FlowKnownUniform;
    if (name == "alpha") return BudgetFamily::Alpha;
    throw ConfigError("family", "unknown budget family '" + std::string(name) + "'");
}

std::string_view to_string(BudgetFamily family) {
    switch (family) {
        case BudgetFamily::FlowUnknown: return "flow_unknown";
        case BudgetFamily::FlowKnownUniform: return "flow_known";
        case BudgetFamily::Alpha: return "alpha";
    }
    return "?";
}

std::vector<double> default_grid(BudgetFamily family) {
    std::vector<double> g;
    if (family == BudgetFamily::Alpha) {
        for (int i = 0; i <= 10; ++i) g.push_back(i * 0.05);
    } else {
        for (int b = 1; b <= 16; ++b) g.push_back(b);
    }
    return g;
}

BudgetSearchResult budget_search(const ExperimentConfig& config, BudgetFamily family, Objective objective,
                                 std::span<const double> grid, std::span<const std::uint64_t> seeds, unsigned jobs) {
    if (grid.empty()) throw ConfigError("grid", "empty grid");
    std::vector<std::uint64_t> use(seeds.begin(), seeds.end());
    if (use.empty()) use = config.seeds;
    BudgetSearchResult out;
    out.family = family;
    out.objective = objective;
    bool have_best = false;
    double best_obj = 0;
    for (double v : grid) {
        PolicySpec spec;
        switch (family) {
            case BudgetFamily::FlowUnknown:
                spec.kind = PolicyKind::FlowUnknown;
                spec.mean_budget = Rational::from_double(v);
                break;
            case BudgetFamily::FlowKnownUniform:
                spec.kind = PolicyKind::FlowKnown;
                if (v < 1 || v != std::floor(v)) throw ConfigError("grid", "flow_known budgets must be integers >= 1");
                for (const auto& c : config.workload.classes) spec.budgets[c.cls.class_id] = static_cast<std::int64_t>(v);
                break;
            case BudgetFamily::Alpha:
                spec.kind = PolicyKind::Alpha;
                spec.alpha = v;
                break;
        }
        spec.label = std::string(to_string(family)) + "=" + format_double(v);
        std::string reason;
        if (!applicable(spec, config.workload, &reason)) throw ConfigError("family", reason);
        auto runs = run_seeds(config, spec, use, run_options(config, false), jobs);
        std::vector<MetricsReport> reports;
        double obj_sum = 0;
        for (const auto& r : runs) {
            reports.push_back(r.metrics);
            obj_sum += objective_value(r.metrics, objective);
        }
        BudgetSearchRow row;
        row.value = v;
        row.aggregate = aggregate(spec.label, std::string(to_string(spec.kind)), reports);
        row.objective = obj_sum / static_cast<double>(runs.size());
        bool better = !have_best || (maximized(objective) ? row.objective > best_obj : row.objective < best_obj);
        if (better) {
            have_best = true;
            best_obj = row.objective;
            out.best = v;
        }
        out.table.push_back(std::move(row));
    }
    return out;
}

std::string budget_search_csv(const BudgetSearchResult& result) {
    std::string out = "budget,objective," + aggregate_csv_header() + "\n";
    for (const auto& row : result.table) {
        out += format_double(row.value) + "," + format_double(row.objective) + "," + aggregate_csv_row(row.aggregate) +
               "\n";
    }
    return out;
}

}  // namespace kvflow
