#include "kvflow/kvflow.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "kvflow/errors.hpp"
#include "kvflow/experiment.hpp"

using namespace kvflow;

struct kvf_experiment {
    ExperimentConfig config;
};

struct kvf_result {
    SeedRun run;
    std::string label;
};

struct kvf_batch {
    std::vector<kvf_result> results;
    std::string label;
    std::string policy;
};

struct kvf_comparison {
    Comparison cmp;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_field;

kvf_status fail(kvf_status status, std::string message, std::string field = {}) {
    g_error = std::move(message);
    g_field = std::move(field);
    return status;
}

template <typename Fn>
kvf_status guarded(Fn&& fn) {
    try {
        g_error.clear();
        g_field.clear();
        fn();
        return KVF_OK;
    } catch (const ConfigError& e) {
        return fail(KVF_ERR_CONFIG, e.what(), e.field());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(KVF_ERR_IO, e.what());
    } catch (const SimulationError& e) {
        return fail(KVF_ERR_RUNTIME, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(KVF_ERR_ARGUMENT, e.what());
    } catch (const std::domain_error& e) {
        return fail(KVF_ERR_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(KVF_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(KVF_ERR_RUNTIME, "unknown error");
    }
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

void need(const void* p, const char* what) {
    if (!p) throw std::invalid_argument(std::string(what) + " is null");
}

const PolicySpec& policy_at(const kvf_experiment* exp, size_t index) {
    need(exp, "experiment");
    if (index >= exp->config.policies.size()) throw std::invalid_argument("policy index out of range");
    return exp->config.policies[index];
}

}  // namespace

extern "C" {

const char* kvf_version(void) { return "0.1.0"; }
const char* kvf_last_error(void) { return g_error.c_str(); }
const char* kvf_last_error_field(void) { return g_field.c_str(); }
void kvf_string_free(char* s) { std::free(s); }

kvf_status kvf_experiment_load_file(const char* path, kvf_experiment** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        if (!std::filesystem::exists(path)) throw ConfigError("config", std::string("no such file: ") + path);
        *out = new kvf_experiment{load_config(path)};
    });
}

kvf_status kvf_experiment_load_json(const char* json, const char* base_dir, kvf_experiment** out) {
    return guarded([&] {
        need(json, "json");
        need(out, "out");
        Json doc;
        try {
            doc = Json::parse(json);
        } catch (const std::exception& e) {
            throw ConfigError("config", std::string("invalid JSON: ") + e.what());
        }
        *out = new kvf_experiment{parse_config(doc, base_dir ? base_dir : "")};
    });
}

void kvf_experiment_free(kvf_experiment* exp) { delete exp; }

kvf_status kvf_experiment_set_seeds(kvf_experiment* exp, const uint64_t* seeds, size_t count) {
    return guarded([&] {
        need(exp, "experiment");
        if (count == 0) throw ConfigError("seeds", "at least one seed is required");
        need(seeds, "seeds");
        exp->config.seeds.assign(seeds, seeds + count);
    });
}

size_t kvf_experiment_seed_count(const kvf_experiment* exp) { return exp ? exp->config.seeds.size() : 0; }

uint64_t kvf_experiment_seed(const kvf_experiment* exp, size_t index) {
    return exp && index < exp->config.seeds.size() ? exp->config.seeds[index] : 0;
}

size_t kvf_experiment_policy_count(const kvf_experiment* exp) { return exp ? exp->config.policies.size() : 0; }

kvf_status kvf_experiment_policy_label(const kvf_experiment* exp, size_t index, char** out) {
    return guarded([&] {
        need(out, "out");
        *out = dup(policy_at(exp, index).label);
    });
}

kvf_status kvf_experiment_policy_applicable(const kvf_experiment* exp, size_t index, int* ok, char** reason) {
    return guarded([&] {
        need(ok, "ok");
        std::string why;
        *ok = applicable(policy_at(exp, index), exp->config.workload, &why) ? 1 : 0;
        if (reason) *reason = dup(why);
    });
}

kvf_status kvf_experiment_name(const kvf_experiment* exp, char** out) {
    return guarded([&] {
        need(exp, "experiment");
        need(out, "out");
        *out = dup(exp->config.name);
    });
}

kvf_status kvf_experiment_outputs(const kvf_experiment* exp, char** out) {
    return guarded([&] {
        need(exp, "experiment");
        need(out, "out");
        *out = dup(exp->config.outputs);
    });
}

kvf_status kvf_experiment_emit(const kvf_experiment* exp, int* metrics_json, int* metrics_csv, int* series_csv,
                               int* event_log) {
    return guarded([&] {
        need(exp, "experiment");
        const EmitFlags& e = exp->config.emit;
        if (metrics_json) *metrics_json = e.metrics_json;
        if (metrics_csv) *metrics_csv = e.metrics_csv;
        if (series_csv) *series_csv = e.series_csv;
        if (event_log) *event_log = e.event_log;
    });
}

kvf_status kvf_run(const kvf_experiment* exp, size_t policy_index, uint64_t seed, int record_events,
                   kvf_result** out) {
    return guarded([&] {
        need(out, "out");
        const PolicySpec& spec = policy_at(exp, policy_index);
        std::string reason;
        if (!applicable(spec, exp->config.workload, &reason)) throw ConfigError("policy.name", reason);
        auto* res = new kvf_result{run_seed(exp->config, spec, seed, run_options(exp->config, record_events != 0)),
                                   spec.label};
        *out = res;
    });
}

void kvf_result_free(kvf_result* res) { delete res; }

uint64_t kvf_result_seed(const kvf_result* res) { return res ? res->run.seed : 0; }

kvf_status kvf_result_metrics_json(const kvf_result* res, char** out) {
    return guarded([&] {
        need(res, "result");
        need(out, "out");
        Json j = to_json(res->run.metrics);
        j["label"] = res->label;
        j["policy"] = res->run.result.policy;
        j["seed"] = res->run.seed;
        *out = dup(j.dump(2));
    });
}

kvf_status kvf_result_metrics_csv(const kvf_result* res, char** out) {
    return guarded([&] {
        need(res, "result");
        need(out, "out");
        *out = dup(metrics_csv_header() + "\n" + metrics_csv_row(res->label, res->run.metrics) + "\n");
    });
}

kvf_status kvf_result_series_csv(const kvf_result* res, char** out) {
    return guarded([&] {
        need(res, "result");
        need(out, "out");
        *out = dup(series_csv(res->run.result));
    });
}

kvf_status kvf_result_events_csv(const kvf_result* res, char** out) {
    return guarded([&] {
        need(res, "result");
        need(out, "out");
        *out = dup(events_csv(res->run.result));
    });
}

kvf_status kvf_result_json(const kvf_result* res, int include_events, char** out) {
    return guarded([&] {
        need(res, "result");
        need(out, "out");
        *out = dup(to_json(res->run.result, include_events != 0).dump(2));
    });
}

kvf_status kvf_run_batch(const kvf_experiment* exp, size_t policy_index, unsigned jobs, int record_events,
                         kvf_batch** out) {
    return guarded([&] {
        need(out, "out");
        const PolicySpec& spec = policy_at(exp, policy_index);
        std::string reason;
        if (!applicable(spec, exp->config.workload, &reason)) throw ConfigError("policy.name", reason);
        auto runs = run_seeds(exp->config, spec, exp->config.seeds, run_options(exp->config, record_events != 0),
                              jobs);
        auto* batch = new kvf_batch;
        batch->label = spec.label;
        batch->policy = std::string(to_string(spec.kind));
        for (auto& r : runs) batch->results.push_back(kvf_result{std::move(r), spec.label});
        *out = batch;
    });
}

void kvf_batch_free(kvf_batch* batch) { delete batch; }

size_t kvf_batch_size(const kvf_batch* batch) { return batch ? batch->results.size() : 0; }

const kvf_result* kvf_batch_result(const kvf_batch* batch, size_t index) {
    if (!batch || index >= batch->results.size()) return nullptr;
    return &batch->results[index];
}

kvf_status kvf_batch_aggregate_csv(const kvf_batch* batch, int include_header, char** out) {
    return guarded([&] {
        need(batch, "batch");
        need(out, "out");
        std::vector<MetricsReport> reports;
        for (const auto& r : batch->results) reports.push_back(r.run.metrics);
        std::string s;
        if (include_header) s = aggregate_csv_header() + "\n";
        s += aggregate_csv_row(aggregate(batch->label, batch->policy, reports)) + "\n";
        *out = dup(s);
    });
}

kvf_status kvf_aggregate_csv_header(char** out) {
    return guarded([&] {
        need(out, "out");
        *out = dup(aggregate_csv_header() + "\n");
    });
}

kvf_status kvf_compare(const kvf_experiment* const* exps, size_t count, const uint64_t* seeds, size_t seed_count,
                       unsigned jobs, kvf_comparison** out) {
    return guarded([&] {
        need(exps, "experiments");
        need(out, "out");
        std::vector<ExperimentConfig> configs;
        for (size_t i = 0; i < count; ++i) {
            need(exps[i], "experiment");
            configs.push_back(exps[i]->config);
        }
        std::vector<std::uint64_t> s;
        if (seed_count) {
            need(seeds, "seeds");
            s.assign(seeds, seeds + seed_count);
        }
        *out = new kvf_comparison{compare(configs, s, jobs)};
    });
}

void kvf_comparison_free(kvf_comparison* cmp) { delete cmp; }

size_t kvf_comparison_rows(const kvf_comparison* cmp) { return cmp ? cmp->cmp.rows.size() : 0; }

kvf_status kvf_comparison_csv(const kvf_comparison* cmp, char** out) {
    return guarded([&] {
        need(cmp, "comparison");
        need(out, "out");
        *out = dup(comparison_csv(cmp->cmp));
    });
}

kvf_status kvf_comparison_json(const kvf_comparison* cmp, char** out) {
    return guarded([&] {
        need(cmp, "comparison");
        need(out, "out");
        Json j;
        j["name"] = cmp->cmp.name;
        j["kv_capacity"] = cmp->cmp.kv_capacity;
        Json rows = Json::array();
        for (const auto& row : cmp->cmp.rows) {
            Json r;
            r["label"] = row.aggregate.label;
            r["policy"] = row.aggregate.policy;
            r["applicable"] = row.aggregate.applicable;
            r["seeds"] = row.aggregate.seeds;
            if (!row.aggregate.note.empty()) r["note"] = row.aggregate.note;
            if (row.aggregate.applicable) {
                Json m;
                for (const auto& [name, stat] : row.aggregate.metrics) {
                    m[name] = {{"mean", std::isnan(stat.mean) ? Json(nullptr) : Json(stat.mean)},
                               {"std", std::isnan(stat.std) ? Json(nullptr) : Json(stat.std)}};
                }
                r["metrics"] = m;
                r["max_usage"] = row.max_usage;
            }
            rows.push_back(r);
        }
        j["rows"] = rows;
        *out = dup(j.dump(2));
    });
}

kvf_status kvf_comparison_usage_csv(const kvf_comparison* cmp, char** out) {
    return guarded([&] {
        need(cmp, "comparison");
        need(out, "out");
        std::vector<const ComparisonRow*> rows;
        for (const auto& r : cmp->cmp.rows) {
            if (r.aggregate.applicable) rows.push_back(&r);
        }
        std::string s = "slot";
        std::size_t len = 0;
        for (const auto* r : rows) {
            s += "," + r->aggregate.label;
            len = std::max(len, r->usage_series.size());
        }
        s += "\n";
        for (std::size_t t = 0; t < len; ++t) {
            s += std::to_string(t + 1);
            for (const auto* r : rows) {
                s += ",";
                if (t < r->usage_series.size()) s += std::to_string(r->usage_series[t]);
            }
            s += "\n";
        }
        *out = dup(s);
    });
}

kvf_status kvf_comparison_row_label(const kvf_comparison* cmp, size_t index, char** out) {
    return guarded([&] {
        need(cmp, "comparison");
        need(out, "out");
        if (index >= cmp->cmp.rows.size()) throw std::invalid_argument("row index out of range");
        *out = dup(cmp->cmp.rows[index].aggregate.label);
    });
}

int kvf_comparison_row_applicable(const kvf_comparison* cmp, size_t index) {
    return cmp && index < cmp->cmp.rows.size() && cmp->cmp.rows[index].aggregate.applicable ? 1 : 0;
}

kvf_status kvf_comparison_row_usage_csv(const kvf_comparison* cmp, size_t index, char** out) {
    return guarded([&] {
        need(cmp, "comparison");
        need(out, "out");
        if (index >= cmp->cmp.rows.size()) throw std::invalid_argument("row index out of range");
        const auto& series = cmp->cmp.rows[index].usage_series;
        std::string s = "slot,usage\n";
        for (std::size_t t = 0; t < series.size(); ++t) {
            s += std::to_string(t + 1) + "," + std::to_string(series[t]) + "\n";
        }
        *out = dup(s);
    });
}

kvf_status kvf_stability_json(const kvf_experiment* exp, char** out) {
    return guarded([&] {
        need(exp, "experiment");
        need(out, "out");
        *out = dup(stability_report(exp->config).dump(2));
    });
}

kvf_status kvf_budget_search(const kvf_experiment* exp, const char* family, const char* objective,
                             const double* grid, size_t grid_count, unsigned jobs, char** csv, double* best) {
    return guarded([&] {
        need(exp, "experiment");
        need(family, "family");
        need(objective, "objective");
        BudgetFamily fam = budget_family_from_string(family);
        Objective obj;
        try {
            obj = objective_from_string(objective);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("objective", e.what());
        }
        std::vector<double> g = grid && grid_count ? std::vector<double>(grid, grid + grid_count) : default_grid(fam);
        BudgetSearchResult r = budget_search(exp->config, fam, obj, g, exp->config.seeds, jobs);
        if (csv) *csv = dup(budget_search_csv(r));
        if (best) *best = r.best;
    });
}

kvf_status kvf_oracle_solve_json(const char* instance_json, char** out) {
    return guarded([&] {
        need(instance_json, "instance");
        need(out, "out");
        Json doc;
        try {
            doc = Json::parse(instance_json);
        } catch (const std::exception& e) {
            throw ConfigError("instance", std::string("invalid JSON: ") + e.what());
        }
        oracle::OfflineInstance inst = offline_instance_from_json(doc);
        *out = dup(to_json(oracle::solve(inst), inst).dump(2));
    });
}

kvf_status kvf_oracle_solve_config(const kvf_experiment* exp, uint64_t seed, const char* objective, char** out) {
    return guarded([&] {
        need(exp, "experiment");
        need(out, "out");
        Objective obj = Objective::AvgLatency;
        if (objective) {
            try {
                obj = objective_from_string(objective);
            } catch (const std::invalid_argument& e) {
                throw ConfigError("objective", e.what());
            }
        }
        oracle::OfflineInstance inst = offline_instance(exp->config, seed, obj);
        Json j = to_json(oracle::solve(inst), inst);
        j["instance"] = to_json(inst);
        *out = dup(j.dump(2));
    });
}

kvf_status kvf_ingest(const char* path, const char* format, char** summary, char** normalized) {
    return guarded([&] {
        need(path, "path");
        TraceFormat fmt = parse_trace_format(format ? format : "jsonl");
        std::ifstream in(path);
        if (!in) {
            g_field = "trace";
            throw std::filesystem::filesystem_error("cannot open trace", path,
                                                    std::make_error_code(std::errc::no_such_file_or_directory));
        }
        IngestResult r = ingest_trace(in, fmt);
        if (summary) {
            Json j = to_json(r);
            j["path"] = path;
            if (!r.records.empty()) j["lengths"] = to_json(sample_lengths_summary(r.records));
            *summary = dup(j.dump(2));
        }
        if (normalized) {
            std::string s;
            for (const auto& rec : r.records) {
                Json line = {{"id", rec.record_id},
                             {"prompt_tokens", rec.prompt_tokens},
                             {"output_tokens", rec.output_tokens}};
                s += line.dump() + "\n";
            }
            *normalized = dup(s);
        }
    });
}

}  // extern "C"
