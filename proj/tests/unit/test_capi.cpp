#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <memory>
#include <string>

#include "json.hpp"
#include "kvflow/kvflow.h"

namespace {

const std::string kSource = KVFLOW_SOURCE_DIR;

const char* kTiny = R"({
    "name": "tiny",
    "workload": {"type": "synthetic", "horizon": 200, "output_known": true,
                 "classes": [{"prompt_len": 4, "decode_len": 6, "rate": 0.5}]},
    "kv_capacity": 200,
    "policies": [{"name": "flow_unknown", "b": 1}, {"name": "mc"}],
    "seeds": [1, 2, 3]
})";

struct Str {
    char* p = nullptr;
    ~Str() { kvf_string_free(p); }
    std::string s() const { return p ? p : ""; }
};

std::ptrdiff_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

struct Exp {
    kvf_experiment* p = nullptr;
    ~Exp() { kvf_experiment_free(p); }
};

}  // namespace

TEST(CApi, VersionAndHeader) {
    EXPECT_NE(std::string(kvf_version()), "");
    Str h;
    ASSERT_EQ(kvf_aggregate_csv_header(&h.p), KVF_OK);
    EXPECT_EQ(h.s().rfind("label,policy,applicable,seeds,", 0), 0u);
}

TEST(CApi, LoadAndInspect) {
    Exp e;
    ASSERT_EQ(kvf_experiment_load_json(kTiny, nullptr, &e.p), KVF_OK) << kvf_last_error();
    EXPECT_EQ(kvf_experiment_seed_count(e.p), 3u);
    EXPECT_EQ(kvf_experiment_seed(e.p, 2), 3u);
    EXPECT_EQ(kvf_experiment_policy_count(e.p), 2u);
    Str label, name;
    ASSERT_EQ(kvf_experiment_policy_label(e.p, 1, &label.p), KVF_OK);
    EXPECT_EQ(label.s(), "mc");
    ASSERT_EQ(kvf_experiment_name(e.p, &name.p), KVF_OK);
    EXPECT_EQ(name.s(), "tiny");
    int ok = 0;
    Str why;
    ASSERT_EQ(kvf_experiment_policy_applicable(e.p, 0, &ok, &why.p), KVF_OK);
    EXPECT_EQ(ok, 1);
}

TEST(CApi, ConfigErrorsCarryField) {
    Exp e;
    EXPECT_EQ(kvf_experiment_load_json(R"({"kv_capacity": 10})", nullptr, &e.p), KVF_ERR_CONFIG);
    EXPECT_EQ(e.p, nullptr);
    EXPECT_NE(std::string(kvf_last_error()), "");
    EXPECT_NE(std::string(kvf_last_error_field()), "");
    EXPECT_EQ(kvf_experiment_load_json("{not json", nullptr, &e.p), KVF_ERR_CONFIG);
    // an unreadable config file is a configuration problem
    EXPECT_EQ(kvf_experiment_load_file("/nonexistent/cfg.json", &e.p), KVF_ERR_CONFIG);
}

TEST(CApi, NullArguments) {
    EXPECT_EQ(kvf_experiment_load_json(nullptr, nullptr, nullptr), KVF_ERR_ARGUMENT);
    kvf_result* r = nullptr;
    EXPECT_EQ(kvf_run(nullptr, 0, 1, 0, &r), KVF_ERR_ARGUMENT);
    kvf_experiment_free(nullptr);
    kvf_result_free(nullptr);
    kvf_string_free(nullptr);
}

TEST(CApi, SeedsValidation) {
    Exp e;
    ASSERT_EQ(kvf_experiment_load_json(kTiny, nullptr, &e.p), KVF_OK);
    EXPECT_EQ(kvf_experiment_set_seeds(e.p, nullptr, 0), KVF_ERR_CONFIG);
    uint64_t s[] = {7};
    ASSERT_EQ(kvf_experiment_set_seeds(e.p, s, 1), KVF_OK);
    EXPECT_EQ(kvf_experiment_seed(e.p, 0), 7u);
}

TEST(CApi, RunProducesArtifacts) {
    Exp e;
    ASSERT_EQ(kvf_experiment_load_json(kTiny, nullptr, &e.p), KVF_OK);
    kvf_result* r = nullptr;
    ASSERT_EQ(kvf_run(e.p, 0, 5, 1, &r), KVF_OK) << kvf_last_error();
    std::unique_ptr<kvf_result, void (*)(kvf_result*)> guard(r, kvf_result_free);
    EXPECT_EQ(kvf_result_seed(r), 5u);
    Str mj, mc, sc, ec;
    ASSERT_EQ(kvf_result_metrics_json(r, &mj.p), KVF_OK);
    EXPECT_NE(mj.s().find("\"seed\""), std::string::npos);
    ASSERT_EQ(kvf_result_metrics_csv(r, &mc.p), KVF_OK);
    EXPECT_EQ(lines(mc.s()), 2);
    ASSERT_EQ(kvf_result_series_csv(r, &sc.p), KVF_OK);
    EXPECT_EQ(lines(sc.s()), 201);
    ASSERT_EQ(kvf_result_events_csv(r, &ec.p), KVF_OK);
    EXPECT_GT(ec.s().size(), 100u);
    kvf_result* bad = nullptr;
    EXPECT_EQ(kvf_run(e.p, 9, 5, 0, &bad), KVF_ERR_ARGUMENT);
}

TEST(CApi, BatchMatchesSingleRuns) {
    Exp e;
    ASSERT_EQ(kvf_experiment_load_json(kTiny, nullptr, &e.p), KVF_OK);
    kvf_batch* b = nullptr;
    ASSERT_EQ(kvf_run_batch(e.p, 1, 2, 0, &b), KVF_OK);
    ASSERT_EQ(kvf_batch_size(b), 3u);
    for (size_t i = 0; i < 3; ++i) {
        kvf_result* r = nullptr;
        ASSERT_EQ(kvf_run(e.p, 1, i + 1, 0, &r), KVF_OK);
        Str x, y;
        kvf_result_metrics_json(r, &x.p);
        kvf_result_metrics_json(kvf_batch_result(b, i), &y.p);
        EXPECT_EQ(x.s(), y.s());
        kvf_result_free(r);
    }
    EXPECT_EQ(kvf_batch_result(b, 3), nullptr);
    Str agg;
    ASSERT_EQ(kvf_batch_aggregate_csv(b, 1, &agg.p), KVF_OK);
    EXPECT_EQ(lines(agg.s()), 2);
    kvf_batch_free(b);
}

TEST(CApi, InapplicablePolicyRefused) {
    Exp e;
    std::string cfg = kTiny;
    cfg.replace(cfg.find("\"output_known\": true"), 20, "\"output_known\": false");
    cfg.replace(cfg.find("{\"name\": \"mc\"}"), 14, "{\"name\": \"mc_sf\"}");
    ASSERT_EQ(kvf_experiment_load_json(cfg.c_str(), nullptr, &e.p), KVF_OK) << kvf_last_error();
    int ok = 1;
    Str why;
    ASSERT_EQ(kvf_experiment_policy_applicable(e.p, 1, &ok, &why.p), KVF_OK);
    EXPECT_EQ(ok, 0);
    EXPECT_NE(why.s(), "");
    kvf_result* r = nullptr;
    EXPECT_EQ(kvf_run(e.p, 1, 1, 0, &r), KVF_ERR_CONFIG);
}

TEST(CApi, CompareStabilityBudgetOracle) {
    Exp e;
    ASSERT_EQ(kvf_experiment_load_json(kTiny, nullptr, &e.p), KVF_OK);
    const kvf_experiment* list[] = {e.p};
    kvf_comparison* c = nullptr;
    ASSERT_EQ(kvf_compare(list, 1, nullptr, 0, 1, &c), KVF_OK) << kvf_last_error();
    EXPECT_EQ(kvf_comparison_rows(c), 2u);
    EXPECT_EQ(kvf_comparison_row_applicable(c, 0), 1);
    Str csv, js, usage, label;
    ASSERT_EQ(kvf_comparison_csv(c, &csv.p), KVF_OK);
    ASSERT_EQ(kvf_comparison_json(c, &js.p), KVF_OK);
    ASSERT_EQ(kvf_comparison_usage_csv(c, &usage.p), KVF_OK);
    ASSERT_EQ(kvf_comparison_row_label(c, 1, &label.p), KVF_OK);
    EXPECT_EQ(label.s(), "mc");
    kvf_comparison_free(c);

    Str st;
    ASSERT_EQ(kvf_stability_json(e.p, &st.p), KVF_OK);
    EXPECT_NE(st.s().find("offered_load"), std::string::npos);

    Str bs;
    double best = -1;
    double grid[] = {1, 2};
    ASSERT_EQ(kvf_budget_search(e.p, "flow_unknown", "token_throughput", grid, 2, 1, &bs.p, &best), KVF_OK);
    EXPECT_TRUE(best == 1 || best == 2);
    EXPECT_EQ(kvf_budget_search(e.p, "bogus", "token_throughput", grid, 2, 1, &bs.p, &best), KVF_ERR_CONFIG);

    Str o;
    ASSERT_EQ(kvf_oracle_solve_json(
                  R"({"kv_capacity": 12, "horizon": 4, "objective": "request_throughput",
                      "requests": [{"id": 1, "prompt_len": 10, "decode_len": 2, "arrival_slot": 1},
                                   {"id": 2, "prompt_len": 10, "decode_len": 2, "arrival_slot": 1}]})",
                  &o.p),
              KVF_OK)
        << kvf_last_error();
    EXPECT_EQ(nlohmann::json::parse(o.s()).at("score").get<int>(), 2);
    Str bad;
    EXPECT_EQ(kvf_oracle_solve_json(R"({"kv_capacity": 12, "horizon": 400, "requests": []})", &bad.p),
              KVF_ERR_ARGUMENT);
}

TEST(CApi, IngestFixture) {
    Str summary, norm;
    std::string path = kSource + "/tests/data/trace_1000.jsonl";
    ASSERT_EQ(kvf_ingest(path.c_str(), "jsonl", &summary.p, &norm.p), KVF_OK) << kvf_last_error();
    EXPECT_EQ(nlohmann::json::parse(summary.s()).at("records").get<int>(), 1000);
    EXPECT_EQ(lines(norm.s()), 1000);
    EXPECT_EQ(kvf_ingest("/nonexistent.jsonl", "jsonl", &summary.p, nullptr), KVF_ERR_IO);
}
