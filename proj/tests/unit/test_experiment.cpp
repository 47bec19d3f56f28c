#include <gtest/gtest.h>

#include <fstream>

#include "kvflow/errors.hpp"
#include "kvflow/experiment.hpp"

using namespace kvflow;

namespace {

const std::filesystem::path kPresets = std::filesystem::path(KVFLOW_SOURCE_DIR) / "presets";

Json preset_json(const std::string& name) {
    std::ifstream in(kPresets / (name + ".json"));
    return Json::parse(in);
}

ExperimentConfig preset(const std::string& name, Slot horizon) {
    Json j = preset_json(name);
    j["workload"]["horizon"] = horizon;
    return parse_config(j, kPresets);
}

Json tiny() {
    return Json::parse(R"({
        "workload": {"type": "synthetic", "horizon": 300, "output_known": true,
                     "classes": [{"prompt_len": 4, "decode_len": 6, "rate": 0.5}]},
        "kv_capacity": 200,
        "policy": {"name": "flow_unknown", "b": 1},
        "seeds": [1, 2]
    })");
}

std::string field_of(const Json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<none>";
}

}  // namespace

TEST(Config, ParsesTiny) {
    auto c = parse_config(tiny());
    EXPECT_EQ(c.kv_capacity, 200);
    ASSERT_EQ(c.policies.size(), 1u);
    EXPECT_EQ(c.policies[0].kind, PolicyKind::FlowUnknown);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2}));
    EXPECT_EQ(c.workload.classes.at(0).rate, Rational(1, 2));
}

TEST(Config, ErrorsNameTheField) {
    Json j = tiny();
    j.erase("policy");
    EXPECT_EQ(field_of(j), "policy");
    j = tiny();
    j["seeds"] = Json::array();
    EXPECT_EQ(field_of(j), "seeds");
    j = tiny();
    j["kv_capacity"] = 1;
    EXPECT_EQ(field_of(j), "kv_capacity");
    j = tiny();
    j["policy"]["name"] = "lottery";
    EXPECT_NE(field_of(j).find("policy"), std::string::npos);
    j = tiny();
    j["policy"] = {{"name", "alpha"}, {"alpha", 1.5}};
    EXPECT_NE(field_of(j).find("alpha"), std::string::npos);
    j = tiny();
    j["workload"]["output_known"] = false;
    j["policy"] = {{"name", "mc"}};
    EXPECT_NE(field_of(j).find("assume_max_output"), std::string::npos);
    j = tiny();
    j["workload"]["classes"][0]["rate"] = 0;
    EXPECT_NE(field_of(j).find("workload"), std::string::npos);
    j = tiny();
    j["workload"] = {{"type", "trace"}, {"path", "/nonexistent/trace.jsonl"}, {"horizon", 10}};
    EXPECT_EQ(field_of(j), "workload.path");
}

TEST(Config, LoadsEveryPreset) {
    for (const char* name : {"synthetic_known", "synthetic_unknown", "synthetic_overloaded", "trace_low",
                             "trace_high"}) {
        auto c = load_config(kPresets / (std::string(name) + ".json"));
        EXPECT_EQ(c.kv_capacity, 16492) << name;
        EXPECT_FALSE(c.policies.empty());
        EXPECT_FALSE(c.seeds.empty());
    }
    auto low = load_config(kPresets / "trace_low.json");
    EXPECT_EQ(low.workload.kind, WorkloadKind::Trace);
    EXPECT_EQ(low.workload.trace.size(), 1000u);
    EXPECT_EQ(low.workload.trace_rate, Rational(1, 2));
}

TEST(Applicability, Rules) {
    auto known = preset("synthetic_known", 10);
    auto unknown = preset("synthetic_unknown", 10);
    auto trace = preset("trace_low", 10);
    PolicySpec sf;
    sf.kind = PolicyKind::McSf;
    std::string why;
    EXPECT_TRUE(applicable(sf, known.workload));
    EXPECT_FALSE(applicable(sf, unknown.workload, &why));
    EXPECT_FALSE(why.empty());
    PolicySpec fk;
    fk.kind = PolicyKind::FlowKnown;
    EXPECT_FALSE(applicable(fk, trace.workload));
    PolicySpec fu;
    fu.kind = PolicyKind::FlowUnknown;
    EXPECT_TRUE(applicable(fu, trace.workload));
}

TEST(Compare, KnownPresetSixRows) {
    auto c = preset("synthetic_known", 400);
    std::vector<std::uint64_t> seeds{1, 2};
    auto cmp = compare(std::span(&c, 1), seeds, 2);
    ASSERT_EQ(cmp.rows.size(), 6u);
    for (const auto& r : cmp.rows) {
        EXPECT_TRUE(r.aggregate.applicable);
        EXPECT_EQ(r.aggregate.seeds, 2u);
        EXPECT_EQ(r.usage_series.size(), 400u);
        EXPECT_LE(r.max_usage, c.kv_capacity);
    }
    std::string csv = comparison_csv(cmp);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Compare, UnknownPresetMarksShortestFirstInapplicable) {
    auto c = preset("synthetic_unknown", 300);
    std::vector<std::uint64_t> seeds{1};
    auto cmp = compare(std::span(&c, 1), seeds, 1);
    ASSERT_EQ(cmp.rows.size(), 5u);
    int inapplicable = 0;
    for (const auto& r : cmp.rows) {
        if (!r.aggregate.applicable) {
            ++inapplicable;
            EXPECT_EQ(r.aggregate.policy, "mc_sf");
            EXPECT_NE(r.aggregate.note.find("inapplicable"), std::string::npos);
        }
    }
    EXPECT_EQ(inapplicable, 1);
}

TEST(Compare, SinglePolicyOneRow) {
    auto c = parse_config(tiny());
    auto cmp = compare(std::span(&c, 1), c.seeds, 1);
    EXPECT_EQ(cmp.rows.size(), 1u);
}

TEST(Compare, MultipleConfigsShareWorkload) {
    std::vector<ExperimentConfig> cs{parse_config(tiny()), parse_config(tiny())};
    cs[1].policies[0].label = "second";
    auto cmp = compare(cs, cs[0].seeds, 1);
    EXPECT_EQ(cmp.rows.size(), 2u);
}

TEST(Compare, MismatchRefused) {
    Json other = tiny();
    other["kv_capacity"] = 300;
    std::vector<ExperimentConfig> cs{parse_config(tiny()), parse_config(other)};
    EXPECT_THROW(compare(cs, cs[0].seeds, 1), ConfigError);
    other = tiny();
    other["workload"]["classes"][0]["decode_len"] = 7;
    cs[1] = parse_config(other);
    EXPECT_THROW(compare(cs, cs[0].seeds, 1), ConfigError);
}

TEST(Aggregate, MeanAndSampleStd) {
    MetricsReport a, b;
    a.completed = 2;
    b.completed = 4;
    a.avg_latency = 1.0;
    std::vector<MetricsReport> v{a, b};
    auto row = aggregate("x", "mc", v);
    for (const auto& [name, stat] : row.metrics) {
        if (name == "completed") {
            EXPECT_DOUBLE_EQ(stat.mean, 3.0);
            EXPECT_DOUBLE_EQ(stat.std, std::sqrt(2.0));
        }
        if (name == "avg_latency") {
            EXPECT_DOUBLE_EQ(stat.mean, 1.0);
            EXPECT_DOUBLE_EQ(stat.std, 0.0);
        }
    }
    auto back = parse_aggregate_csv_row(aggregate_csv_row(row));
    EXPECT_EQ(back.label, "x");
    ASSERT_EQ(back.metrics.size(), row.metrics.size());
    for (std::size_t i = 0; i < row.metrics.size(); ++i) {
        EXPECT_EQ(back.metrics[i].first, row.metrics[i].first);
        auto m = row.metrics[i].second.mean, n = back.metrics[i].second.mean;
        if (std::isnan(m)) {
            EXPECT_TRUE(std::isnan(n));
        } else {
            EXPECT_EQ(m, n);
        }
    }
}

TEST(Stability, KnownPreset) {
    auto r = stability_report(preset("synthetic_known", 10));
    EXPECT_TRUE(r.at("sufficient_holds").get<bool>());
    EXPECT_FALSE(r.at("necessary_violated").get<bool>());
    EXPECT_EQ(r.at("budgets").at(0).at("budgeted_load").get<std::int64_t>(), 16240);
}

TEST(Stability, OverloadedPreset) {
    auto r = stability_report(preset("synthetic_overloaded", 10));
    EXPECT_TRUE(r.at("necessary_violated").get<bool>());
    EXPECT_DOUBLE_EQ(r.at("offered_load").get<double>(), 20300.0);
}

TEST(Stability, TraceUsesEmpiricalMean) {
    auto c = preset("trace_high", 10);
    auto r = stability_report(c);
    double mean = 0;
    for (const auto& t : c.workload.trace) mean += static_cast<double>(workload_tokens(t.prompt_tokens, t.output_tokens));
    mean /= static_cast<double>(c.workload.trace.size());
    EXPECT_NEAR(r.at("mean_workload").get<double>(), mean, 1e-9 * mean);
    EXPECT_NEAR(r.at("offered_load").get<double>(), 2.5 * mean, 1e-9 * mean);
    EXPECT_TRUE(r.contains("length_summary"));
}

TEST(BudgetSearch, SinglePointGrid) {
    auto c = parse_config(tiny());
    std::vector<double> grid{1};
    auto res = budget_search(c, BudgetFamily::FlowUnknown, Objective::TokenThroughput, grid, c.seeds, 1);
    EXPECT_EQ(res.best, 1);
    EXPECT_EQ(res.table.size(), 1u);
}

TEST(BudgetSearch, DeterministicAndZeroBudgetLoses) {
    auto c = parse_config(tiny());
    std::vector<double> grid{0, 2, 4, 8};
    auto a = budget_search(c, BudgetFamily::FlowUnknown, Objective::TokenThroughput, grid, c.seeds, 2);
    auto b = budget_search(c, BudgetFamily::FlowUnknown, Objective::TokenThroughput, grid, c.seeds, 1);
    EXPECT_EQ(a.best, b.best);
    EXPECT_EQ(budget_search_csv(a), budget_search_csv(b));
    EXPECT_NE(a.best, 0);
    EXPECT_EQ(a.table[0].objective, 0.0);
}

TEST(BudgetSearch, AlphaFamilyAndGrids) {
    EXPECT_EQ(default_grid(BudgetFamily::FlowUnknown).size(), 16u);
    EXPECT_EQ(default_grid(BudgetFamily::Alpha).front(), 0.0);
    auto c = parse_config(tiny());
    std::vector<double> grid{0.0, 0.3};
    auto res = budget_search(c, BudgetFamily::Alpha, Objective::AvgLatency, grid, c.seeds, 1);
    EXPECT_EQ(res.table.size(), 2u);
}

TEST(RunSeeds, ParallelMatchesSerial) {
    auto c = preset("synthetic_known", 300);
    auto opts = run_options(c, false);
    auto a = run_seeds(c, c.policies[1], c.seeds, opts, 1);
    auto b = run_seeds(c, c.policies[1], c.seeds, opts, 3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].seed, b[i].seed);
        EXPECT_EQ(a[i].result.usage, b[i].result.usage);
    }
}

TEST(RunSeed, OracleOnTinyInstance) {
    Json j = Json::parse(R"({
        "workload": {"type": "synthetic", "horizon": 6, "output_known": true,
                     "classes": [{"prompt_len": 2, "decode_len": 2, "rate": 0.5}]},
        "kv_capacity": 8,
        "policy": {"name": "oracle", "objective": "request_throughput"},
        "seeds": [3]
    })");
    auto c = parse_config(j);
    auto r = run_seed(c, c.policies[0], 3, run_options(c, false));
    EXPECT_EQ(r.result.policy, "oracle");
    auto inst = offline_instance(c, 3, Objective::RequestThroughput);
    auto s = oracle::solve(inst);
    EXPECT_EQ(r.metrics.completed, s.score);
}
