#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kvflow/engine.hpp"
#include "kvflow/metrics.hpp"
#include "kvflow/oracle.hpp"
#include "kvflow/policies.hpp"
#include "kvflow/serialize.hpp"
#include "kvflow/workload.hpp"

namespace kvflow {

enum class PolicyKind { FlowKnown, FlowUnknown, Alpha, Mc, McSf, Amin, Oracle };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view name);

struct PolicySpec {
    PolicyKind kind = PolicyKind::FlowKnown;
    std::string label;
    std::map<int, std::int64_t> budgets;  // flow_known
    Rational mean_budget;  // flow_unknown b
    std::optional<std::int64_t> cap;  // flow_unknown A
    double alpha = 0.0;
    std::optional<Tokens> assume_max_output;  // mc
    std::optional<Tokens> o_min;  // amin
    Objective objective = Objective::AvgLatency;  // oracle
};

struct EmitFlags {
    bool metrics_json = true;
    bool metrics_csv = true;
    bool series_csv = false;
    bool event_log = false;
};

struct ExperimentConfig {
    std::string name = "experiment";
    WorkloadSpec workload;
    Json workload_json;  // as written, for comparing configs
    Tokens kv_capacity = 0;
    std::vector<PolicySpec> policies;
    std::vector<std::uint64_t> seeds;
    std::string outputs = "out";
    EmitFlags emit;
    SlotCostModel slot_cost;
};

// Throws ConfigError naming the offending field. Relative trace paths are
// resolved against base_dir.
ExperimentConfig parse_config(const Json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Whether a policy can run on the workload (mc_sf and flow_known need
// visible lengths; flow_known also needs classes).
bool applicable(const PolicySpec& spec, const WorkloadSpec& workload, std::string* reason = nullptr);

// Builds a fresh policy for one run. Oracle specs are not policies; see
// run_seed.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const ExperimentConfig& config, std::uint64_t seed);

struct SeedRun {
    std::uint64_t seed = 0;
    RunResult result;
    MetricsReport metrics;
};

// One simulation. For the oracle, the generated arrivals become an offline
// instance that is solved and the optimal schedule replayed.
SeedRun run_seed(const ExperimentConfig& config, const PolicySpec& spec, std::uint64_t seed, RunOptions options);

// Runs every seed, up to `jobs` at a time; results in seed order.
std::vector<SeedRun> run_seeds(const ExperimentConfig& config, const PolicySpec& spec,
                               std::span<const std::uint64_t> seeds, RunOptions options, unsigned jobs);

RunOptions run_options(const ExperimentConfig& config, bool record_events);

struct MetricStat {
    double mean = 0;
    double std = 0;  // sample standard deviation; 0 for a single seed
};

struct AggregateRow {
    std::string label;
    std::string policy;
    bool applicable = true;
    std::string note;
    std::size_t seeds = 0;
    std::vector<std::pair<std::string, MetricStat>> metrics;  // fixed column order
};

AggregateRow aggregate(std::string label, std::string policy, std::span<const MetricsReport> reports);
std::string aggregate_csv_header();
std::string aggregate_csv_row(const AggregateRow& row);
AggregateRow parse_aggregate_csv_row(std::string_view row);

struct ComparisonRow {
    AggregateRow aggregate;
    std::vector<Tokens> usage_series;  // first seed
    Tokens max_usage = 0;  // over all seeds
};

struct Comparison {
    std::string name;
    Tokens kv_capacity = 0;
    std::vector<ComparisonRow> rows;
};

// All configs must share workload and capacity; each contributes its
// policies as rows.
Comparison compare(std::span<const ExperimentConfig> configs, std::span<const std::uint64_t> seeds, unsigned jobs);
std::string comparison_csv(const Comparison& cmp);

// Closed-form load analysis for the configured workload and budgets.
Json stability_report(const ExperimentConfig& config);

enum class BudgetFamily { FlowUnknown, FlowKnownUniform, Alpha };

BudgetFamily budget_family_from_string(std::string_view name);
std::string_view to_string(BudgetFamily family);
std::vector<double> default_grid(BudgetFamily family);

struct BudgetSearchRow {
    double value = 0;
    AggregateRow aggregate;
    double objective = 0;  // mean over seeds
};

struct BudgetSearchResult {
    BudgetFamily family = BudgetFamily::FlowUnknown;
    Objective objective = Objective::TokenThroughput;
    double best = 0;
    std::vector<BudgetSearchRow> table;
};

// Simulates every grid point on the same seeds and keeps the best mean
// objective; the first grid point wins ties.
BudgetSearchResult budget_search(const ExperimentConfig& config, BudgetFamily family, Objective objective,
                                 std::span<const double> grid, std::span<const std::uint64_t> seeds, unsigned jobs);
std::string budget_search_csv(const BudgetSearchResult& result);

oracle::OfflineInstance offline_instance(const ExperimentConfig& config, std::uint64_t seed, Objective objective);

}  // namespace kvflow
