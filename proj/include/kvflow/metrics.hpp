#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvflow/engine.hpp"

namespace kvflow {

struct UtilizationSummary {
    double mean = 0;
    double max = 0;
    double std = 0;
};

struct MetricsReport {
    Slot horizon = 0;
    std::int64_t arrivals = 0;
    std::int64_t completed = 0;
    std::int64_t unfinished = 0;
    // Latency fields are empty when nothing completed.
    std::optional<double> avg_latency;
    std::optional<Slot> p50_latency;
    std::optional<Slot> p95_latency;
    std::optional<Slot> min_latency;
    std::optional<Slot> max_latency;
    double request_throughput = 0;  // completions per slot
    double token_throughput = 0;  // retained decode tokens of completed requests per slot
    double token_throughput_incl_wasted = 0;  // every decode step per slot
    Tokens wasted_tokens = 0;
    std::int64_t overflow_events = 0;
    std::int64_t eviction_events = 0;
    UtilizationSummary kv_utilization;  // of U_t / M
    double queue_growth_slope = 0;  // unfinished requests per slot, full run
    double wall_time = 0;
    double request_throughput_wall = 0;
    double token_throughput_wall = 0;
};

// completion - arrival + 1; empty while unfinished.
std::optional<Slot> latency(const RequestRecord& rec);

MetricsReport compute_metrics(const RunResult& result);

// |waiting| + |active| at the end of each slot.
std::vector<std::int64_t> unfinished_series(const RunResult& result);

// Ordinary least-squares slope of values[i] against i.
double least_squares_slope(std::span<const double> values);

enum class Verdict { Stable, Growing, Inconclusive };

std::string_view to_string(Verdict verdict);

struct StabilityEstimate {
    double slope = 0;
    Verdict verdict = Verdict::Inconclusive;
};

// Slope of the unfinished count over the last half of the run. Runs shorter
// than min_horizon are inconclusive, though the slope is still reported.
StabilityEstimate stability_estimate(const RunResult& result, double threshold = 0.01, Slot min_horizon = 1000);

enum class Objective { AvgLatency, P95Latency, RequestThroughput, TokenThroughput };

std::string_view to_string(Objective objective);
Objective objective_from_string(std::string_view name);
bool maximized(Objective objective);
// Objective value read off a report; latency objectives with no completions
// give +infinity.
double objective_value(const MetricsReport& report, Objective objective);

}  // namespace kvflow
