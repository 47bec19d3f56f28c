#include "kvflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kvflow {

std::optional<Slot> latency(const RequestRecord& rec) {
    if (!rec.state.completion_slot) return std::nullopt;
    return *rec.state.completion_slot - rec.request.arrival_slot + 1;
}

std::vector<std::int64_t> unfinished_series(const RunResult& result) {
    std::vector<std::int64_t> out(result.waiting.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = result.waiting[i] + result.active[i];
    return out;
}

double least_squares_slope(std::span<const double> values) {
    const auto n = static_cast<double>(values.size());
    if (values.size() < 2) return 0.0;
    const double mean_x = (n - 1.0) / 2.0;
    const double mean_y = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double dx = static_cast<double>(i) - mean_x;
        sxy += dx * (values[i] - mean_y);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace {

double slope_of(const std::vector<std::int64_t>& series, std::size_t from) {
    std::vector<double> ys(series.begin() + static_cast<std::ptrdiff_t>(from), series.end());
    return least_squares_slope(ys);
}

}  // namespace

MetricsReport compute_metrics(const RunResult& result) {
    MetricsReport m;
    m.horizon = result.horizon;
    m.arrivals = result.arrivals;
    m.completed = result.completed;
    m.unfinished = result.arrivals - result.completed;
    m.wasted_tokens = result.wasted_tokens;
    m.overflow_events = result.overflow_events;
    m.eviction_events = result.evictions;
    m.wall_time = result.wall_time;

    std::vector<Slot> latencies;
    Tokens retained = 0;
    for (const auto& rec : result.requests) {
        if (auto lat = latency(rec)) {
            latencies.push_back(*lat);
            retained += rec.request.decode_len;
        }
    }
    const auto horizon = static_cast<double>(std::max<Slot>(result.horizon, 1));
    if (!latencies.empty()) {
        std::sort(latencies.begin(), latencies.end());
        double sum = 0;
        for (Slot l : latencies) sum += static_cast<double>(l);
        m.avg_latency = sum / static_cast<double>(latencies.size());
        m.p50_latency = latencies[nearest_rank(latencies.size(), 0.50) - 1];
        m.p95_latency = latencies[nearest_rank(latencies.size(), 0.95) - 1];
        m.min_latency = latencies.front();
        m.max_latency = latencies.back();
    }
    m.request_throughput = static_cast<double>(result.completed) / horizon;
    m.token_throughput = static_cast<double>(retained) / horizon;
    m.token_throughput_incl_wasted = static_cast<double>(result.generated_tokens) / horizon;
    if (result.wall_time > 0) {
        m.request_throughput_wall = static_cast<double>(result.completed) / result.wall_time;
        m.token_throughput_wall = static_cast<double>(retained) / result.wall_time;
    }

    if (!result.usage.empty()) {
        const auto cap = static_cast<double>(result.kv_capacity);
        double sum = 0, sq = 0, mx = 0;
        for (Tokens u : result.usage) {
            double x = static_cast<double>(u) / cap;
            sum += x;
            sq += x * x;
            mx = std::max(mx, x);
        }
        const auto n = static_cast<double>(result.usage.size());
        m.kv_utilization.mean = sum / n;
        m.kv_utilization.max = mx;
        m.kv_utilization.std = std::sqrt(std::max(0.0, sq / n - m.kv_utilization.mean * m.kv_utilization.mean));
    }
    m.queue_growth_slope = slope_of(unfinished_series(result), 0);
    return m;
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Stable: return "stable";
        case Verdict::Growing: return "growing";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

StabilityEstimate stability_estimate(const RunResult& result, double threshold, Slot min_horizon) {
    auto series = unfinished_series(result);
    StabilityEstimate est;
    est.slope = slope_of(series, series.size() / 2);
    if (static_cast<Slot>(series.size()) < min_horizon) {
        est.verdict = Verdict::Inconclusive;
    } else {
        est.verdict = est.slope > threshold ? Verdict::Growing : Verdict::Stable;
    }
    return est;
}

std::string_view to_string(Objective objective) {
    switch (objective) {
        case Objective::AvgLatency: return "avg_latency";
        case Objective::P95Latency: return "p95_latency";
        case Objective::RequestThroughput: return "request_throughput";
        case Objective::TokenThroughput: return "token_throughput";
    }
    return "?";
}

Objective objective_from_string(std::string_view name) {
    for (auto o : {Objective::AvgLatency, Objective::P95Latency, Objective::RequestThroughput,
                   Objective::TokenThroughput}) {
        if (to_string(o) == name) return o;
    }
    throw std::invalid_argument("unknown objective '" + std::string(name) + "'");
}

bool maximized(Objective objective) {
    return objective == Objective::RequestThroughput || objective == Objective::TokenThroughput;
}

double objective_value(const MetricsReport& report, Objective objective) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    switch (objective) {
        case Objective::AvgLatency: return report.avg_latency.value_or(kInf);
        case Objective::P95Latency:
            return report.p95_latency ? static_cast<double>(*report.p95_latency) : kInf;
        case Objective::RequestThroughput: return report.request_throughput;
        case Objective::TokenThroughput: return report.token_throughput;
    }
    return 0;
}

}  // namespace kvflow
