#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "kvflow/errors.hpp"
#include "kvflow/serialize.hpp"

using namespace kvflow;

namespace {

RunResult small_run(bool events) {
    ArrivalStream s;
    s.slots.resize(12);
    RequestId id = 1;
    for (Slot t = 0; t < 4; ++t) {
        s.slots[static_cast<std::size_t>(t)].push_back(Request{id++, 3, 2 + t, t + 1, std::nullopt, true});
    }
    s.total = 4;
    Amin p(1);
    RunOptions o;
    o.record_events = events;
    return run(s, p, 12, true, o);
}

}  // namespace

TEST(Serialize, FormatDoubleRoundTrips) {
    for (double v : {0.0, 1.0 / 3.0, 1e-300, 123456.789, -2.5}) {
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
}

TEST(Serialize, MetricsCsvRoundTrip) {
    auto m = compute_metrics(small_run(false));
    std::string row = metrics_csv_row("amin", m);
    MetricsReport back;
    EXPECT_EQ(parse_metrics_csv_row(row, back), "amin");
    EXPECT_EQ(back.completed, m.completed);
    EXPECT_EQ(back.arrivals, m.arrivals);
    EXPECT_EQ(back.avg_latency, m.avg_latency);
    EXPECT_EQ(back.p95_latency, m.p95_latency);
    EXPECT_EQ(back.request_throughput, m.request_throughput);
    EXPECT_EQ(back.token_throughput, m.token_throughput);
    EXPECT_EQ(back.wasted_tokens, m.wasted_tokens);
    EXPECT_EQ(back.kv_utilization.mean, m.kv_utilization.mean);
    EXPECT_EQ(back.queue_growth_slope, m.queue_growth_slope);
    EXPECT_EQ(split_csv_line(metrics_csv_header()).size(), split_csv_line(row).size());
}

TEST(Serialize, MetricsCsvEmptyLatency) {
    MetricsReport m;
    m.horizon = 5;
    std::string row = metrics_csv_row("x", m);
    MetricsReport back;
    parse_metrics_csv_row(row, back);
    EXPECT_FALSE(back.avg_latency);
    EXPECT_FALSE(back.p95_latency);
    EXPECT_THROW(parse_metrics_csv_row("a,b", back), std::invalid_argument);
}

TEST(Serialize, EventsCsvRoundTrip) {
    auto r = small_run(true);
    ASSERT_FALSE(r.events.empty());
    EXPECT_EQ(parse_events_csv(events_csv(r)), r.events);
}

TEST(Serialize, SeriesCsvShape) {
    auto r = small_run(false);
    std::string csv = series_csv(r);
    std::size_t lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    EXPECT_EQ(lines, r.usage.size() + 1);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "slot,usage,waiting,active,budget,prefill_tokens,decode_tokens");
}

TEST(Serialize, MetricsJsonFields) {
    auto m = compute_metrics(small_run(false));
    Json j = to_json(m);
    EXPECT_EQ(j.at("completed").get<std::int64_t>(), m.completed);
    EXPECT_DOUBLE_EQ(j.at("avg_latency").get<double>(), *m.avg_latency);
    MetricsReport empty;
    EXPECT_TRUE(to_json(empty).at("avg_latency").is_null());
}

TEST(Serialize, OfflineInstanceRoundTrip) {
    oracle::OfflineInstance inst{{{1, 2, 3, 1, 1}, {2, 4, 1, 2, std::nullopt}}, 9, 7, Objective::P95Latency};
    auto back = offline_instance_from_json(to_json(inst));
    ASSERT_EQ(back.requests.size(), 2u);
    EXPECT_EQ(back.requests[0].class_id, 1);
    EXPECT_FALSE(back.requests[1].class_id);
    EXPECT_EQ(back.requests[1].prompt_len, 4);
    EXPECT_EQ(back.requests[1].arrival_slot, 2);
    EXPECT_EQ(back.kv_capacity, 9);
    EXPECT_EQ(back.horizon, 7);
    EXPECT_EQ(back.objective, Objective::P95Latency);
}

TEST(Serialize, OfflineInstanceErrors) {
    EXPECT_THROW(offline_instance_from_json(Json::parse(R"({"requests": 3})")), ConfigError);
    Json j = to_json(oracle::OfflineInstance{{}, 5, 5, Objective::AvgLatency});
    j["objective"] = "fastest";
    EXPECT_THROW(offline_instance_from_json(j), ConfigError);
}

TEST(Serialize, SolutionJson) {
    oracle::OfflineInstance inst{{{1, 1, 1, 1, std::nullopt}}, 2, 2, Objective::AvgLatency};
    auto s = oracle::solve(inst);
    Json j = to_json(s, inst);
    EXPECT_DOUBLE_EQ(j.at("value").get<double>(), 1.0);
}

TEST(Serialize, SplitCsv) {
    EXPECT_EQ(split_csv_line("a,,b\r\n"), (std::vector<std::string>{"a", "", "b"}));
    EXPECT_EQ(split_csv_line(""), (std::vector<std::string>{""}));
}
