#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "kvflow/errors.hpp"
#include "kvflow/rng.hpp"
#include "kvflow/workload.hpp"

using namespace kvflow;

namespace {

WorkloadSpec single_class(Rational rate, Slot horizon) {
    WorkloadSpec w;
    w.kind = WorkloadKind::SyntheticClasses;
    w.classes = {{{1, 10, 20}, rate}};
    w.horizon = horizon;
    return w;
}

}  // namespace

TEST(GenerateArrivals, RejectsZeroRate) {
    EXPECT_THROW(generate_arrivals(single_class(Rational(0), 10), 1), ConfigError);
}

TEST(GenerateArrivals, RejectsEmptyClassList) {
    WorkloadSpec w = single_class(Rational(1), 10);
    w.classes.clear();
    EXPECT_THROW(generate_arrivals(w, 1), ConfigError);
}

TEST(GenerateArrivals, PoissonMeanWithinStandardErrors) {
    const Slot T = 10000;
    ArrivalStream a = generate_arrivals(single_class(Rational(2), T), 12345);
    ASSERT_EQ(a.horizon(), T);
    double mean = static_cast<double>(a.total) / static_cast<double>(T);
    double se = std::sqrt(2.0 / static_cast<double>(T));
    EXPECT_LT(std::abs(mean - 2.0), 2.5 * se) << mean;
}

TEST(GenerateArrivals, SequentialIdsAndSlotStamps) {
    WorkloadSpec w = single_class(Rational(3), 50);
    w.classes.push_back({{2, 5, 7}, Rational(1, 2)});
    ArrivalStream a = generate_arrivals(w, 8);
    RequestId next = 1;
    for (Slot t = 1; t <= a.horizon(); ++t) {
        int last_class = 0;
        for (const auto& r : a.slots[static_cast<std::size_t>(t - 1)]) {
            EXPECT_EQ(r.id, next++);
            EXPECT_EQ(r.arrival_slot, t);
            ASSERT_TRUE(r.class_id);
            EXPECT_GE(*r.class_id, last_class);  // class order inside a slot
            last_class = *r.class_id;
            EXPECT_EQ(r.prompt_len, *r.class_id == 1 ? 10 : 5);
        }
    }
    EXPECT_EQ(next - 1, a.total);
}

TEST(GenerateArrivals, DeterministicPerSeed) {
    WorkloadSpec w = single_class(Rational(5, 3), 500);
    auto a = generate_arrivals(w, 77), b = generate_arrivals(w, 77), c = generate_arrivals(w, 78);
    ASSERT_EQ(a.total, b.total);
    for (std::size_t t = 0; t < a.slots.size(); ++t) EXPECT_EQ(a.slots[t].size(), b.slots[t].size());
    EXPECT_NE(a.total, c.total);
}

TEST(GenerateArrivals, TraceExhaustsInFirstSlot) {
    WorkloadSpec w;
    w.kind = WorkloadKind::Trace;
    w.trace = {{1, 3, 4}, {2, 5, 6}, {3, 7, 8}};
    w.trace_rate = Rational(1000);
    w.horizon = 5;
    ArrivalStream a = generate_arrivals(w, 1);
    ASSERT_EQ(a.slots[0].size(), 3u);
    EXPECT_EQ(a.slots[0][0].prompt_len, 3);
    EXPECT_EQ(a.slots[0][1].prompt_len, 5);
    EXPECT_EQ(a.slots[0][2].decode_len, 8);
    for (std::size_t t = 1; t < a.slots.size(); ++t) EXPECT_TRUE(a.slots[t].empty());
    ASSERT_TRUE(a.trace_exhausted_at);
    EXPECT_EQ(*a.trace_exhausted_at, 1);
    EXPECT_GT(a.unserved_draws, 0);
}

TEST(GenerateArrivals, TracePreservesOrderAndCount) {
    WorkloadSpec w;
    w.kind = WorkloadKind::Trace;
    for (int i = 1; i <= 200; ++i) w.trace.push_back({i, i, 1 + i % 7});
    w.trace_rate = Rational(1, 2);
    w.horizon = 2000;
    ArrivalStream a = generate_arrivals(w, 5);
    EXPECT_EQ(a.total, 200);
    Tokens expect = 1;
    for (const auto& slot : a.slots) {
        for (const auto& r : slot) EXPECT_EQ(r.prompt_len, expect++);
    }
}

TEST(IngestTrace, JsonlPassthrough) {
    std::istringstream in(
        "{\"prompt_tokens\": 57, \"output_tokens\": 128}\n"
        "\n"
        "{\"id\": 9, \"prompt_tokens\": 3, \"output_tokens\": 0}\n"
        "not json\n"
        "{\"prompt_tokens\": 2}\n");
    IngestResult r = ingest_trace(in, TraceFormat::Jsonl);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].prompt_tokens, 57);
    EXPECT_EQ(r.records[0].output_tokens, 128);
    EXPECT_EQ(r.dropped_zero_length, 1);
    ASSERT_EQ(r.malformed.size(), 2u);
    EXPECT_EQ(r.malformed[0].line, 4);
}

TEST(IngestTrace, RawPairsWordCount) {
    std::istringstream in(
        "{\"prompt\": \"hello world\", \"response\": \"hi\"}\n"
        "{\"prompt\": \"a b c\", \"response\": \"\"}\n");
    IngestResult r = ingest_trace(in, TraceFormat::RawPairs);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].prompt_tokens, 2);
    EXPECT_EQ(r.records[0].output_tokens, 1);
    EXPECT_EQ(r.dropped_zero_length, 1);
}

TEST(IngestTrace, MissingFileThrows) {
    EXPECT_THROW(ingest_trace(std::filesystem::path("/nonexistent/trace.jsonl"), TraceFormat::Jsonl),
                 std::runtime_error);
    EXPECT_THROW(parse_trace_format("csv"), ConfigError);
}

TEST(WordCount, Whitespace) {
    EXPECT_EQ(word_count(""), 0);
    EXPECT_EQ(word_count("  one\ttwo\n three  "), 3);
}

TEST(LengthsSummary, WorkedExamples) {
    std::vector<TraceRecord> one{{1, 10, 20}};
    EXPECT_EQ(sample_lengths_summary(one).mean_workload, Rational(410));
    std::vector<TraceRecord> two{{1, 1, 1}, {2, 1, 1}};
    EXPECT_EQ(sample_lengths_summary(two).mean_workload, Rational(2));
    EXPECT_THROW(sample_lengths_summary({}), std::invalid_argument);
}

TEST(LengthsSummary, MatchesBruteForceAverage) {
    RandomStream rng(31, 1);
    std::vector<TraceRecord> recs;
    for (int i = 1; i <= 1000; ++i) recs.push_back({i, rng.uniform_int(1, 512), rng.uniform_int(1, 512)});
    LengthSummary s = sample_lengths_summary(recs);
    __int128 total = 0;
    double prompt_sum = 0;
    for (const auto& r : recs) {
        Tokens w = 0;
        for (Tokens j = 1; j <= r.output_tokens; ++j) w += r.prompt_tokens + j;
        total += w;
        prompt_sum += static_cast<double>(r.prompt_tokens);
    }
    EXPECT_EQ(s.count, 1000);
    EXPECT_EQ(s.mean_workload, Rational(static_cast<std::int64_t>(total), 1000));
    EXPECT_DOUBLE_EQ(s.prompt.mean, prompt_sum / 1000.0);
    EXPECT_LE(s.prompt.min, s.prompt.p50);
    EXPECT_LE(s.prompt.p50, s.prompt.p95);
    EXPECT_LE(s.prompt.p95, s.prompt.max);
}
