#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kvflow/core.hpp"
#include "kvflow/rational.hpp"

namespace kvflow {

struct ClassRate {
    RequestClass cls;
    Rational rate;  // expected arrivals per slot
};

struct TraceRecord {
    std::int64_t record_id = 0;
    Tokens prompt_tokens = 1;
    Tokens output_tokens = 1;
};

enum class WorkloadKind { SyntheticClasses, Trace };

struct WorkloadSpec {
    WorkloadKind kind = WorkloadKind::SyntheticClasses;
    std::vector<ClassRate> classes;
    Slot horizon = 1;
    // Trace variant: records already ingested, replayed in file order.
    std::vector<TraceRecord> trace;
    std::string trace_path;
    Rational trace_rate;
    bool output_known = true;
};

// Throws ConfigError on empty class lists, non-positive rates, duplicate
// class ids, bad lengths, or horizon < 1.
void validate(const WorkloadSpec& spec);

struct ArrivalStream {
    // slots[t - 1] holds the arrivals of slot t, t = 1..horizon.
    std::vector<std::vector<Request>> slots;
    std::int64_t total = 0;
    // First slot whose Poisson draw asked for more records than remained.
    std::optional<Slot> trace_exhausted_at;
    std::int64_t unserved_draws = 0;

    Slot horizon() const { return static_cast<Slot>(slots.size()); }
};

// Deterministic in (spec, seed). Synthetic: slot-t count of class k is
// Poisson(rate_k), drawn slot-major then class order. Trace: Poisson(rate)
// records per slot consumed in file order.
ArrivalStream generate_arrivals(const WorkloadSpec& spec, std::uint64_t seed);

enum class TraceFormat { Jsonl, RawPairs };

TraceFormat parse_trace_format(const std::string& name);

struct MalformedLine {
    std::int64_t line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<TraceRecord> records;
    std::int64_t dropped_zero_length = 0;
    std::vector<MalformedLine> malformed;
};

// jsonl: {"prompt_tokens": int, "output_tokens": int, "id"?: int}
// raw_pairs: {"prompt": str, "response": str}, lengths = whitespace word count.
// Throws std::runtime_error when the file cannot be opened.
IngestResult ingest_trace(const std::filesystem::path& path, TraceFormat format);
IngestResult ingest_trace(std::istream& in, TraceFormat format);

std::int64_t word_count(std::string_view text);

struct LengthStats {
    double mean = 0;
    Tokens min = 0;
    Tokens p50 = 0;
    Tokens p90 = 0;
    Tokens p95 = 0;
    Tokens p99 = 0;
    Tokens max = 0;
};

struct LengthSummary {
    std::int64_t count = 0;
    LengthStats prompt;
    LengthStats output;
    Rational mean_workload;  // exact average of workload_tokens(l, o)
};

LengthSummary sample_lengths_summary(std::span<const TraceRecord> records);

}  // namespace kvflow
