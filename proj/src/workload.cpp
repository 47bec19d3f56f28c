#include "kvflow/workload.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kvflow/errors.hpp"
#include "kvflow/rng.hpp"

namespace kvflow {

void validate(const WorkloadSpec& spec) {
    if (spec.horizon < 1) throw ConfigError("workload.horizon", "must be >= 1");
    if (spec.kind == WorkloadKind::SyntheticClasses) {
        if (spec.classes.empty()) throw ConfigError("workload.classes", "class list is empty");
        std::set<int> seen;
        for (const auto& c : spec.classes) {
            if (!seen.insert(c.cls.class_id).second) {
                throw ConfigError("workload.classes", "duplicate class id " + std::to_string(c.cls.class_id));
            }
            if (c.cls.prompt_len < 1 || c.cls.decode_len < 1) {
                throw ConfigError("workload.classes", "class " + std::to_string(c.cls.class_id) +
                                                          " needs prompt_len >= 1 and decode_len >= 1");
            }
            if (c.rate <= Rational(0)) {
                throw ConfigError("workload.classes",
                                  "class " + std::to_string(c.cls.class_id) + " rate must be > 0");
            }
        }
    } else {
        if (spec.trace_rate <= Rational(0)) throw ConfigError("workload.rate", "must be > 0");
        for (const auto& r : spec.trace) {
            if (r.prompt_tokens < 1 || r.output_tokens < 1) {
                throw ConfigError("workload.trace", "record " + std::to_string(r.record_id) + " has a zero length");
            }
        }
    }
}

ArrivalStream generate_arrivals(const WorkloadSpec& spec, std::uint64_t seed) {
    validate(spec);
    RandomStream rng(seed, streams::kArrivals);
    ArrivalStream out;
    out.slots.resize(static_cast<std::size_t>(spec.horizon));
    RequestId next_id = 1;

    if (spec.kind == WorkloadKind::SyntheticClasses) {
        std::vector<double> rates;
        for (const auto& c : spec.classes) rates.push_back(c.rate.to_double());
        for (Slot t = 1; t <= spec.horizon; ++t) {
            auto& slot = out.slots[static_cast<std::size_t>(t - 1)];
            for (std::size_t k = 0; k < spec.classes.size(); ++k) {
                std::int64_t n = rng.poisson(rates[k]);
                const auto& cls = spec.classes[k].cls;
                for (std::int64_t i = 0; i < n; ++i) {
                    slot.push_back(Request{next_id++, cls.prompt_len, cls.decode_len, t, cls.class_id,
                                           spec.output_known});
                }
            }
            out.total += static_cast<std::int64_t>(slot.size());
        }
        return out;
    }

    double rate = spec.trace_rate.to_double();
    std::size_t cursor = 0;
    for (Slot t = 1; t <= spec.horizon; ++t) {
        auto& slot = out.slots[static_cast<std::size_t>(t - 1)];
        std::int64_t n = rng.poisson(rate);
        for (std::int64_t i = 0; i < n; ++i) {
            if (cursor >= spec.trace.size()) {
                if (!out.trace_exhausted_at) out.trace_exhausted_at = t;
                out.unserved_draws += n - i;
                break;
            }
            const auto& rec = spec.trace[cursor++];
            slot.push_back(Request{next_id++, rec.prompt_tokens, rec.output_tokens, t, std::nullopt,
                                   spec.output_known});
        }
        out.total += static_cast<std::int64_t>(slot.size());
    }
    return out;
}

TraceFormat parse_trace_format(const std::string& name) {
    if (name == "jsonl") return TraceFormat::Jsonl;
    if (name == "raw_pairs") return TraceFormat::RawPairs;
    throw ConfigError("format", "unknown trace format '" + name + "' (expected jsonl or raw_pairs)");
}

std::int64_t word_count(std::string_view text) {
    std::int64_t words = 0;
    bool in_word = false;
    for (char ch : text) {
        bool space = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

IngestResult ingest_trace(const std::filesystem::path& path, TraceFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file " + path.string());
    return ingest_trace(in, format);
}

IngestResult ingest_trace(std::istream& in, TraceFormat format) {
    IngestResult result;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto obj = nlohmann::json::parse(line);
            if (!obj.is_object()) throw std::runtime_error("line is not a JSON object");
            TraceRecord rec;
            rec.record_id = line_no;
            if (format == TraceFormat::Jsonl) {
                if (!obj.contains("prompt_tokens") || !obj.contains("output_tokens")) {
                    throw std::runtime_error("missing prompt_tokens/output_tokens");
                }
                if (!obj["prompt_tokens"].is_number_integer() || !obj["output_tokens"].is_number_integer()) {
                    throw std::runtime_error("token counts must be integers");
                }
                rec.prompt_tokens = obj["prompt_tokens"].get<Tokens>();
                rec.output_tokens = obj["output_tokens"].get<Tokens>();
                if (obj.contains("id")) {
                    if (!obj["id"].is_number_integer()) throw std::runtime_error("id must be an integer");
                    rec.record_id = obj["id"].get<std::int64_t>();
                }
                if (rec.prompt_tokens < 0 || rec.output_tokens < 0) {
                    throw std::runtime_error("negative token count");
                }
            } else {
                if (!obj.contains("prompt") || !obj.contains("response") || !obj["prompt"].is_string() ||
                    !obj["response"].is_string()) {
                    throw std::runtime_error("missing string fields prompt/response");
                }
                rec.prompt_tokens = word_count(obj["prompt"].get<std::string>());
                rec.output_tokens = word_count(obj["response"].get<std::string>());
            }
            if (rec.prompt_tokens == 0 || rec.output_tokens == 0) {
                ++result.dropped_zero_length;
                continue;
            }
            result.records.push_back(rec);
        } catch (const std::exception& e) {
            result.malformed.push_back({line_no, e.what()});
        }
    }
    return result;
}

namespace {

LengthStats stats_of(std::vector<Tokens> values) {
    std::sort(values.begin(), values.end());
    LengthStats s;
    double sum = 0;
    for (Tokens v : values) sum += static_cast<double>(v);
    s.mean = sum / static_cast<double>(values.size());
    auto pick = [&](double q) { return values[nearest_rank(values.size(), q) - 1]; };
    s.min = values.front();
    s.p50 = pick(0.50);
    s.p90 = pick(0.90);
    s.p95 = pick(0.95);
    s.p99 = pick(0.99);
    s.max = values.back();
    return s;
}

}  // namespace

LengthSummary sample_lengths_summary(std::span<const TraceRecord> records) {
    if (records.empty()) throw std::invalid_argument("sample_lengths_summary: empty record list");
    std::vector<Tokens> prompts, outputs;
    prompts.reserve(records.size());
    outputs.reserve(records.size());
    Tokens total_workload = 0;
    for (const auto& r : records) {
        prompts.push_back(r.prompt_tokens);
        outputs.push_back(r.output_tokens);
        total_workload += workload_tokens(r.prompt_tokens, r.output_tokens);
    }
    LengthSummary out;
    out.count = static_cast<std::int64_t>(records.size());
    out.prompt = stats_of(std::move(prompts));
    out.output = stats_of(std::move(outputs));
    out.mean_workload = Rational(total_workload, out.count);
    return out;
}

}  // namespace kvflow
