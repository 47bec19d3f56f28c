#include "kvflow/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "kvflow/errors.hpp"

namespace kvflow {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

template <typename T>
Json opt(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

}  // namespace

Json to_json(const MetricsReport& m) {
    Json j;
    j["horizon"] = m.horizon;
    j["arrivals"] = m.arrivals;
    j["completed"] = m.completed;
    j["unfinished"] = m.unfinished;
    j["avg_latency"] = opt(m.avg_latency);
    j["p50_latency"] = opt(m.p50_latency);
    j["p95_latency"] = opt(m.p95_latency);
    j["min_latency"] = opt(m.min_latency);
    j["max_latency"] = opt(m.max_latency);
    j["request_throughput"] = m.request_throughput;
    j["token_throughput"] = m.token_throughput;
    j["token_throughput_incl_wasted"] = m.token_throughput_incl_wasted;
    j["wasted_tokens"] = m.wasted_tokens;
    j["overflow_events"] = m.overflow_events;
    j["eviction_events"] = m.eviction_events;
    j["kv_utilization"] = {{"mean", m.kv_utilization.mean}, {"max", m.kv_utilization.max}, {"std", m.kv_utilization.std}};
    j["queue_growth_slope"] = m.queue_growth_slope;
    j["wall_time"] = m.wall_time;
    j["request_throughput_wall"] = m.request_throughput_wall;
    j["token_throughput_wall"] = m.token_throughput_wall;
    return j;
}

Json to_json(const RunResult& r, bool include_events) {
    Json j;
    j["policy"] = r.policy;
    j["horizon"] = r.horizon;
    j["kv_capacity"] = r.kv_capacity;
    j["outputs_known"] = r.outputs_known;
    j["counters"] = {{"arrivals", r.arrivals},          {"completed", r.completed},
                     {"overflow_events", r.overflow_events}, {"evictions", r.evictions},
                     {"wasted_tokens", r.wasted_tokens}, {"generated_tokens", r.generated_tokens},
                     {"wall_time", r.wall_time}};
    j["series"] = {{"usage", r.usage},
                   {"waiting", r.waiting},
                   {"active", r.active},
                   {"budget", r.budget},
                   {"prefill_tokens", r.prefill_tokens},
                   {"decode_tokens", r.decode_tokens}};
    if (!r.class_waiting.empty()) {
        Json cw = Json::object();
        for (const auto& [cls, s] : r.class_waiting) cw[std::to_string(cls)] = s;
        j["series"]["class_waiting"] = cw;
    }
    Json reqs = Json::array();
    for (const auto& rec : r.requests) {
        Json q;
        q["id"] = rec.request.id;
        q["prompt_len"] = rec.request.prompt_len;
        q["decode_len"] = rec.request.decode_len;
        q["arrival_slot"] = rec.request.arrival_slot;
        q["class_id"] = opt(rec.request.class_id);
        q["state"] = rec.state.phase == Phase::Waiting ? "waiting"
                     : rec.state.phase == Phase::Active ? "active"
                                                        : "completed";
        q["generated"] = rec.state.generated;
        q["activation_slot"] = opt(rec.state.activation_slot);
        q["completion_slot"] = opt(rec.state.completion_slot);
        q["evict_count"] = rec.state.evict_count;
        reqs.push_back(std::move(q));
    }
    j["requests"] = std::move(reqs);
    j["final_state"] = {{"clock", r.horizon}, {"waiting", r.final_waiting}, {"active", r.final_active}};
    if (include_events) {
        Json ev = Json::array();
        for (const auto& e : r.events) {
            ev.push_back(Json::array({e.slot, std::string(to_string(e.kind)), e.request_id, e.usage_after}));
        }
        j["events"] = std::move(ev);
    }
    return j;
}

namespace {

Json stats_json(const LengthStats& s) {
    return {{"mean", s.mean}, {"min", s.min}, {"p50", s.p50}, {"p90", s.p90},
            {"p95", s.p95},   {"p99", s.p99}, {"max", s.max}};
}

}  // namespace

Json to_json(const LengthSummary& s) {
    return {{"count", s.count},
            {"prompt", stats_json(s.prompt)},
            {"output", stats_json(s.output)},
            {"mean_workload", s.mean_workload.to_double()},
            {"mean_workload_exact", s.mean_workload.to_string()}};
}

Json to_json(const IngestResult& r) {
    Json malformed = Json::array();
    for (const auto& m : r.malformed) malformed.push_back({{"line", m.line}, {"message", m.message}});
    Json j{{"records", r.records.size()}, {"dropped_zero_length", r.dropped_zero_length},
           {"malformed_count", r.malformed.size()}, {"malformed", malformed}};
    if (!r.records.empty()) j["summary"] = to_json(sample_lengths_summary(r.records));
    return j;
}

Json to_json(const stability::NecessaryCheck& c) {
    return {{"offered_load", c.offered_load.to_double()},
            {"offered_load_exact", c.offered_load.to_string()},
            {"capacity", c.capacity},
            {"verdict", std::string(stability::to_string(c.verdict))},
            {"necessary_violated", c.necessary_violated}};
}

Json to_json(const stability::SufficientCheck& c) {
    return {{"budgeted_load", c.budgeted_load},
            {"capacity", c.capacity},
            {"memory_condition", c.memory_condition},
            {"rate_condition", c.rate_condition},
            {"rate_violations", c.rate_violations},
            {"sufficient_holds", c.sufficient_holds},
            {"epsilon_slack", opt(c.epsilon_slack)}};
}

Json to_json(const stability::OverflowBound& b) {
    return {{"epsilon", b.epsilon},
            {"constant", b.constant},
            {"log_bound", b.log_bound},
            {"bound", b.bound},
            {"rendered", b.negligible ? std::string("≈0") : format_double(b.bound)}};
}

Json to_json(const oracle::OfflineInstance& inst) {
    Json reqs = Json::array();
    for (const auto& r : inst.requests) {
        Json q = {{"id", r.id}, {"prompt_len", r.prompt_len}, {"decode_len", r.decode_len},
                  {"arrival_slot", r.arrival_slot}};
        if (r.class_id) q["class"] = *r.class_id;
        reqs.push_back(q);
    }
    return {{"requests", reqs},
            {"kv_capacity", inst.kv_capacity},
            {"horizon", inst.horizon},
            {"objective", std::string(to_string(inst.objective))}};
}

Json to_json(const oracle::Solution& s, const oracle::OfflineInstance& inst) {
    Json sched = Json::array();
    for (const auto& [id, slot] : s.schedule) sched.push_back({{"id", id}, {"activation_slot", slot}});
    return {{"objective", std::string(to_string(inst.objective))},
            {"value", s.value},
            {"score", s.score},
            {"schedule", sched},
            {"nodes", s.nodes}};
}

oracle::OfflineInstance offline_instance_from_json(const Json& j) try {
    oracle::OfflineInstance inst;
    inst.kv_capacity = j.at("kv_capacity").get<Tokens>();
    inst.horizon = j.at("horizon").get<Slot>();
    inst.objective = objective_from_string(j.value("objective", std::string("avg_latency")));
    RequestId next = 1;
    for (const auto& r : j.at("requests")) {
        oracle::OfflineRequest q;
        q.id = r.contains("id") ? r["id"].get<RequestId>() : next;
        next = q.id + 1;
        q.prompt_len = r.at("prompt_len").get<Tokens>();
        q.decode_len = r.at("decode_len").get<Tokens>();
        q.arrival_slot = r.value("arrival_slot", Slot{1});
        if (r.contains("class")) q.class_id = r["class"].get<int>();
        inst.requests.push_back(q);
    }
    return inst;
} catch (const nlohmann::json::exception& e) {
    throw ConfigError("instance", e.what());
} catch (const std::invalid_argument& e) {
    throw ConfigError("instance.objective", e.what());
}

// --- CSV ----------------------------------------------------------------------

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != '\n') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

namespace {

const std::vector<std::string>& metric_columns() {
    static const std::vector<std::string> cols = {
        "label",           "horizon",         "arrivals",          "completed",        "unfinished",
        "avg_latency",     "p50_latency",     "p95_latency",       "min_latency",      "max_latency",
        "request_throughput", "token_throughput", "token_throughput_incl_wasted", "wasted_tokens",
        "overflow_events", "eviction_events", "kv_util_mean",      "kv_util_max",      "kv_util_std",
        "queue_growth_slope", "wall_time",    "request_throughput_wall", "token_throughput_wall"};
    return cols;
}

template <typename T>
std::string cell(const std::optional<T>& v) {
    if (!v) return "";
    if constexpr (std::is_floating_point_v<T>) return format_double(*v);
    else return std::to_string(*v);
}

double parse_d(const std::string& s) { return std::stod(s); }

std::int64_t parse_i(const std::string& s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("bad integer cell '" + s + "'");
    return v;
}

}  // namespace

std::string metrics_csv_header() {
    std::string out;
    for (std::size_t i = 0; i < metric_columns().size(); ++i) {
        if (i) out += ',';
        out += metric_columns()[i];
    }
    return out;
}

std::string metrics_csv_row(std::string_view label, const MetricsReport& m) {
    std::vector<std::string> c = {std::string(label),
                                  std::to_string(m.horizon),
                                  std::to_string(m.arrivals),
                                  std::to_string(m.completed),
                                  std::to_string(m.unfinished),
                                  cell(m.avg_latency),
                                  cell(m.p50_latency),
                                  cell(m.p95_latency),
                                  cell(m.min_latency),
                                  cell(m.max_latency),
                                  format_double(m.request_throughput),
                                  format_double(m.token_throughput),
                                  format_double(m.token_throughput_incl_wasted),
                                  std::to_string(m.wasted_tokens),
                                  std::to_string(m.overflow_events),
                                  std::to_string(m.eviction_events),
                                  format_double(m.kv_utilization.mean),
                                  format_double(m.kv_utilization.max),
                                  format_double(m.kv_utilization.std),
                                  format_double(m.queue_growth_slope),
                                  format_double(m.wall_time),
                                  format_double(m.request_throughput_wall),
                                  format_double(m.token_throughput_wall)};
    std::string out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (i) out += ',';
        out += c[i];
    }
    return out;
}

std::string parse_metrics_csv_row(std::string_view row, MetricsReport& m) {
    auto c = split_csv_line(row);
    if (c.size() != metric_columns().size()) {
        throw std::invalid_argument("metrics row has " + std::to_string(c.size()) + " cells, expected " +
                                    std::to_string(metric_columns().size()));
    }
    auto opt_i = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<Slot>(parse_i(s)); };
    m = MetricsReport{};
    m.horizon = parse_i(c[1]);
    m.arrivals = parse_i(c[2]);
    m.completed = parse_i(c[3]);
    m.unfinished = parse_i(c[4]);
    if (!c[5].empty()) m.avg_latency = parse_d(c[5]);
    m.p50_latency = opt_i(c[6]);
    m.p95_latency = opt_i(c[7]);
    m.min_latency = opt_i(c[8]);
    m.max_latency = opt_i(c[9]);
    m.request_throughput = parse_d(c[10]);
    m.token_throughput = parse_d(c[11]);
    m.token_throughput_incl_wasted = parse_d(c[12]);
    m.wasted_tokens = parse_i(c[13]);
    m.overflow_events = parse_i(c[14]);
    m.eviction_events = parse_i(c[15]);
    m.kv_utilization.mean = parse_d(c[16]);
    m.kv_utilization.max = parse_d(c[17]);
    m.kv_utilization.std = parse_d(c[18]);
    m.queue_growth_slope = parse_d(c[19]);
    m.wall_time = parse_d(c[20]);
    m.request_throughput_wall = parse_d(c[21]);
    m.token_throughput_wall = parse_d(c[22]);
    return c[0];
}

std::string series_csv(const RunResult& r) {
    std::ostringstream out;
    out << "slot,usage,waiting,active,budget,prefill_tokens,decode_tokens\n";
    for (std::size_t i = 0; i < r.usage.size(); ++i) {
        out << (i + 1) << ',' << r.usage[i] << ',' << r.waiting[i] << ',' << r.active[i] << ',';
        if (i < r.budget.size()) out << r.budget[i];
        out << ',' << r.prefill_tokens[i] << ',' << r.decode_tokens[i] << '\n';
    }
    return out.str();
}

std::string events_csv(const RunResult& r) {
    std::ostringstream out;
    out << "slot,event,request_id,usage_after\n";
    for (const auto& e : r.events) {
        out << e.slot << ',' << to_string(e.kind) << ',' << e.request_id << ',' << e.usage_after << '\n';
    }
    return out.str();
}

std::vector<Event> parse_events_csv(std::string_view csv) {
    std::vector<Event> out;
    std::size_t pos = 0;
    bool header = true;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        if (end == std::string_view::npos) end = csv.size();
        std::string_view line = csv.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        auto c = split_csv_line(line);
        if (c.size() != 4) throw std::invalid_argument("event row needs 4 cells");
        out.push_back({parse_i(c[0]), event_kind_from_string(c[1]), parse_i(c[2]), parse_i(c[3])});
    }
    return out;
}

}  // namespace kvflow
