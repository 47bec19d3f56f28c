#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kvflow/engine.hpp"
#include "kvflow/metrics.hpp"
#include "kvflow/oracle.hpp"
#include "kvflow/stability.hpp"
#include "kvflow/workload.hpp"

namespace kvflow {

using Json = nlohmann::ordered_json;

Json to_json(const MetricsReport& m);
Json to_json(const RunResult& r, bool include_events);
Json to_json(const LengthSummary& s);
Json to_json(const IngestResult& r);
Json to_json(const stability::NecessaryCheck& c);
Json to_json(const stability::SufficientCheck& c);
Json to_json(const stability::OverflowBound& b);
Json to_json(const oracle::OfflineInstance& inst);
Json to_json(const oracle::Solution& s, const oracle::OfflineInstance& inst);
oracle::OfflineInstance offline_instance_from_json(const Json& j);

// Doubles are written with 17 significant digits so parsing reproduces them.
std::string format_double(double v);

// One header plus one row per report; `label` fills the first column.
std::string metrics_csv_header();
std::string metrics_csv_row(std::string_view label, const MetricsReport& m);
// Inverse of metrics_csv_row for the columns it writes; returns the label.
std::string parse_metrics_csv_row(std::string_view row, MetricsReport& out);

// slot,usage,waiting,active,budget,prefill_tokens,decode_tokens
std::string series_csv(const RunResult& r);
// slot,event,request_id,usage_after
std::string events_csv(const RunResult& r);
std::vector<Event> parse_events_csv(std::string_view csv);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace kvflow
