#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "kvflow/core.hpp"
#include "kvflow/engine.hpp"
#include "kvflow/metrics.hpp"
#include "kvflow/policies.hpp"

namespace kvflow::oracle {

inline constexpr std::size_t kMaxRequests = 10;
inline constexpr Slot kMaxHorizon = 40;

struct OfflineRequest {
    RequestId id = 0;
    Tokens prompt_len = 1;
    Tokens decode_len = 1;
    Slot arrival_slot = 1;
    std::optional<int> class_id;  // only class-budgeted policies look at it
};

// Objectives are scored over every request: throughput counts completions
// within the horizon, latency charges an unfinished request as if it
// completed at horizon + 1.
struct OfflineInstance {
    std::vector<OfflineRequest> requests;
    Tokens kv_capacity = 0;
    Slot horizon = 1;
    Objective objective = Objective::AvgLatency;
};

// Throws std::invalid_argument beyond the caps or for malformed requests,
// SimulationError when a prompt alone cannot fit.
void validate(const OfflineInstance& instance);

struct Solution {
    double value = 0;
    // Integer form of the objective: completions, tokens, latency sum or p95.
    std::int64_t score = 0;
    std::map<RequestId, Slot> schedule;  // activated requests only
    std::int64_t nodes = 0;
};

// Exact optimum over no-eviction activation schedules. Ties resolve to the
// lexicographically smallest schedule (never-activated sorts last).
Solution solve(const OfflineInstance& instance);

// Completion slot per request id (absent = unfinished within the horizon).
using Outcome = std::map<RequestId, Slot>;

std::int64_t score(const OfflineInstance& instance, const Outcome& completions);
double value_of_score(const OfflineInstance& instance, std::int64_t score);
// True if score a is at least as good as score b.
bool at_least_as_good(Objective objective, std::int64_t a, std::int64_t b);

Outcome outcome_of(const RunResult& result, Slot horizon);
Outcome outcome_of_schedule(const OfflineInstance& instance, const std::map<RequestId, Slot>& schedule);

ArrivalStream to_arrivals(const OfflineInstance& instance);

// Replays a schedule through the engine.
RunResult replay(const OfflineInstance& instance, const std::map<RequestId, Slot>& schedule);

struct DominanceWitness {
    bool holds = false;
    double oracle_value = 0;
    double policy_value = 0;
    std::map<RequestId, Slot> oracle_schedule;
    // Final activation slot of each request the policy completed.
    std::map<RequestId, Slot> policy_schedule;
};

DominanceWitness verify_policy_dominance(const OfflineInstance& instance, Policy& policy);

}  // namespace kvflow::oracle
