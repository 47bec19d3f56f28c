#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "kvflow/core.hpp"
#include "kvflow/policies.hpp"
#include "kvflow/policy_view.hpp"
#include "kvflow/workload.hpp"

namespace kvflow {

// Phases run in this order once per slot.
enum class SlotPhase { Arrivals, Activation, OverflowCheck, Decode, Completion };

enum class EventKind { Arrive, Activate, Evict, DecodeStep, Complete, Overflow };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

struct Event {
    Slot slot = 0;
    EventKind kind = EventKind::Arrive;
    RequestId request_id = 0;  // 0 for overflow events
    Tokens usage_after = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

// Wall-time surrogate per slot: fixed + per_prefill * prefill + per_decode * decode.
// (1, 0, 0) is pure slot time.
struct SlotCostModel {
    double fixed = 1.0;
    double per_prefill = 0.0;
    double per_decode = 0.0;
};

double slot_cost(Tokens prefill_tokens, Tokens decode_tokens, const SlotCostModel& model);

struct RunOptions {
    bool record_events = false;
    bool record_class_series = false;
    SlotCostModel cost;
};

struct RequestRecord {
    Request request;
    RequestState state;
};

struct RunResult {
    std::string policy;
    Slot horizon = 0;
    Tokens kv_capacity = 0;
    bool outputs_known = true;

    std::vector<Event> events;  // empty unless RunOptions::record_events
    std::vector<RequestRecord> requests;  // arrival order
    std::vector<RequestId> final_waiting;  // FIFO order
    std::vector<RequestId> final_active;  // activation order

    // Per-slot series, index t - 1. usage is the end-of-slot peak U_t
    // (completing requests still counted).
    std::vector<Tokens> usage;
    std::vector<std::int64_t> waiting;
    std::vector<std::int64_t> active;
    std::vector<std::int64_t> budget;  // B_t; empty for unbudgeted policies
    std::vector<Tokens> prefill_tokens;
    std::vector<Tokens> decode_tokens;
    std::map<int, std::vector<std::int64_t>> class_waiting;  // record_class_series only

    std::int64_t arrivals = 0;
    std::int64_t overflow_events = 0;  // slots in which an overflow was detected
    std::int64_t evictions = 0;
    Tokens wasted_tokens = 0;
    std::int64_t completed = 0;
    Tokens generated_tokens = 0;
    double wall_time = 0.0;
};

// Outcome of one slot.
struct SlotReport {
    Slot slot = 0;
    Tokens usage = 0;
    std::int64_t activated = 0;
    std::int64_t evicted = 0;
    std::int64_t completed = 0;
    bool overflow = false;
};

// Slot-by-slot simulator bound to one policy instance. Single-threaded.
class Engine {
public:
    Engine(Tokens kv_capacity, Policy& policy, bool outputs_known, RunOptions options = {});

    // Runs arrivals -> activation -> overflow check/eviction -> decode ->
    // completion for the next slot. Throws SimulationError on policy bugs or
    // on a request whose prompt alone cannot fit (l + 1 > M).
    SlotReport step(std::span<const Request> arrivals);

    Slot clock() const { return clock_; }
    Tokens usage() const { return resident_; }
    const WaitingQueue& waiting() const { return waiting_; }
    std::span<const ActiveEntry> active() const { return active_; }
    const RequestRecord& record(RequestId id) const;

    RunResult finish() &&;

private:
    PolicyView view() const;
    void log(EventKind kind, RequestId id, Tokens usage_after);
    void activate(const ActivationDecision& decision);
    bool resolve_overflow();
    void decode_and_complete(SlotReport& report);

    Tokens capacity_;
    Policy& policy_;
    bool outputs_known_;
    RunOptions options_;

    Slot clock_ = 0;
    Tokens resident_ = 0;
    WaitingQueue waiting_;
    std::vector<ActiveEntry> active_;
    std::vector<std::size_t> active_record_;  // parallel to active_
    std::vector<RequestRecord> records_;
    absl::flat_hash_map<RequestId, std::size_t> index_;
    Tokens slot_prefill_ = 0;
    RunResult result_;
};

RunResult run(const ArrivalStream& arrivals, Policy& policy, Tokens kv_capacity, bool outputs_known,
              RunOptions options = {});
RunResult run(const WorkloadSpec& spec, Policy& policy, Tokens kv_capacity, std::uint64_t seed,
              RunOptions options = {});

}  // namespace kvflow
