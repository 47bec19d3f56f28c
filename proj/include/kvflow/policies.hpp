#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kvflow/core.hpp"
#include "kvflow/policy_view.hpp"
#include "kvflow/rational.hpp"
#include "kvflow/rng.hpp"

namespace kvflow {

struct ActivationDecision {
    std::vector<RequestId> activate;  // activation order
    std::optional<std::int64_t> budget;  // B_t, for budgeted policies
};

struct EvictionDecision {
    std::vector<RequestId> evict;
};

// A scheduler instance is bound to one simulation run.
class Policy {
public:
    virtual ~Policy() = default;

    virtual std::string_view name() const = 0;
    virtual bool requires_known_outputs() const { return false; }

    // Called once per slot after arrivals join the queue.
    virtual ActivationDecision decide(const PolicyView& view) = 0;
    // Called while the projected end-of-slot usage exceeds capacity;
    // required_release is the excess in tokens.
    virtual EvictionDecision evict(const PolicyView& view, Tokens required_release) = 0;
};

// Tokens an active request will hold at the end of the current slot.
struct EvictionCandidate {
    RequestId id = 0;
    Tokens footprint = 0;
};

std::vector<EvictionCandidate> projected_footprints(std::span<const ActiveEntry> active);

// Evicts from the most recently activated backwards until the released
// footprint covers required_release. Throws SimulationError if the active
// set runs out first.
EvictionDecision lifo_evict(std::span<const EvictionCandidate> active, Tokens required_release);

// Per-class integer budgets, known output lengths.
class FlowControlKnown final : public Policy {
public:
    explicit FlowControlKnown(std::map<int, std::int64_t> budgets);

    std::string_view name() const override { return "flow_known"; }
    ActivationDecision decide(const PolicyView& view) override;
    EvictionDecision evict(const PolicyView& view, Tokens required_release) override;

    const std::map<int, std::int64_t>& budgets() const { return budgets_; }

private:
    std::map<int, std::int64_t> budgets_;
};

// Scalar budget B_t = floor(b) + Bernoulli(b - floor(b)), FIFO admission,
// LIFO eviction.
class FlowControlUnknown final : public Policy {
public:
    FlowControlUnknown(Rational mean_budget, std::optional<std::int64_t> cap, std::uint64_t seed);

    std::string_view name() const override { return "flow_unknown"; }
    ActivationDecision decide(const PolicyView& view) override;
    EvictionDecision evict(const PolicyView& view, Tokens required_release) override;

    std::int64_t draw_budget();
    std::int64_t cap() const { return cap_; }
    Rational mean_budget() const { return mean_; }

private:
    Rational mean_;
    std::int64_t cap_;
    double frac_;
    RandomStream rng_;
};

// Greedy admission while l+1 fits under (1 - alpha) M; evicts everything on
// overflow.
class AlphaProtection final : public Policy {
public:
    explicit AlphaProtection(double alpha);

    std::string_view name() const override { return "alpha"; }
    ActivationDecision decide(const PolicyView& view) override;
    EvictionDecision evict(const PolicyView& view, Tokens required_release) override;

private:
    double alpha_;
};

// FIFO admission while the exact forward projection stays within M. With
// hidden outputs every length is taken to be assume_max_output.
class MemoryConstrained final : public Policy {
public:
    explicit MemoryConstrained(std::optional<Tokens> assume_max_output);

    std::string_view name() const override { return "mc"; }
    ActivationDecision decide(const PolicyView& view) override;
    EvictionDecision evict(const PolicyView& view, Tokens required_release) override;

private:
    std::optional<Tokens> assume_max_output_;
};

// Same feasibility rule, candidates scanned shortest decode first with
// skipping.
class MemoryConstrainedShortestFirst final : public Policy {
public:
    std::string_view name() const override { return "mc_sf"; }
    bool requires_known_outputs() const override { return true; }
    ActivationDecision decide(const PolicyView& view) override;
    EvictionDecision evict(const PolicyView& view, Tokens required_release) override;
};

// Optimistic admission with per-request output predictions starting at
// o_min; evicts in ascending prediction order and grows the evicted
// predictions to max(2 * old, generated + 1).
class Amin final : public Policy {
public:
    explicit Amin(Tokens o_min);

    std::string_view name() const override { return "amin"; }
    ActivationDecision decide(const PolicyView& view) override;
    EvictionDecision evict(const PolicyView& view, Tokens required_release) override;

    Tokens prediction(RequestId id) const;
    static Tokens updated_prediction(Tokens old_prediction, Tokens generated);

private:
    Tokens o_min_;
    std::unordered_map<RequestId, Tokens> predictions_;
};

// Replays a fixed activation schedule (request id -> slot). Used to run
// hindsight schedules through the engine.
class ScheduledPolicy final : public Policy {
public:
    explicit ScheduledPolicy(std::map<RequestId, Slot> schedule);

    std::string_view name() const override { return "scheduled"; }
    ActivationDecision decide(const PolicyView& view) override;
    EvictionDecision evict(const PolicyView& view, Tokens required_release) override;

private:
    std::map<Slot, std::vector<RequestId>> by_slot_;
};

}  // namespace kvflow
