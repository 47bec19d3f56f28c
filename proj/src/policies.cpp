#include "kvflow/policies.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kvflow/errors.hpp"

namespace kvflow {

std::vector<EvictionCandidate> projected_footprints(std::span<const ActiveEntry> active) {
    std::vector<EvictionCandidate> out;
    out.reserve(active.size());
    for (const auto& a : active) out.push_back({a.id, a.prompt_len + a.generated + 1});
    return out;
}

EvictionDecision lifo_evict(std::span<const EvictionCandidate> active, Tokens required_release) {
    EvictionDecision out;
    Tokens released = 0;
    for (auto it = active.rbegin(); it != active.rend() && released < required_release; ++it) {
        out.evict.push_back(it->id);
        released += it->footprint;
    }
    if (released < required_release) {
        throw SimulationError("LIFO eviction exhausted the active set with " +
                              std::to_string(required_release - released) +
                              " tokens still over capacity (oversized request?)");
    }
    return out;
}

namespace {

EvictionDecision lifo_from_view(const PolicyView& view, Tokens required_release) {
    auto candidates = projected_footprints(view.active);
    return lifo_evict(candidates, required_release);
}

// Loads the forward profile of the active set; `lifetime(entry)` gives the
// decode length to assume for each entry.
template <typename LengthFn>
ProjectionProfile active_profile(const PolicyView& view, LengthFn lifetime) {
    std::vector<ProjectionItem> items;
    items.reserve(view.active.size());
    for (const auto& a : view.active) {
        Tokens o = std::max(lifetime(a), a.generated + 1);
        items.push_back({a.prompt_len, a.generated, o});
    }
    ProjectionProfile profile;
    profile.load(items);
    return profile;
}

}  // namespace

// --- flow control, known outputs -------------------------------------------

FlowControlKnown::FlowControlKnown(std::map<int, std::int64_t> budgets) : budgets_(std::move(budgets)) {
    if (budgets_.empty()) throw ConfigError("policy.budgets", "no per-class budgets given");
    for (const auto& [cls, b] : budgets_) {
        if (b < 1) throw ConfigError("policy.budgets", "budget for class " + std::to_string(cls) + " must be >= 1");
    }
}

ActivationDecision FlowControlKnown::decide(const PolicyView& view) {
    for (const auto& [cls, queue] : view.waiting.classes()) {
        if (!budgets_.count(cls)) {
            throw SimulationError("flow_known: waiting request of class " + std::to_string(cls) +
                                  " has no configured budget");
        }
    }
    if (view.waiting.size() != [&] {
            std::size_t n = 0;
            for (const auto& [cls, queue] : view.waiting.classes()) n += queue.size();
            return n;
        }()) {
        throw SimulationError("flow_known: waiting request without a class id");
    }
    ActivationDecision out;
    for (const auto& [cls, budget] : budgets_) {
        const auto* queue = view.waiting.class_queue(cls);
        if (!queue) continue;
        std::int64_t taken = 0;
        for (auto it = queue->begin(); it != queue->end() && taken < budget; ++it, ++taken) {
            out.activate.push_back(it->second);
        }
    }
    return out;
}

EvictionDecision FlowControlKnown::evict(const PolicyView& view, Tokens required_release) {
    // Only reachable when the budgets violate the memory condition.
    return lifo_from_view(view, required_release);
}

// --- flow control, unknown outputs -----------------------------------------

FlowControlUnknown::FlowControlUnknown(Rational mean_budget, std::optional<std::int64_t> cap, std::uint64_t seed)
    : mean_(mean_budget), cap_(cap.value_or(mean_budget.ceil())), frac_(mean_budget.frac().to_double()),
      rng_(seed, streams::kBudget) {
    if (mean_ < Rational(0)) throw ConfigError("policy.b", "mean budget must be >= 0");
    if (cap_ < mean_.ceil()) {
        throw ConfigError("policy.cap", "cap " + std::to_string(cap_) + " is below ceil(b) = " +
                                            std::to_string(mean_.ceil()));
    }
}

std::int64_t FlowControlUnknown::draw_budget() {
    std::int64_t b = mean_.floor();
    // Always consume one draw per slot so the stream does not depend on b.
    if (rng_.bernoulli(frac_)) ++b;
    return std::min(b, cap_);
}

ActivationDecision FlowControlUnknown::decide(const PolicyView& view) {
    ActivationDecision out;
    std::int64_t budget = draw_budget();
    out.budget = budget;
    std::int64_t taken = 0;
    for (auto it = view.waiting.fifo().begin(); it != view.waiting.fifo().end() && taken < budget; ++it, ++taken) {
        out.activate.push_back(it->second.id);
    }
    return out;
}

EvictionDecision FlowControlUnknown::evict(const PolicyView& view, Tokens required_release) {
    return lifo_from_view(view, required_release);
}

// --- alpha protection --------------------------------------------------------

AlphaProtection::AlphaProtection(double alpha) : alpha_(alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("policy.alpha", "alpha must lie in [0, 1)");
}

ActivationDecision AlphaProtection::decide(const PolicyView& view) {
    ActivationDecision out;
    const double limit = (1.0 - alpha_) * static_cast<double>(view.kv_capacity);
    Tokens total = view.current_usage;
    for (const auto& [key, entry] : view.waiting.fifo()) {
        Tokens next = total + entry.prompt_len + 1;
        if (static_cast<double>(next) > limit) break;
        total = next;
        out.activate.push_back(entry.id);
    }
    return out;
}

EvictionDecision AlphaProtection::evict(const PolicyView& view, Tokens /*required_release*/) {
    if (view.active.empty()) {
        throw SimulationError("alpha: overflow with an empty active set");
    }
    EvictionDecision out;
    for (auto it = view.active.rbegin(); it != view.active.rend(); ++it) out.evict.push_back(it->id);
    return out;
}

// --- MC ----------------------------------------------------------------------

MemoryConstrained::MemoryConstrained(std::optional<Tokens> assume_max_output)
    : assume_max_output_(assume_max_output) {
    if (assume_max_output_ && *assume_max_output_ < 1) {
        throw ConfigError("policy.assume_max_output", "must be >= 1");
    }
}

ActivationDecision MemoryConstrained::decide(const PolicyView& view) {
    if (!view.outputs_known && !assume_max_output_) {
        throw ConfigError("policy.assume_max_output", "required when output lengths are unknown");
    }
    auto length_of = [&](const std::optional<Tokens>& known) {
        return view.outputs_known && known ? *known : *assume_max_output_;
    };
    ProjectionProfile profile = active_profile(view, [&](const ActiveEntry& a) { return length_of(a.decode_len); });
    ActivationDecision out;
    for (const auto& [key, entry] : view.waiting.fifo()) {
        Tokens lifetime = length_of(entry.decode_len);
        if (profile.peak_with(entry.prompt_len, lifetime) > view.kv_capacity) break;
        profile.add_fresh(entry.prompt_len, lifetime);
        out.activate.push_back(entry.id);
    }
    return out;
}

EvictionDecision MemoryConstrained::evict(const PolicyView& view, Tokens required_release) {
    // Reachable only if a true length exceeds assume_max_output.
    return lifo_from_view(view, required_release);
}

// --- MC-SF -------------------------------------------------------------------

ActivationDecision MemoryConstrainedShortestFirst::decide(const PolicyView& view) {
    if (!view.outputs_known) {
        throw ConfigError("policy", "mc_sf needs known output lengths");
    }
    ProjectionProfile profile = active_profile(view, [](const ActiveEntry& a) { return *a.decode_len; });
    ActivationDecision out;
    // Candidates arrive in ascending decode_len, so a rejected (l, o) also
    // rules out every later candidate with prompt_len >= l.
    Tokens min_rejected_prompt = -1;
    for (const auto& [decode_len, arrival, id] : view.waiting.by_decode_len()) {
        const WaitingEntry* entry = view.waiting.find(id);
        if (min_rejected_prompt >= 0 && entry->prompt_len >= min_rejected_prompt) {
            if (min_rejected_prompt <= view.waiting.min_prompt_len()) break;
            continue;
        }
        if (profile.peak_with(entry->prompt_len, decode_len) > view.kv_capacity) {
            min_rejected_prompt =
                min_rejected_prompt < 0 ? entry->prompt_len : std::min(min_rejected_prompt, entry->prompt_len);
            if (min_rejected_prompt <= view.waiting.min_prompt_len()) break;
            continue;
        }
        profile.add_fresh(entry->prompt_len, decode_len);
        out.activate.push_back(id);
    }
    return out;
}

EvictionDecision MemoryConstrainedShortestFirst::evict(const PolicyView& view, Tokens required_release) {
    return lifo_from_view(view, required_release);
}

// --- Amin --------------------------------------------------------------------

Amin::Amin(Tokens o_min) : o_min_(o_min) {
    if (o_min < 1) throw ConfigError("policy.o_min", "must be >= 1");
}

Tokens Amin::prediction(RequestId id) const {
    auto it = predictions_.find(id);
    return it == predictions_.end() ? o_min_ : it->second;
}

Tokens Amin::updated_prediction(Tokens old_prediction, Tokens generated) {
    return std::max(2 * old_prediction, generated + 1);
}

ActivationDecision Amin::decide(const PolicyView& view) {
    ProjectionProfile profile = active_profile(view, [&](const ActiveEntry& a) { return prediction(a.id); });
    ActivationDecision out;
    // Pareto set of rejected (prompt_len, prediction): anything dominating a
    // rejected pair is rejected too, since admissions only raise the profile.
    std::vector<std::pair<Tokens, Tokens>> rejected;
    const Tokens min_prompt = view.waiting.min_prompt_len();
    for (const auto& [key, entry] : view.waiting.fifo()) {
        Tokens predicted = prediction(entry.id);
        bool dominated = std::any_of(rejected.begin(), rejected.end(), [&](const auto& r) {
            return entry.prompt_len >= r.first && predicted >= r.second;
        });
        if (dominated) continue;
        if (profile.peak_with(entry.prompt_len, predicted) > view.kv_capacity) {
            if (entry.prompt_len <= min_prompt && predicted <= o_min_) break;  // everything left is dominated
            rejected.emplace_back(entry.prompt_len, predicted);
            continue;
        }
        profile.add_fresh(entry.prompt_len, predicted);
        out.activate.push_back(entry.id);
    }
    return out;
}

EvictionDecision Amin::evict(const PolicyView& view, Tokens required_release) {
    // Ascending prediction; ties go to the most recently activated first.
    std::vector<std::size_t> order(view.active.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        Tokens pa = prediction(view.active[a].id), pb = prediction(view.active[b].id);
        if (pa != pb) return pa < pb;
        return a > b;
    });
    EvictionDecision out;
    Tokens released = 0;
    for (std::size_t idx : order) {
        if (released >= required_release) break;
        const auto& a = view.active[idx];
        out.evict.push_back(a.id);
        released += a.prompt_len + a.generated + 1;
        predictions_[a.id] = updated_prediction(prediction(a.id), a.generated);
    }
    if (released < required_release) {
        throw SimulationError("amin: eviction exhausted the active set (oversized request?)");
    }
    return out;
}

// --- scheduled replay --------------------------------------------------------

ScheduledPolicy::ScheduledPolicy(std::map<RequestId, Slot> schedule) {
    for (const auto& [id, slot] : schedule) by_slot_[slot].push_back(id);
}

ActivationDecision ScheduledPolicy::decide(const PolicyView& view) {
    ActivationDecision out;
    auto it = by_slot_.find(view.clock);
    if (it == by_slot_.end()) return out;
    for (RequestId id : it->second) {
        if (!view.waiting.contains(id)) {
            throw SimulationError("scheduled activation of request " + std::to_string(id) + " at slot " +
                                  std::to_string(view.clock) + " but it is not waiting");
        }
        out.activate.push_back(id);
    }
    return out;
}

EvictionDecision ScheduledPolicy::evict(const PolicyView& view, Tokens required_release) {
    return lifo_from_view(view, required_release);
}

}  // namespace kvflow
