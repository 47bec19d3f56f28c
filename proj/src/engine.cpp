#include "kvflow/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kvflow/errors.hpp"

namespace kvflow {

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Arrive: return "arrive";
        case EventKind::Activate: return "activate";
        case EventKind::Evict: return "evict";
        case EventKind::DecodeStep: return "decode_step";
        case EventKind::Complete: return "complete";
        case EventKind::Overflow: return "overflow";
    }
    return "?";
}

EventKind event_kind_from_string(std::string_view name) {
    for (auto kind : {EventKind::Arrive, EventKind::Activate, EventKind::Evict, EventKind::DecodeStep,
                      EventKind::Complete, EventKind::Overflow}) {
        if (to_string(kind) == name) return kind;
    }
    throw std::invalid_argument("unknown event kind '" + std::string(name) + "'");
}

double slot_cost(Tokens prefill_tokens, Tokens decode_tokens, const SlotCostModel& model) {
    if (model.fixed < 0 || model.per_prefill < 0 || model.per_decode < 0) {
        throw std::invalid_argument("slot cost coefficients must be nonnegative");
    }
    if (prefill_tokens < 0 || decode_tokens < 0) {
        throw std::invalid_argument("slot cost token counts must be nonnegative");
    }
    return model.fixed + model.per_prefill * static_cast<double>(prefill_tokens) +
           model.per_decode * static_cast<double>(decode_tokens);
}

Engine::Engine(Tokens kv_capacity, Policy& policy, bool outputs_known, RunOptions options)
    : capacity_(kv_capacity), policy_(policy), outputs_known_(outputs_known), options_(options) {
    if (kv_capacity < 2) throw std::invalid_argument("kv capacity must be >= 2 tokens");
    if (policy.requires_known_outputs() && !outputs_known) {
        throw ConfigError("policy", std::string(policy.name()) + " needs known output lengths");
    }
    slot_cost(0, 0, options_.cost);  // validates coefficients
    result_.policy = std::string(policy.name());
    result_.kv_capacity = kv_capacity;
    result_.outputs_known = outputs_known;
}

const RequestRecord& Engine::record(RequestId id) const { return records_.at(index_.at(id)); }

PolicyView Engine::view() const {
    return PolicyView{clock_, capacity_, resident_, outputs_known_, waiting_, active_};
}

void Engine::log(EventKind kind, RequestId id, Tokens usage_after) {
    if (options_.record_events) result_.events.push_back({clock_, kind, id, usage_after});
}

SlotReport Engine::step(std::span<const Request> arrivals) {
    ++clock_;
    SlotReport report;
    report.slot = clock_;
    slot_prefill_ = 0;

    // Arrivals.
    for (const Request& r : arrivals) {
        if (r.prompt_len < 1 || r.decode_len < 1) {
            throw SimulationError("request " + std::to_string(r.id) + " has a non-positive length");
        }
        if (r.arrival_slot != clock_) {
            throw SimulationError("request " + std::to_string(r.id) + " arrives at slot " +
                                  std::to_string(r.arrival_slot) + " but was delivered at slot " +
                                  std::to_string(clock_));
        }
        if (r.prompt_len + 1 > capacity_) {
            throw SimulationError("request " + std::to_string(r.id) + " is oversized: prompt " +
                                  std::to_string(r.prompt_len) + " + 1 exceeds capacity " +
                                  std::to_string(capacity_));
        }
        if (!index_.emplace(r.id, records_.size()).second) {
            throw SimulationError("duplicate request id " + std::to_string(r.id));
        }
        Request stored = r;
        stored.output_known = outputs_known_;
        records_.push_back({stored, RequestState{}});
        waiting_.push(WaitingEntry{r.id, r.prompt_len, r.class_id,
                                   outputs_known_ ? std::optional<Tokens>(r.decode_len) : std::nullopt,
                                   r.arrival_slot});
        ++result_.arrivals;
        log(EventKind::Arrive, r.id, resident_);
    }

    // Activation.
    ActivationDecision decision = policy_.decide(view());
    if (decision.budget) result_.budget.push_back(*decision.budget);
    activate(decision);
    report.activated = static_cast<std::int64_t>(decision.activate.size());

    // Overflow check against the end-of-slot peak.
    std::int64_t evictions_before = result_.evictions;
    report.overflow = resolve_overflow();
    report.evicted = result_.evictions - evictions_before;

    decode_and_complete(report);

    result_.waiting.push_back(static_cast<std::int64_t>(waiting_.size()));
    result_.active.push_back(static_cast<std::int64_t>(active_.size()));
    if (options_.record_class_series) {
        for (const auto& [cls, q] : waiting_.classes()) {
            auto& series = result_.class_waiting[cls];
            series.resize(static_cast<std::size_t>(clock_ - 1), 0);
        }
        for (auto& [cls, series] : result_.class_waiting) {
            series.resize(static_cast<std::size_t>(clock_ - 1), 0);
            series.push_back(static_cast<std::int64_t>(waiting_.class_size(cls)));
        }
    }
    return report;
}

void Engine::activate(const ActivationDecision& decision) {
    for (RequestId id : decision.activate) {
        // a repeated id is caught here too, since the first copy left the queue
        if (!waiting_.erase(id)) {
            throw SimulationError(std::string(policy_.name()) + " activated request " + std::to_string(id) +
                                  " which is not waiting (or twice)");
        }
        std::size_t idx = index_.at(id);
        RequestRecord& rec = records_[idx];
        rec.state.phase = Phase::Active;
        rec.state.generated = 0;
        rec.state.activation_slot = clock_;
        active_.push_back(ActiveEntry{id, rec.request.prompt_len, 0, clock_,
                                      outputs_known_ ? std::optional<Tokens>(rec.request.decode_len)
                                                     : std::nullopt});
        active_record_.push_back(idx);
        resident_ += rec.request.prompt_len;
        slot_prefill_ += rec.request.prompt_len;
        log(EventKind::Activate, id, resident_);
    }
}

bool Engine::resolve_overflow() {
    bool overflowed = false;
    while (true) {
        Tokens projected = resident_ + static_cast<Tokens>(active_.size());
        if (projected <= capacity_) break;
        if (!overflowed) {
            overflowed = true;
            ++result_.overflow_events;
            log(EventKind::Overflow, 0, projected);
        }
        if (active_.empty()) {
            throw SimulationError("overflow with an empty active set");
        }
        EvictionDecision decision = policy_.evict(view(), projected - capacity_);
        if (decision.evict.empty()) {
            throw SimulationError(std::string(policy_.name()) + " returned no evictions while " +
                                  std::to_string(projected - capacity_) + " tokens over capacity");
        }
        absl::flat_hash_map<RequestId, std::size_t> position;
        position.reserve(active_.size());
        for (std::size_t i = 0; i < active_.size(); ++i) position.emplace(active_[i].id, i);
        std::vector<char> drop(active_.size(), 0);
        for (RequestId id : decision.evict) {
            auto it = position.find(id);
            if (it == position.end() || drop[it->second]) {
                throw SimulationError(std::string(policy_.name()) + " evicted request " + std::to_string(id) +
                                      " which is not active (or twice)");
            }
            drop[it->second] = 1;
            RequestRecord& rec = records_[active_record_[it->second]];
            result_.wasted_tokens += rec.state.generated;
            resident_ -= rec.request.prompt_len + rec.state.generated;
            rec.state.phase = Phase::Waiting;
            rec.state.generated = 0;
            rec.state.activation_slot.reset();
            ++rec.state.evict_count;
            ++result_.evictions;
            waiting_.push(WaitingEntry{id, rec.request.prompt_len, rec.request.class_id,
                                       outputs_known_ ? std::optional<Tokens>(rec.request.decode_len)
                                                      : std::nullopt,
                                       rec.request.arrival_slot});
            log(EventKind::Evict, id, resident_);
        }
        std::size_t out = 0;
        for (std::size_t i = 0; i < active_.size(); ++i) {
            if (drop[i]) continue;
            active_[out] = active_[i];
            active_record_[out] = active_record_[i];
            ++out;
        }
        active_.resize(out);
        active_record_.resize(out);
    }
    return overflowed;
}

void Engine::decode_and_complete(SlotReport& report) {
    const auto decoded = static_cast<Tokens>(active_.size());
    for (std::size_t i = 0; i < active_.size(); ++i) {
        ++active_[i].generated;
        records_[active_record_[i]].state.generated = active_[i].generated;
        ++resident_;
        if (options_.record_events) log(EventKind::DecodeStep, active_[i].id, resident_);
    }
    result_.generated_tokens += decoded;
    report.usage = resident_;
    result_.usage.push_back(resident_);
    result_.prefill_tokens.push_back(slot_prefill_);
    result_.decode_tokens.push_back(decoded);
    result_.wall_time += slot_cost(slot_prefill_, decoded, options_.cost);

    std::size_t out = 0;
    for (std::size_t i = 0; i < active_.size(); ++i) {
        RequestRecord& rec = records_[active_record_[i]];
        if (active_[i].generated == rec.request.decode_len) {
            rec.state.phase = Phase::Completed;
            rec.state.completion_slot = clock_;
            resident_ -= rec.request.prompt_len + rec.request.decode_len;
            ++result_.completed;
            ++report.completed;
            log(EventKind::Complete, rec.request.id, resident_);
            continue;
        }
        active_[out] = active_[i];
        active_record_[out] = active_record_[i];
        ++out;
    }
    active_.resize(out);
    active_record_.resize(out);
}

RunResult Engine::finish() && {
    result_.horizon = clock_;
    result_.requests = std::move(records_);
    for (const auto& [key, entry] : waiting_.fifo()) result_.final_waiting.push_back(entry.id);
    for (const auto& a : active_) result_.final_active.push_back(a.id);
    return std::move(result_);
}

RunResult run(const ArrivalStream& arrivals, Policy& policy, Tokens kv_capacity, bool outputs_known,
              RunOptions options) {
    Engine engine(kv_capacity, policy, outputs_known, options);
    for (const auto& slot : arrivals.slots) engine.step(slot);
    return std::move(engine).finish();
}

RunResult run(const WorkloadSpec& spec, Policy& policy, Tokens kv_capacity, std::uint64_t seed, RunOptions options) {
    ArrivalStream arrivals = generate_arrivals(spec, seed);
    return run(arrivals, policy, kv_capacity, spec.output_known, options);
}

}  // namespace kvflow
