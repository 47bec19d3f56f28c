#include "kvflow/oracle.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "kvflow/errors.hpp"

namespace kvflow::oracle {

void validate(const OfflineInstance& instance) {
    if (instance.requests.size() > kMaxRequests) {
        throw std::invalid_argument("oracle: at most " + std::to_string(kMaxRequests) + " requests");
    }
    if (instance.horizon < 1 || instance.horizon > kMaxHorizon) {
        throw std::invalid_argument("oracle: horizon must lie in [1, " + std::to_string(kMaxHorizon) + "]");
    }
    std::vector<RequestId> ids;
    for (const auto& r : instance.requests) {
        if (r.prompt_len < 1 || r.decode_len < 1 || r.arrival_slot < 1 || r.arrival_slot > instance.horizon) {
            throw std::invalid_argument("oracle: request " + std::to_string(r.id) + " is malformed");
        }
        if (r.prompt_len + 1 > instance.kv_capacity) {
            throw SimulationError("oracle: request " + std::to_string(r.id) + " can never fit (l + 1 > M)");
        }
        ids.push_back(r.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw std::invalid_argument("oracle: duplicate request ids");
    }
}

namespace {

Slot censored_latency(const OfflineInstance& inst, const OfflineRequest& r) {
    return inst.horizon - r.arrival_slot + 2;
}

std::int64_t p95_of(std::vector<std::int64_t> values) {
    std::sort(values.begin(), values.end());
    return values[nearest_rank(values.size(), 0.95) - 1];
}

class Search {
public:
    explicit Search(const OfflineInstance& inst) : inst_(inst) {
        order_ = inst.requests;
        std::sort(order_.begin(), order_.end(), [](const auto& a, const auto& b) {
            return a.arrival_slot != b.arrival_slot ? a.arrival_slot < b.arrival_slot : a.id < b.id;
        });
        usage_.assign(static_cast<std::size_t>(inst.horizon) + 1, 0);
        choice_.assign(order_.size(), kNever);
        best_choice_ = choice_;
        // The empty schedule is always feasible and seeds the incumbent.
        best_score_ = score_of(choice_);
        // Optimistic per-request contribution: completes as early as possible.
        for (const auto& r : order_) {
            bool can_finish = r.arrival_slot + r.decode_len - 1 <= inst.horizon;
            optimistic_.push_back(can_finish);
        }
    }

    Solution run() {
        dfs(0);
        Solution out;
        out.score = best_score_;
        out.value = value_of_score(inst_, best_score_);
        out.nodes = nodes_;
        for (std::size_t i = 0; i < order_.size(); ++i) {
            if (best_choice_[i] != kNever) out.schedule[order_[i].id] = best_choice_[i];
        }
        return out;
    }

private:
    static constexpr Slot kNever = std::numeric_limits<Slot>::max();

    std::int64_t latency_for(std::size_t i, Slot start) const {
        const auto& r = order_[i];
        if (start == kNever) return censored_latency(inst_, r);
        return start + r.decode_len - 1 - r.arrival_slot + 1;
    }

    std::int64_t score_of(const std::vector<Slot>& choice) const {
        switch (inst_.objective) {
            case Objective::RequestThroughput: {
                std::int64_t n = 0;
                for (Slot s : choice) n += s != kNever;
                return n;
            }
            case Objective::TokenThroughput: {
                std::int64_t n = 0;
                for (std::size_t i = 0; i < choice.size(); ++i) n += choice[i] != kNever ? order_[i].decode_len : 0;
                return n;
            }
            case Objective::AvgLatency: {
                std::int64_t sum = 0;
                for (std::size_t i = 0; i < choice.size(); ++i) sum += latency_for(i, choice[i]);
                return sum;
            }
            case Objective::P95Latency: {
                if (choice.empty()) return 0;
                std::vector<std::int64_t> lat;
                for (std::size_t i = 0; i < choice.size(); ++i) lat.push_back(latency_for(i, choice[i]));
                return p95_of(std::move(lat));
            }
        }
        return 0;
    }

    // Best score reachable from a prefix of `depth` fixed decisions.
    std::int64_t optimistic_bound(std::size_t depth) const {
        std::vector<Slot> probe = choice_;
        for (std::size_t i = depth; i < order_.size(); ++i) {
            probe[i] = optimistic_[i] ? order_[i].arrival_slot : kNever;
        }
        return score_of(probe);
    }

    bool improves(std::int64_t candidate) const {
        return maximized(inst_.objective) ? candidate > best_score_ : candidate < best_score_;
    }

    bool fits(const OfflineRequest& r, Slot start) const {
        for (Tokens q = 1; q <= r.decode_len; ++q) {
            if (usage_[static_cast<std::size_t>(start + q - 1)] + r.prompt_len + q > inst_.kv_capacity) return false;
        }
        return true;
    }

    void place(const OfflineRequest& r, Slot start, int sign) {
        for (Tokens q = 1; q <= r.decode_len; ++q) {
            usage_[static_cast<std::size_t>(start + q - 1)] += sign * (r.prompt_len + q);
        }
    }

    void dfs(std::size_t depth) {
        ++nodes_;
        if (depth == order_.size()) {
            std::int64_t s = score_of(choice_);
            if (improves(s)) {
                best_score_ = s;
                best_choice_ = choice_;
            }
            return;
        }
        if (!improves(optimistic_bound(depth))) return;
        const auto& r = order_[depth];
        // Starting so late that the request cannot finish only burns memory.
        for (Slot start = r.arrival_slot; start + r.decode_len - 1 <= inst_.horizon; ++start) {
            if (!fits(r, start)) continue;
            place(r, start, +1);
            choice_[depth] = start;
            dfs(depth + 1);
            place(r, start, -1);
            if (!improves(optimistic_bound(depth))) {
                choice_[depth] = kNever;
                return;
            }
        }
        choice_[depth] = kNever;
        dfs(depth + 1);
    }

    const OfflineInstance& inst_;
    std::vector<OfflineRequest> order_;
    std::vector<bool> optimistic_;
    std::vector<Tokens> usage_;
    std::vector<Slot> choice_;
    std::vector<Slot> best_choice_;
    std::int64_t best_score_ = 0;
    std::int64_t nodes_ = 0;
};

}  // namespace

Solution solve(const OfflineInstance& instance) {
    validate(instance);
    return Search(instance).run();
}

std::int64_t score(const OfflineInstance& instance, const Outcome& completions) {
    std::int64_t count = 0, tokens = 0, lat_sum = 0;
    std::vector<std::int64_t> lat;
    for (const auto& r : instance.requests) {
        auto it = completions.find(r.id);
        bool done = it != completions.end() && it->second <= instance.horizon;
        std::int64_t l = done ? it->second - r.arrival_slot + 1 : censored_latency(instance, r);
        count += done;
        tokens += done ? r.decode_len : 0;
        lat_sum += l;
        lat.push_back(l);
    }
    switch (instance.objective) {
        case Objective::RequestThroughput: return count;
        case Objective::TokenThroughput: return tokens;
        case Objective::AvgLatency: return lat_sum;
        case Objective::P95Latency: return lat.empty() ? 0 : p95_of(std::move(lat));
    }
    return 0;
}

double value_of_score(const OfflineInstance& instance, std::int64_t s) {
    switch (instance.objective) {
        case Objective::RequestThroughput:
        case Objective::TokenThroughput:
            return static_cast<double>(s) / static_cast<double>(instance.horizon);
        case Objective::AvgLatency:
            return instance.requests.empty()
                       ? 0.0
                       : static_cast<double>(s) / static_cast<double>(instance.requests.size());
        case Objective::P95Latency: return static_cast<double>(s);
    }
    return 0;
}

bool at_least_as_good(Objective objective, std::int64_t a, std::int64_t b) {
    return maximized(objective) ? a >= b : a <= b;
}

Outcome outcome_of(const RunResult& result, Slot horizon) {
    Outcome out;
    for (const auto& rec : result.requests) {
        if (rec.state.completion_slot && *rec.state.completion_slot <= horizon) {
            out[rec.request.id] = *rec.state.completion_slot;
        }
    }
    return out;
}

Outcome outcome_of_schedule(const OfflineInstance& instance, const std::map<RequestId, Slot>& schedule) {
    Outcome out;
    for (const auto& r : instance.requests) {
        auto it = schedule.find(r.id);
        if (it == schedule.end()) continue;
        Slot done = it->second + r.decode_len - 1;
        if (done <= instance.horizon) out[r.id] = done;
    }
    return out;
}

ArrivalStream to_arrivals(const OfflineInstance& instance) {
    ArrivalStream s;
    s.slots.resize(static_cast<std::size_t>(instance.horizon));
    auto sorted = instance.requests;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.arrival_slot != b.arrival_slot ? a.arrival_slot < b.arrival_slot : a.id < b.id;
    });
    for (const auto& r : sorted) {
        s.slots[static_cast<std::size_t>(r.arrival_slot - 1)].push_back(
            Request{r.id, r.prompt_len, r.decode_len, r.arrival_slot, r.class_id, true});
        ++s.total;
    }
    return s;
}

RunResult replay(const OfflineInstance& instance, const std::map<RequestId, Slot>& schedule) {
    ScheduledPolicy policy(schedule);
    return run(to_arrivals(instance), policy, instance.kv_capacity, true);
}

DominanceWitness verify_policy_dominance(const OfflineInstance& instance, Policy& policy) {
    Solution best = solve(instance);
    RunResult result = run(to_arrivals(instance), policy, instance.kv_capacity, true);
    Outcome outcome = outcome_of(result, instance.horizon);
    std::int64_t policy_score = score(instance, outcome);

    DominanceWitness w;
    w.oracle_value = best.value;
    w.policy_value = value_of_score(instance, policy_score);
    w.oracle_schedule = best.schedule;
    for (const auto& rec : result.requests) {
        if (outcome.count(rec.request.id)) {
            w.policy_schedule[rec.request.id] = *rec.state.completion_slot - rec.request.decode_len + 1;
        }
    }
    w.holds = at_least_as_good(instance.objective, best.score, policy_score);
    return w;
}

}  // namespace kvflow::oracle
