#include "kvflow/stability.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace kvflow::stability {

std::string_view to_string(LoadVerdict verdict) {
    switch (verdict) {
        case LoadVerdict::Below: return "below";
        case LoadVerdict::Boundary: return "boundary";
        case LoadVerdict::Above: return "above";
    }
    return "?";
}

namespace {

NecessaryCheck classify(Rational load, Tokens capacity) {
    NecessaryCheck out;
    out.offered_load = load;
    out.capacity = capacity;
    int c = compare(load, Rational(capacity));
    out.verdict = c < 0 ? LoadVerdict::Below : (c == 0 ? LoadVerdict::Boundary : LoadVerdict::Above);
    out.necessary_violated = c > 0;
    return out;
}

}  // namespace

NecessaryCheck check_necessary_known(std::span<const ClassLoad> classes, Tokens capacity) {
    Rational load(0);
    for (const auto& c : classes) load += c.rate * Rational(workload_tokens(c.prompt_len, c.decode_len));
    return classify(load, capacity);
}

SufficientCheck check_sufficient_known(std::span<const ClassLoad> classes, std::span<const std::int64_t> budgets,
                                       Tokens capacity) {
    if (classes.size() != budgets.size()) {
        throw std::invalid_argument("check_sufficient_known: one budget per class required");
    }
    SufficientCheck out;
    out.capacity = capacity;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        out.budgeted_load += budgets[k] * workload_tokens(classes[k].prompt_len, classes[k].decode_len);
        if (!(Rational(budgets[k]) > classes[k].rate)) out.rate_violations.push_back(k);
    }
    out.memory_condition = out.budgeted_load < capacity;
    out.rate_condition = out.rate_violations.empty();
    out.sufficient_holds = out.memory_condition && out.rate_condition;
    if (out.memory_condition) {
        out.epsilon_slack = 1.0 - static_cast<double>(out.budgeted_load) / static_cast<double>(capacity);
    }
    return out;
}

Tokens LengthDistribution::cap() const {
    Tokens c = 0;
    for (const auto& a : atoms) c = std::max({c, a.prompt_len, a.decode_len});
    if (declared_cap && c > *declared_cap) {
        throw std::invalid_argument("length " + std::to_string(c) + " exceeds the declared cap " +
                                    std::to_string(*declared_cap));
    }
    return declared_cap.value_or(c);
}

Rational LengthDistribution::expected_workload() const {
    if (atoms.empty()) return Rational(0);
    Rational mass(0), total(0);
    for (const auto& a : atoms) {
        if (a.weight < Rational(0)) throw std::invalid_argument("negative atom weight");
        mass += a.weight;
        total += a.weight * Rational(workload_tokens(a.prompt_len, a.decode_len));
    }
    if (mass == Rational(0)) return Rational(0);
    return total / mass;
}

LengthDistribution LengthDistribution::empirical(std::span<const TraceRecord> records) {
    std::map<std::pair<Tokens, Tokens>, std::int64_t> counts;
    for (const auto& r : records) ++counts[{r.prompt_tokens, r.output_tokens}];
    LengthDistribution d;
    for (const auto& [lo, n] : counts) d.atoms.push_back({lo.first, lo.second, Rational(n)});
    return d;
}

LengthDistribution LengthDistribution::from_classes(std::span<const ClassRate> classes) {
    LengthDistribution d;
    for (const auto& c : classes) d.atoms.push_back({c.cls.prompt_len, c.cls.decode_len, c.rate});
    return d;
}

NecessaryCheck check_necessary_unknown(const LengthDistribution& dist, Rational rate, Tokens capacity) {
    dist.cap();  // enforces the declared bound
    return classify(rate * dist.expected_workload(), capacity);
}

OverflowBound overflow_bound_from_slack(std::int64_t cap_a, double epsilon, Tokens length_cap, Tokens capacity,
                                        Slot horizon) {
    if (!(epsilon > 0.0)) throw std::domain_error("overflow bound undefined: slack epsilon must be > 0");
    if (cap_a < 1 || length_cap < 1 || capacity < 1 || horizon < 1) {
        throw std::invalid_argument("overflow bound needs A, C, M, T >= 1");
    }
    const auto a = static_cast<double>(cap_a);
    const auto c = static_cast<double>(length_cap);
    const auto m = static_cast<double>(capacity);
    OverflowBound out;
    out.epsilon = epsilon;
    out.constant = epsilon * epsilon / (2.0 * (a * a + a) * c * c * c);
    out.log_bound = std::log(static_cast<double>(horizon)) - out.constant * m * m;
    out.negligible = out.log_bound < -700.0;
    out.bound = out.negligible ? 0.0 : std::exp(out.log_bound);
    return out;
}

Rational budget_slack(Rational mean_budget, const LengthDistribution& dist, Tokens capacity) {
    return Rational(1) - mean_budget * dist.expected_workload() / Rational(capacity);
}

OverflowBound overflow_bound(Rational mean_budget, std::int64_t cap_a, Tokens length_cap, Tokens capacity,
                             Slot horizon, const LengthDistribution& dist) {
    if (cap_a < mean_budget.ceil()) {
        throw std::invalid_argument("budget cap A must be >= ceil(b)");
    }
    if (dist.cap() > length_cap) {
        throw std::invalid_argument("length cap C is below the largest length in the distribution");
    }
    Rational eps = budget_slack(mean_budget, dist, capacity);
    if (eps <= Rational(0)) {
        throw std::domain_error("overflow bound undefined: b E[w] >= M (slack " + eps.to_string() + ")");
    }
    return overflow_bound_from_slack(cap_a, eps.to_double(), length_cap, capacity, horizon);
}

}  // namespace kvflow::stability
