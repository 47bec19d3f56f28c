#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvflow/core.hpp"
#include "kvflow/rational.hpp"
#include "kvflow/workload.hpp"

namespace kvflow::stability {

struct ClassLoad {
    Tokens prompt_len = 1;
    Tokens decode_len = 1;
    Rational rate;
};

// Position of an offered load relative to capacity. Equality is reported as
// Boundary: the instability conditions are strict and say nothing there.
enum class LoadVerdict { Below, Boundary, Above };

std::string_view to_string(LoadVerdict verdict);

struct NecessaryCheck {
    Rational offered_load;  // tokens per slot
    Tokens capacity = 0;
    LoadVerdict verdict = LoadVerdict::Below;
    bool necessary_violated = false;  // offered_load > capacity
};

// sum_k rate_k * workload_tokens(l_k, o_k) against M.
NecessaryCheck check_necessary_known(std::span<const ClassLoad> classes, Tokens capacity);

struct SufficientCheck {
    Tokens budgeted_load = 0;  // sum_k b_k * w_k
    Tokens capacity = 0;
    bool memory_condition = false;  // budgeted_load < capacity
    bool rate_condition = false;  // b_k > rate_k for every k
    std::vector<std::size_t> rate_violations;  // class positions with b_k <= rate_k
    bool sufficient_holds = false;
    std::optional<double> epsilon_slack;  // 1 - budgeted_load / M when memory_condition
};

SufficientCheck check_sufficient_known(std::span<const ClassLoad> classes, std::span<const std::int64_t> budgets,
                                       Tokens capacity);

struct LengthAtom {
    Tokens prompt_len = 1;
    Tokens decode_len = 1;
    Rational weight;  // relative probability mass
};

// Finite-support (l, o) distribution. cap() is the bound C on every length.
struct LengthDistribution {
    std::vector<LengthAtom> atoms;
    std::optional<Tokens> declared_cap;

    // Max length over atoms; throws if an atom exceeds declared_cap.
    Tokens cap() const;
    // Exact E[workload_tokens(l, o)]; zero for an empty distribution.
    Rational expected_workload() const;
    bool empty() const { return atoms.empty(); }

    static LengthDistribution empirical(std::span<const TraceRecord> records);
    // Class mixture weighted by arrival rate.
    static LengthDistribution from_classes(std::span<const ClassRate> classes);
};

NecessaryCheck check_necessary_unknown(const LengthDistribution& dist, Rational rate, Tokens capacity);

struct OverflowBound {
    double epsilon = 0;
    double constant = 0;  // eps^2 / (2 (A^2 + A) C^3)
    double log_bound = 0;  // ln T - constant * M^2
    double bound = 0;  // T exp(-constant M^2), 0 once log_bound < -700
    bool negligible = false;  // log_bound < -700
};

// Expected-overflow bound for a budget with E[B_t] = b and B_t <= A,
// given the slack epsilon directly.
OverflowBound overflow_bound_from_slack(std::int64_t cap_a, double epsilon, Tokens length_cap, Tokens capacity,
                                        Slot horizon);

// Derives epsilon = 1 - b E[w] / M from the distribution. Throws
// std::domain_error when epsilon <= 0 and std::invalid_argument when
// A < ceil(b).
OverflowBound overflow_bound(Rational mean_budget, std::int64_t cap_a, Tokens length_cap, Tokens capacity,
                             Slot horizon, const LengthDistribution& dist);

// Exact epsilon = 1 - b E[w] / M.
Rational budget_slack(Rational mean_budget, const LengthDistribution& dist, Tokens capacity);

}  // namespace kvflow::stability
