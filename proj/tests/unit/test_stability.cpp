#include <gtest/gtest.h>

#include <cmath>

#include "kvflow/stability.hpp"

using namespace kvflow;
using namespace kvflow::stability;

namespace {

std::vector<ClassLoad> preset(Rational rate) {
    return {{10, 20, rate}, {10, 40, rate}, {10, 60, rate}};
}

}  // namespace

TEST(Necessary, OverloadedPreset) {
    auto c = check_necessary_known(preset(Rational(5)), 16492);
    EXPECT_EQ(c.offered_load, Rational(20300));
    EXPECT_TRUE(c.necessary_violated);
    EXPECT_EQ(c.verdict, LoadVerdict::Above);
}

TEST(Necessary, SplitRatePreset) {
    auto c = check_necessary_known(preset(Rational(5, 3)), 16492);
    EXPECT_EQ(c.offered_load, Rational(20300, 3));
    EXPECT_NEAR(c.offered_load.to_double(), 6766.7, 0.05);
    EXPECT_FALSE(c.necessary_violated);
}

TEST(Necessary, BoundaryIsNotFlagged) {
    std::vector<ClassLoad> one{{1, 1, Rational(1)}};
    auto c = check_necessary_known(one, 2);
    EXPECT_EQ(c.offered_load, Rational(2));
    EXPECT_FALSE(c.necessary_violated);
    EXPECT_EQ(c.verdict, LoadVerdict::Boundary);
}

TEST(Sufficient, PresetBudgets) {
    std::vector<std::int64_t> b{4, 4, 4};
    auto s = check_sufficient_known(preset(Rational(5, 3)), b, 16492);
    EXPECT_EQ(s.budgeted_load, 16240);
    EXPECT_TRUE(s.memory_condition);
    EXPECT_TRUE(s.rate_condition);
    EXPECT_TRUE(s.sufficient_holds);
    ASSERT_TRUE(s.epsilon_slack);
    EXPECT_NEAR(*s.epsilon_slack, 1.0 - 16240.0 / 16492.0, 1e-15);
}

TEST(Sufficient, RateConditionFails) {
    std::vector<std::int64_t> b{4, 4, 4};
    auto s = check_sufficient_known(preset(Rational(5)), b, 16492);
    EXPECT_TRUE(s.memory_condition);
    EXPECT_FALSE(s.rate_condition);
    EXPECT_EQ(s.rate_violations.size(), 3u);
    EXPECT_FALSE(s.sufficient_holds);
}

TEST(Sufficient, MemoryConditionFails) {
    std::vector<std::int64_t> b{5, 4, 4};
    auto s = check_sufficient_known(preset(Rational(5, 3)), b, 16492);
    EXPECT_EQ(s.budgeted_load, 16650);
    EXPECT_FALSE(s.memory_condition);
    EXPECT_FALSE(s.sufficient_holds);
    EXPECT_FALSE(s.epsilon_slack);
}

TEST(NecessaryUnknown, PointMass) {
    LengthDistribution d{{{10, 20, Rational(1)}}, std::nullopt};
    auto c = check_necessary_unknown(d, Rational(1), 400);
    EXPECT_EQ(c.offered_load, Rational(410));
    EXPECT_TRUE(c.necessary_violated);
}

TEST(NecessaryUnknown, EmptyTrace) {
    LengthDistribution d = LengthDistribution::empirical({});
    auto c = check_necessary_unknown(d, Rational(3), 100);
    EXPECT_EQ(c.offered_load, Rational(0));
    EXPECT_FALSE(c.necessary_violated);
}

TEST(NecessaryUnknown, TwoAtoms) {
    LengthDistribution d{{{1, 1, Rational(1)}, {10, 20, Rational(1)}}, std::nullopt};
    EXPECT_EQ(d.expected_workload(), Rational(206));
    EXPECT_EQ(check_necessary_unknown(d, Rational(2), 1000).offered_load, Rational(412));
}

TEST(LengthDistribution, EmpiricalAndClassMixture) {
    std::vector<TraceRecord> recs{{1, 10, 20}, {2, 10, 20}, {3, 1, 1}};
    auto d = LengthDistribution::empirical(recs);
    EXPECT_EQ(d.expected_workload(), Rational(410 + 410 + 2, 3));
    EXPECT_EQ(d.cap(), 20);
    std::vector<ClassRate> classes{{{1, 10, 20}, Rational(1)}, {{2, 10, 60}, Rational(3)}};
    auto m = LengthDistribution::from_classes(classes);
    EXPECT_EQ(m.expected_workload(), Rational(410 + 3 * 2430, 4));
    EXPECT_EQ(m.cap(), 60);
    LengthDistribution capped{{{10, 20, Rational(1)}}, 15};
    EXPECT_THROW(capped.cap(), std::invalid_argument);
}

TEST(OverflowBound, ConstantAndBound) {
    auto b = overflow_bound_from_slack(2, 0.5, 1, 10, 100);
    EXPECT_NEAR(b.constant, 1.0 / 48.0, 1e-12 / 48.0);
    double expect = 100.0 * std::exp(-100.0 / 48.0);
    EXPECT_NEAR(b.bound, expect, 1e-12 * expect);
    EXPECT_NEAR(b.bound, 12.45, 0.01);
    EXPECT_FALSE(b.negligible);
}

TEST(OverflowBound, FromDistribution) {
    // E[w] = 2 for (1, 1); b = 2, M = 8 gives eps = 1 - 4/8 = 1/2
    LengthDistribution d{{{1, 1, Rational(1)}}, std::nullopt};
    auto b = overflow_bound(Rational(2), 2, 1, 8, 100, d);
    EXPECT_DOUBLE_EQ(b.epsilon, 0.5);
    EXPECT_NEAR(b.constant, 1.0 / 48.0, 1e-15);
    EXPECT_EQ(budget_slack(Rational(2), d, 8), Rational(1, 2));
}

TEST(OverflowBound, ZeroSlackIsAnError) {
    LengthDistribution d{{{1, 1, Rational(1)}}, std::nullopt};
    EXPECT_THROW(overflow_bound(Rational(5), 5, 1, 10, 100, d), std::domain_error);
    EXPECT_THROW(overflow_bound(Rational(5, 2), 2, 1, 100, 100, d), std::invalid_argument);
}

TEST(OverflowBound, HugeExponentIsNegligible) {
    auto b = overflow_bound_from_slack(2, 0.5, 1, 100000, 100);
    EXPECT_TRUE(b.negligible);
    EXPECT_EQ(b.bound, 0.0);
    EXPECT_LT(b.log_bound, -700);
}
