#include <cmath>

#include <gtest/gtest.h>

#include "taper/protocols.hpp"

using namespace taper;

namespace {

const ImpulseResponse kG({0.5, 0.05, -0.155, -0.2395});

} // namespace

TEST(MedDose, ClipsAtZero) {
    EXPECT_EQ(med_dose(kG, {}, -1.0, 0.0), 0.0);
}

TEST(MedDose, EmptyHistory) {
    EXPECT_NEAR(med_dose(kG, {}, 0.25, 0.0), 0.5, 1e-15);
}

TEST(MedDose, CarryOver) {
    const std::vector<double> past{1.0};
    EXPECT_NEAR(med_dose(kG, past, 0.25, 0.0), 0.4, 1e-15);
}

TEST(MedDose, RejectsNonPositiveG0) {
    EXPECT_THROW((void)med_dose(ImpulseResponse({0.0, -1.0}), {}, 1.0, 0.0), PolicyError);
}

TEST(NatLowerBound, Modes) {
    EXPECT_EQ(nat_lower_bound(NatBoundMode::monotone, 0.2, 0.0), 0.2);
    EXPECT_NEAR(nat_lower_bound(NatBoundMode::lipschitz, 0.2, 0.1), 0.1, 1e-15);
    EXPECT_THROW((void)nat_lower_bound(NatBoundMode::lipschitz, 0.2, -1.0), PolicyError);
}

TEST(IntegralDose, AboveSetpoint) {
    EXPECT_NEAR(integral_dose(1.0, 0.0, -1.0, 0.5, 2.0), 0.5, 1e-15);
}

TEST(IntegralDose, BelowSetpoint) {
    EXPECT_NEAR(integral_dose(1.0, -2.0, -1.0, 0.5, 2.0), 3.0, 1e-15);
}

TEST(IntegralDose, ClipsAtZero) {
    EXPECT_EQ(integral_dose(0.1, 10.0, 0.0, 0.5, 2.0), 0.0);
}

TEST(IntegralDose, AtSetpointHolds) {
    EXPECT_EQ(integral_dose(0.7, 0.5, 0.25, 0.5, 2.0, 0.25), 0.7);
}

TEST(IntegralDose, PaddingRaisesDose) {
    const double base = integral_dose(1.0, 0.0, -1.0, 0.5, 2.0, 0.0);
    const double padded = integral_dose(1.0, 0.0, -1.0, 0.5, 2.0, 0.5);
    EXPECT_GE(padded, base);
}

TEST(Gains, RuleOfThumb) {
    const auto k = gains_from_rule_of_thumb(5.0, 1.0, 2.0);
    EXPECT_NEAR(k.k_plus, 2.5, 1e-12);
    EXPECT_NEAR(k.k_minus, 5.0, 1e-12);
}

TEST(Gains, FactorsHalfAndOneAndAHalf) {
    const double g0 = 0.8;
    const auto k = gains_from_factors(g0, 0.5, 1.5);
    EXPECT_NEAR(k.k_plus, (2.0 / 3.0) / g0, 1e-12);
    EXPECT_NEAR(k.k_minus, 2.0 / g0, 1e-12);
    EXPECT_TRUE(gains_bracket(k, g0));
}

TEST(Gains, ExactKnowledge) {
    const auto k = gains_from_g0_range(0.5, 0.5);
    EXPECT_EQ(k.k_plus, 2.0);
    EXPECT_EQ(k.k_minus, 2.0);
}

TEST(Gains, InvalidInputs) {
    EXPECT_THROW((void)gains_from_g0_range(0.4, 0.2), PolicyError);
    EXPECT_THROW((void)gains_from_g0_range(0.0, 0.2), PolicyError);
    EXPECT_THROW((void)gains_from_rule_of_thumb(0.0, 1.0, 2.0), PolicyError);
}

TEST(Baselines, Linear) {
    EXPECT_NEAR(baseline_dose(LinearPolicy{1.0, 0.1}, 4), 0.6, 1e-15);
    EXPECT_EQ(baseline_dose(LinearPolicy{1.0, 0.1}, 20), 0.0);
}

TEST(Baselines, Exponential) {
    EXPECT_NEAR(baseline_dose(ExponentialPolicy{1.0, 0.9}, 2), 0.81, 1e-15);
}

TEST(PolicyValidation, RejectsInvertedGains) {
    EXPECT_THROW(validate(TaperPolicy{IntegralPolicy{2.0, 1.0}}), PolicyError);
    EXPECT_NO_THROW(validate(TaperPolicy{IntegralPolicy{1.0, 2.0}}));
    EXPECT_THROW(validate(TaperPolicy{ExponentialPolicy{1.0, 1.5}}), PolicyError);
}

TEST(ConstraintPath, HoldsLastValue) {
    const ConstraintPath p(std::vector<double>{0.0, 1.0});
    EXPECT_EQ(p.at(0), 0.0);
    EXPECT_EQ(p.at(7), 1.0);
    const ConstraintPath c = -1.0;
    EXPECT_TRUE(c.is_constant());
    EXPECT_EQ(c.at(3), -1.0);
}

TEST(GeneralizedMed, MatchesLinear) {
    const auto gr = linear_response(kG, 10.0);
    const std::vector<double> past{1.0, 0.3};
    const double lin = med_dose(kG, past, 0.25, 0.0);
    EXPECT_NEAR(generalized_med_dose(gr, past, 0.25, 0.0, 1e-12), lin, 1e-6);
}

TEST(GeneralizedMed, SaturatingResponse) {
    const GeneralizedResponse gr{
        [](std::size_t k, double u) { return k == 0 ? 1.0 - std::exp(-u) : 0.0; },
        {0.0}, {1.0}, 5.0};
    const double eps = 1e-10;
    const auto r = generalized_med_solve(gr, {}, 0.5, 0.0, eps);
    EXPECT_NEAR(r.dose, std::log(2.0), 1e-9);
    EXPECT_LE(std::abs(r.residual), eps);
    EXPECT_LE(r.iterations, bisection_iteration_bound(gr, eps));
}

TEST(GeneralizedMed, ZeroTarget) {
    const auto gr = linear_response(kG, 10.0);
    EXPECT_EQ(generalized_med_dose(gr, {}, 0.0, 0.0), 0.0);
}

TEST(GeneralizedMed, InfeasibleAtCap) {
    const auto gr = linear_response(kG, 1.0);
    EXPECT_THROW((void)generalized_med_dose(gr, {}, 5.0, 0.0), InfeasibleDose);
}
