#include <gtest/gtest.h>

#include "taper/oracles.hpp"
#include "taper/suites.hpp"

using namespace taper;
using namespace taper::oracles;

namespace {

const ImpulseResponse kG({0.5, 0.05, -0.155, -0.2395});

} // namespace

TEST(BruteForce, SingleStep) {
    const ImpulseResponse g({0.5, -0.1});
    const std::vector<double> nat{0.0, 0.0};
    const auto r = brute_force_min_dose(g, nat, 0.25, 1, DoseGrid{2.0, 0.1});
    ASSERT_TRUE(r.has_value());
    ASSERT_EQ(r->doses.size(), 1u);
    EXPECT_NEAR(r->doses[0], 0.5, 1e-12);
    EXPECT_NEAR(r->cum_dose, 0.5, 1e-12);
}

TEST(BruteForce, ZeroScheduleWhenFeasible) {
    const std::vector<double> nat{0.0, 0.1, 0.2, 0.3};
    const auto r = brute_force_min_dose(kG, nat, -1.0, 3, DoseGrid{1.0, 0.05});
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->cum_dose, 0.0);
    for (double u : r->doses)
        EXPECT_EQ(u, 0.0);
}

TEST(BruteForce, InfeasibleReturnsNothing) {
    const std::vector<double> nat{0.0, -10.0};
    EXPECT_FALSE(brute_force_min_dose(kG, nat, 0.0, 1, DoseGrid{1.0, 0.1}).has_value());
}

TEST(BruteForce, HorizonLimits) {
    const std::vector<double> nat(10, 0.0);
    EXPECT_THROW((void)brute_force_min_dose(kG, nat, 0.0, 0, DoseGrid{}), ModelError);
    EXPECT_THROW((void)brute_force_min_dose(kG, nat, 0.0, 7, DoseGrid{}), ModelError);
}

TEST(BruteForce, MedIsNoWorse) {
    const std::vector<double> nat{0.0, -0.3, -0.5, -0.6, -0.8};
    const double y_min = -0.2;
    const auto best = brute_force_min_dose(kG, nat, y_min, 4, DoseGrid{1.5, 0.05});
    ASSERT_TRUE(best.has_value());
    std::vector<double> med;
    double cum = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
        med.push_back(med_dose(kG, med, y_min, nat[t + 1]));
        cum += med.back();
    }
    EXPECT_LE(cum, best->cum_dose + 1e-12);
}

TEST(Prop2, ZeroBound) {
    EXPECT_EQ(prop2_zero_bound(1.0, 1.0, 1.0), 3u);
    EXPECT_EQ(prop2_zero_bound(1.0, 1.0, 1e6), 2u);
}

TEST(Prop2, CompliantFrame) {
    const ImpulseResponse g({1.0, -0.3, -0.1});
    const double y_min = 0.0;
    const double u0 = 1.0;
    const double delta = 0.5;
    // nature rises faster than the drift requirement
    std::vector<double> nat(40);
    nat[0] = 0.0;
    for (std::size_t t = 1; t < nat.size(); ++t)
        nat[t] = 0.2 + 1.0 * static_cast<double>(t);
    const auto frame = simulate_integral_from(g, nat, y_min, u0, 1.0, 1.0, delta);
    const auto r = check_prop2(frame, g, u0, 1.0, delta, y_min);
    EXPECT_TRUE(r.precondition_ok) << r.precondition_failure;
    EXPECT_TRUE(r.conclusions_hold());
}

TEST(Theorem2, MarginsConstantSetpoint) {
    const std::vector<double> y{1.0, 0.0, 2.0};
    const std::vector<double> ymin{0.0};
    const auto m = theorem2_margins(y, ymin, 0.0);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_DOUBLE_EQ(m[0], 0.0 + 1.0);
    EXPECT_DOUBLE_EQ(m[1], 1.0 + 0.5);
}

TEST(Theorem2, StatedBoundCanFailWhileCorrectedHolds) {
    // u_0 = 0 and a sudden drop in nature: y_1 misses the bound at T = 1,
    // while the next dose K- * 10 restores it once g(0) u_1 is counted
    const ImpulseResponse g({1.0, -0.5});
    const double y_min = 0.0;
    const std::vector<double> nat{y_min + 0.01, y_min - 10.0, y_min - 10.0};
    const auto frame = simulate_integral_from(g, nat, y_min, 0.0, 0.5, 2.0);
    const auto r = check_theorem2(frame, 0.0, 0.5, 2.0, g(0));
    EXPECT_TRUE(r.hypothesis_holds);
    EXPECT_FALSE(r.passed);
    ASSERT_TRUE(r.first_violation.has_value());
    EXPECT_EQ(*r.first_violation, 1u);
    EXPECT_TRUE(r.corrected_passed);
    EXPECT_TRUE(check_lemma1(frame, g, 0.0).passed);
}

TEST(Lemma1, ConstantInputs) {
    // constant nature and doses: reduces to y_{t+1} >= y_min
    const ImpulseResponse g({0.5, -0.2});
    SimulationTrace tr;
    tr.doses = {0.0, 0.0, 0.0};
    tr.wellbeing = {1.0, 1.0, 1.0, 1.0};
    tr.nat = tr.wellbeing;
    tr.y_min = {0.5};
    EXPECT_TRUE(check_lemma1(tr, g, 0.0).passed);
    tr.y_min = {1.5};
    EXPECT_FALSE(check_lemma1(tr, g, 0.0).passed);
}

TEST(Exchange, CertifiedAlphaDoesNotHurt) {
    const auto cert = std::get<LpopCertificate>(certify_lpop(kG));
    const std::vector<double> sched{1.0, 0.5, 0.2, 0.0};
    const std::vector<double> nat(5, 0.0);
    for (double a : {cert.alpha_lo, 0.5 * (cert.alpha_lo + cert.alpha_hi), cert.alpha_hi})
        EXPECT_GE(exchange_gain(kG, sched, nat, 0, 0.1, a), -1e-12) << a;
}

TEST(Suites, SmallRunsAreDeterministic) {
    const auto a = suites::run_theorem2_suite(20, 5);
    const auto b = suites::run_theorem2_suite(20, 5);
    EXPECT_EQ(a.theorem2.failures, b.theorem2.failures);
    EXPECT_EQ(suites::to_json(a.lemma1)["details"], suites::to_json(b.lemma1)["details"]);
    EXPECT_TRUE(a.lemma1.passed);
    EXPECT_TRUE(a.corrected.passed);
}

TEST(Suites, OracleSuitesPass) {
    EXPECT_TRUE(suites::run_prop2_suite(20, 11).passed);
    EXPECT_TRUE(suites::run_theorem1_suite(30, 12).passed);
    EXPECT_TRUE(suites::run_generalized_med_suite(20, 13).passed);
}
