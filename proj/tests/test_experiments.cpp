#include <algorithm>

#include <gtest/gtest.h>

#include "taper/experiments.hpp"

using namespace taper;
using namespace taper::experiments;

namespace {

const ExperimentSetup& setup() {
    static const ExperimentSetup s = load_setup();
    return s;
}

CurvePoint point(double dose, double viol, double se = 0.0) {
    CurvePoint p;
    p.mean_dose = dose;
    p.mean_violation = viol;
    p.se_dose = se;
    p.se_violation = se;
    return p;
}

} // namespace

TEST(Canonical, FourSystemsCertify) {
    ASSERT_EQ(setup().systems.size(), 4u);
    for (const auto& sys : setup().systems) {
        const auto g = sys.response(setup().tail_tol);
        EXPECT_TRUE(check_mode_conditions(sys.modes, g).all()) << sys.id;
        EXPECT_TRUE(is_certified(certify_lpop(g))) << sys.id;
    }
    EXPECT_EQ(setup().sha256.size(), 64u);
}

TEST(Canonical, TaperLengthsAndRanges) {
    EXPECT_EQ(setup().system("A").taper_steps, 180u);
    EXPECT_EQ(setup().system("B").taper_steps, 120u);
    EXPECT_EQ(setup().system("C").taper_steps, 90u);
    EXPECT_EQ(setup().system("D").taper_steps, 15u);
    EXPECT_EQ(setup().system("D").y_min_lo, -4.25);
    EXPECT_THROW((void)setup().system("Z"), ParseError);
}

TEST(Canonical, DeepestWithdrawalIsD) {
    double deepest = 0.0;
    std::string who;
    for (const auto& sys : setup().systems) {
        const double t = withdrawal_trough(sys.response(setup().tail_tol));
        if (t < deepest) {
            deepest = t;
            who = sys.id;
        }
    }
    EXPECT_EQ(who, "D");
}

TEST(Canonical, AllostasisPeaksThenDeclines) {
    for (const auto& sys : setup().systems) {
        const auto y = allostasis_curve(sys.response(setup().tail_tol), 1.0, 400);
        const auto peak = std::max_element(y.begin(), y.end());
        EXPECT_GT(*peak, 0.0) << sys.id;
        EXPECT_LT(y.back(), *peak) << sys.id;
    }
}

TEST(Seeding, UnitDrawIgnoresSweepValues) {
    const auto& a = setup().system("A");
    const auto d1 = draw_unit(a, 7, 3);
    const auto d2 = draw_unit(a, 7, 3);
    EXPECT_EQ(d1.y_min, d2.y_min);
    EXPECT_EQ(d1.noise_seed, d2.noise_seed);
    EXPECT_NE(draw_unit(a, 7, 4).noise_seed, d1.noise_seed);
    EXPECT_NE(draw_unit(setup().system("B"), 7, 3).noise_seed, d1.noise_seed);
    EXPECT_GE(d1.y_min, a.y_min_lo);
    EXPECT_LE(d1.y_min, a.y_min_hi);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
    const auto& sys = setup().system("D");
    SweepContext one{&setup()};
    SweepContext many{&setup()};
    many.jobs = 4;
    const SweepSpec spec{Family::integral, {0.0, 0.5}, 20, 99};
    const auto a = run_sweep(sys, spec, one);
    const auto b = run_sweep(sys, spec, many);
    EXPECT_EQ(long_csv_rows(a), long_csv_rows(b));
    EXPECT_EQ(summary_csv_rows(a), summary_csv_rows(b));
}

TEST(Sweep, AddingValuesKeepsUnits) {
    const auto& sys = setup().system("D");
    SweepContext ctx{&setup()};
    const auto a = run_sweep(sys, {Family::linear, {0.1}, 10, 5}, ctx);
    const auto b = run_sweep(sys, {Family::linear, {0.05, 0.1}, 10, 5}, ctx);
    EXPECT_EQ(long_csv_rows(a), long_csv_rows({b[1]}));
}

TEST(Sweep, BaselineMonotoneInRate) {
    const auto& sys = setup().system("C");
    SweepContext ctx{&setup()};
    auto rates = default_linear_rates(sys.taper_steps, 5);
    std::sort(rates.begin(), rates.end());
    const auto curve = run_sweep(sys, {Family::linear, rates, 50, 3}, ctx);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        EXPECT_LE(curve[i].mean_dose, curve[i - 1].mean_dose + 1e-12);
        const double se = std::hypot(curve[i].se_violation, curve[i - 1].se_violation);
        EXPECT_GE(curve[i].mean_violation, curve[i - 1].mean_violation - 2.0 * se);
    }
}

TEST(Sweep, PaddingTradesDoseForViolation) {
    const auto& sys = setup().system("B");
    SweepContext ctx{&setup()};
    const auto curve = run_sweep(sys, {Family::integral, {-1.0, 1.0}, 50, 3}, ctx);
    EXPECT_GT(curve[1].mean_dose, curve[0].mean_dose);
    EXPECT_LT(curve[1].mean_violation, curve[0].mean_violation);
}

TEST(Sweep, IntegralTracesKeepLemma) {
    const auto& sys = setup().system("A");
    SweepContext ctx{&setup()};
    const auto curve = run_sweep(sys, {Family::integral, reproduction_deltas(), 20, 1}, ctx);
    for (const auto& p : curve) {
        EXPECT_EQ(p.lemma_failures, 0u) << p.param;
        EXPECT_EQ(p.corrected_bound_failures, 0u) << p.param;
    }
}

TEST(Grids, Defaults) {
    const auto d = default_deltas();
    ASSERT_EQ(d.size(), 9u);
    EXPECT_EQ(d.front(), -1.0);
    EXPECT_EQ(d.back(), 1.0);
    const auto lens = taper_lengths(100, 5);
    EXPECT_NEAR(lens.front(), 25.0, 1e-9);
    EXPECT_NEAR(lens.back(), 400.0, 1e-9);
    for (double r : default_exponential_rates(100, 5)) {
        EXPECT_GT(r, 0.0);
        EXPECT_LT(r, 1.0);
    }
}

TEST(Dominance, BaselineAboveFrontierPasses) {
    const std::vector<CurvePoint> integral{point(1.0, 0.0), point(0.5, 0.5), point(0.2, 1.0)};
    EXPECT_TRUE(baseline_dominated(integral, {point(0.8, 0.5), point(1.2, 0.1)}).passed);
    EXPECT_FALSE(baseline_dominated(integral, {point(0.1, 0.5)}).passed);
}

TEST(Dominance, NoiseBandAbsorbsSmallGaps) {
    const std::vector<CurvePoint> integral{point(1.0, 0.0, 0.05), point(0.5, 0.5, 0.05)};
    EXPECT_TRUE(baseline_dominated(integral, {point(0.45, 0.5, 0.05)}).passed);
}

TEST(Dominance, MedPoint) {
    const std::vector<CurvePoint> integral{point(1.0, 0.0), point(0.5, 0.5)};
    EXPECT_TRUE(med_dominates(point(0.4, 0.0), integral).passed);
    EXPECT_FALSE(med_dominates(point(1.5, 0.0), integral).passed);
}

TEST(Ablation, InvertedPairHasNoCurve) {
    const auto& sys = setup().system("D");
    SweepContext ctx{&setup()};
    const auto curves =
        run_gain_ablation(sys, {{0.5, 1.5}, {1.5, 0.5}}, {0.0, 0.5}, 5, 1, ctx);
    ASSERT_EQ(curves.size(), 2u);
    EXPECT_EQ(curves[0].points.size(), 2u);
    EXPECT_TRUE(curves[1].points.empty());
    EXPECT_TRUE(curves[0].pair.compliant());
}

TEST(Manifest, RecordsProvenance) {
    const auto m = manifest(setup(), 42, {{"command", "sweep"}});
    EXPECT_EQ(m["seed"], 42);
    EXPECT_EQ(m["constants_sha256"], setup().sha256);
    EXPECT_EQ(m["version"], kVersion);
    EXPECT_EQ(m["command"], "sweep");
}
