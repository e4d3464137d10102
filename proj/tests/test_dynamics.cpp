#include <gtest/gtest.h>

#include "taper/dynamics.hpp"

using namespace taper;

namespace {

const ImpulseResponse kG({0.5, 0.05, -0.155, -0.2395});

SimulationTrace manual_trace(std::vector<double> u, std::vector<double> y, double y_min) {
    SimulationTrace tr;
    tr.doses = std::move(u);
    tr.wellbeing = std::move(y);
    tr.nat.assign(tr.wellbeing.size(), 0.0);
    tr.y_min = {y_min};
    return tr;
}

} // namespace

TEST(SimulateStep, NoDose) {
    EXPECT_EQ(simulate_step(kG, {}, 0.3), 0.3);
}

TEST(SimulateStep, Convolution) {
    const std::vector<double> one{1.0};
    const std::vector<double> two{1.0, 1.0};
    EXPECT_NEAR(simulate_step(kG, one, 0.0), 0.5, 1e-15);
    EXPECT_NEAR(simulate_step(kG, two, 0.0), 0.55, 1e-15);
}

TEST(ClosedLoop, FixedDose) {
    const auto tr = run_closed_loop(kG, FixedPolicy{1.0}, NaturalProgression::constant(0.0),
                                    NoiseSpec::none(), {}, 3, 0.0);
    ASSERT_EQ(tr.wellbeing.size(), 4u);
    EXPECT_EQ(tr.wellbeing[0], 0.0);
    EXPECT_NEAR(tr.wellbeing[1], 0.5, 1e-15);
    EXPECT_NEAR(tr.wellbeing[2], 0.55, 1e-15);
    EXPECT_NEAR(tr.wellbeing[3], 0.395, 1e-15);
}

TEST(ClosedLoop, ZeroDoseFollowsNature) {
    const auto tr = run_closed_loop(kG, FixedPolicy{0.0}, NaturalProgression::constant(1.7),
                                    NoiseSpec::none(), {}, 5, 0.0);
    for (double y : tr.wellbeing)
        EXPECT_EQ(y, 1.7);
}

TEST(ClosedLoop, RecoverNatural) {
    const auto tr = run_closed_loop(kG, LinearPolicy{1.0, 0.1}, NaturalProgression::lipschitz(0.0, 0.01),
                                    NoiseSpec::uniform(0.25, 7), {1.0, 10}, 20, -1.0);
    const auto nat = recover_natural_progression(tr, kG);
    ASSERT_EQ(nat.size(), tr.nat.size());
    for (std::size_t t = 0; t < nat.size(); ++t)
        EXPECT_NEAR(nat[t], tr.nat[t], 1e-12);
}

TEST(RecoverNatural, ZeroDosesAndSingleDose) {
    const std::vector<double> y{0.3, -0.2};
    const std::vector<double> zero{0.0};
    EXPECT_EQ(recover_natural_progression(y, zero, kG), y);
    const std::vector<double> y1{0.0, 0.7};
    const std::vector<double> u1{1.0};
    EXPECT_NEAR(recover_natural_progression(y1, u1, kG)[1], 0.2, 1e-15);
    EXPECT_THROW((void)recover_natural_progression(y1, std::vector<double>{}, kG), ModelError);
}

TEST(ClosedLoop, MedMeetsConstraint) {
    const auto tr = run_closed_loop(kG, MedPolicy{}, NaturalProgression::lipschitz(0.0, 0.05),
                                    NoiseSpec::uniform(0.2, 3), {1.0, 5}, 30, -0.5);
    for (std::size_t t = tr.warmup_len + 1; t < tr.wellbeing.size(); ++t)
        EXPECT_GE(tr.wellbeing[t], -0.5 - 1e-12) << t;
}

TEST(ClosedLoop, DeterministicNoise) {
    const IntegralPolicy p{1.0, 3.0, 0.1};
    auto run = [&] {
        return run_closed_loop(kG, p, NaturalProgression::constant(0.0),
                               NoiseSpec::uniform(0.25, 42), {1.0, 10}, 40, -1.0);
    };
    EXPECT_EQ(run().wellbeing, run().wellbeing);
}

TEST(ClosedLoop, DoseCapRecordsEvents) {
    IntegralPolicy p{1.0, 3.0, 0.0};
    p.dose_cap = 1.0;
    const auto tr = run_closed_loop(kG, p, NaturalProgression::lipschitz(0.0, 0.2),
                                    NoiseSpec::none(), {1.0, 3}, 20, 0.0);
    EXPECT_FALSE(tr.cap_events.empty());
    for (double u : tr.taper_doses())
        EXPECT_LE(u, 1.0);
}

TEST(ClosedLoop, ZeroTaperWindow) {
    const auto tr = run_closed_loop(kG, MedPolicy{}, NaturalProgression::constant(0.0),
                                    NoiseSpec::none(), {1.0, 10}, 0, 0.0);
    EXPECT_EQ(tr.taper_len(), 0u);
    EXPECT_TRUE(compute_metrics(tr).warmup_only);
}

TEST(Metrics, ExactConstraint) {
    const auto m = compute_metrics(manual_trace({0.2, 0.2}, {-1.0, -1.0, -1.0}, -1.0));
    EXPECT_EQ(m.avg_cum_violation, 0.0);
}

TEST(Metrics, Violation) {
    const auto m = compute_metrics(manual_trace({0.0, 0.0}, {0.0, -2.0, -2.0}, -1.0));
    EXPECT_DOUBLE_EQ(m.avg_cum_violation, 1.0);
}

TEST(Metrics, DoseAndTaperTime) {
    const auto m = compute_metrics(manual_trace({1.0, 0.5, 0.0, 0.0}, {0, 0, 0, 0, 0}, -1.0));
    EXPECT_DOUBLE_EQ(m.avg_cum_dose, 0.375);
    EXPECT_TRUE(m.fully_tapered);
    ASSERT_TRUE(m.taper_time.has_value());
    EXPECT_EQ(*m.taper_time, 2u);
}

TEST(Metrics, NotTapered) {
    const auto m = compute_metrics(manual_trace({1.0, 0.5}, {0, 0, 0}, -1.0));
    EXPECT_FALSE(m.fully_tapered);
    EXPECT_FALSE(m.taper_time.has_value());
}

TEST(TaperWindow, RebasesAtTaperStart) {
    const auto tr = run_closed_loop(kG, LinearPolicy{1.0, 0.2}, NaturalProgression::constant(0.0),
                                    NoiseSpec::none(), {1.0, 8}, 10, -1.0);
    const auto w = taper_window(tr, kG);
    EXPECT_EQ(w.doses.size(), 10u);
    EXPECT_EQ(w.wellbeing.front(), tr.wellbeing[8]);
    for (std::size_t t = 1; t < w.wellbeing.size(); ++t)
        EXPECT_NEAR(simulate_step(kG, std::span<const double>(w.doses).first(t), w.nat[t]),
                    w.wellbeing[t], 1e-12);
}

TEST(Noise, ValidatesWidth) {
    EXPECT_THROW((void)NoiseSpec::uniform(-1.0, 1).draws(3), ModelError);
    const auto d = NoiseSpec::uniform(0.25, 9).draws(100);
    EXPECT_EQ(d[0], 0.0);
    for (double x : d)
        EXPECT_LE(std::abs(x), 0.25);
}
