// Randomized verification suites over generated LPOP systems.
#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "taper/dynamics.hpp"
#include "taper/io.hpp"
#include "taper/models.hpp"
#include "taper/oracles.hpp"
#include "taper/protocols.hpp"

namespace taper::suites {

using Rng = std::mt19937_64;

[[nodiscard]] inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

[[nodiscard]] inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// =============================================================================
// Random LPOP systems
// =============================================================================

struct RandomSystem {
    std::vector<Mode> modes;
    ImpulseResponse g;
    LpopCertificate cert;
};

/**
 * Draw a sum of geometric modes meeting the three mode conditions (positive
 * modes decay faster than every negative mode, positive coefficient sum, and a
 * sign change inside the horizon). Rejection-samples until certify_lpop accepts.
 */
[[nodiscard]] inline RandomSystem random_lpop(Rng& rng, std::size_t min_tau0 = 1) {
    for (;;) {
        const std::size_t n_pos = uniform_int(rng, 1, 2);
        const std::size_t n_neg = uniform_int(rng, 1, 2);
        std::vector<Mode> modes;
        double pos_sum = 0.0;
        double pos_max = 0.0;
        for (std::size_t i = 0; i < n_pos; ++i) {
            const double c = uniform(rng, 0.3, 2.0);
            const double lam = uniform(rng, 0.0, 0.85);
            modes.push_back({c, lam});
            pos_sum += c;
            pos_max = std::max(pos_max, lam);
        }
        const double neg_total = uniform(rng, 0.05, 0.95) * pos_sum;
        // split the negative mass between the negative modes
        double remaining = neg_total;
        for (std::size_t i = 0; i < n_neg; ++i) {
            const double c = i + 1 == n_neg ? remaining : remaining * uniform(rng, 0.2, 0.8);
            remaining -= c;
            modes.push_back({-c, uniform(rng, std::min(pos_max + 0.02, 0.96), 0.97)});
        }
        ImpulseResponse g;
        try {
            g = build_impulse_response(modes);
        } catch (const ModelError&) {
            continue;
        }
        if (!check_mode_conditions(modes, g).all())
            continue;
        auto cert = certify_lpop(g);
        if (!is_certified(cert))
            continue;
        auto c = std::get<LpopCertificate>(cert);
        if (c.tau0 < min_tau0)
            continue;
        return {std::move(modes), std::move(g), std::move(c)};
    }
}

// =============================================================================
// Reports
// =============================================================================

struct SuiteReport {
    std::string name;
    bool passed = true;
    std::size_t runs = 0;
    std::size_t failures = 0;
    double seconds = 0.0;
    json details = json::object();
    json failed_instances = json::array();

    void fail(json instance) {
        passed = false;
        ++failures;
        if (failed_instances.size() < 5)
            failed_instances.push_back(std::move(instance));
    }
};

[[nodiscard]] inline json to_json(const SuiteReport& r) {
    return {{"suite", r.name},         {"passed", r.passed},
            {"runs", r.runs},          {"failures", r.failures},
            {"seconds", r.seconds},    {"details", r.details},
            {"failed_instances", r.failed_instances}};
}

namespace detail {

class Stopwatch {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

[[nodiscard]] inline std::vector<double> random_progression(Rng& rng, std::size_t steps,
                                                            std::string& label) {
    std::vector<double> nat(steps + 1);
    const double base = uniform(rng, -1.0, 1.0);
    switch (uniform_int(rng, 0, 4)) {
    case 0:
        label = "constant";
        std::fill(nat.begin(), nat.end(), base);
        break;
    case 1: {
        label = "random_walk";
        nat[0] = base;
        for (std::size_t t = 1; t <= steps; ++t)
            nat[t] = nat[t - 1] + uniform(rng, -0.3, 0.3);
        break;
    }
    case 2: {
        label = "adversarial_drift";
        const double l = uniform(rng, 0.0, 0.1);
        for (std::size_t t = 0; t <= steps; ++t)
            nat[t] = base - l * static_cast<double>(t);
        break;
    }
    case 3: {
        label = "shocks";
        nat[0] = base;
        for (std::size_t t = 1; t <= steps; ++t)
            nat[t] = nat[t - 1] - (uniform(rng, 0.0, 1.0) < 0.05 ? uniform(rng, 0.0, 2.0) : 0.0);
        break;
    }
    default: {
        label = "noisy";
        nat[0] = base;
        for (std::size_t t = 1; t <= steps; ++t)
            nat[t] = base + uniform(rng, -0.25, 0.25);
        break;
    }
    }
    return nat;
}

} // namespace detail

// =============================================================================
// Long-term violation bound and per-step inequality
// =============================================================================

struct Theorem2SuiteResult {
    SuiteReport theorem2;
    SuiteReport lemma1;
    SuiteReport corrected; ///< prefix bound including the g(0) u_T term
    double max_abs_wellbeing = 0.0;
};

/**
 * Random certified kernels, random progressions (including steady downward
 * drift and shocks), gains bracketing 1/g(0), random padding, random initial
 * dose, and for half the runs a fixed-dose warmup folded into the frame.
 */
[[nodiscard]] inline Theorem2SuiteResult run_theorem2_suite(std::size_t runs,
                                                            std::uint64_t seed,
                                                            double tol = 1e-8) {
    detail::Stopwatch clock;
    Theorem2SuiteResult out;
    out.theorem2.name = "theorem2_long_term_violation";
    out.lemma1.name = "lemma1_per_step";
    out.corrected.name = "theorem2_with_terminal_dose_term";
    Rng rng(seed);
    for (std::size_t run = 0; run < runs; ++run) {
        const auto sys = random_lpop(rng);
        const double g0 = sys.g(0);
        IntegralPolicy pol;
        pol.k_plus = 1.0 / (uniform(rng, 1.0, 3.0) * g0);
        pol.k_minus = 1.0 / (uniform(rng, 0.3, 1.0) * g0);
        pol.delta = uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : uniform(rng, -0.5, 0.5);
        pol.u_init = uniform(rng, 0.0, 2.0);
        const std::size_t taper = uniform_int(rng, 10, 120);
        const Warmup warm{1.0, uniform(rng, 0.0, 1.0) < 0.5 ? 0 : uniform_int(rng, 1, 60)};

        std::string label;
        const auto nat = detail::random_progression(rng, warm.steps + taper, label);
        ConstraintPath y_min(uniform(rng, -2.0, 1.0));
        if (uniform(rng, 0.0, 1.0) < 0.2) {
            std::vector<double> path(taper + 1);
            path[0] = y_min.at(0);
            for (std::size_t t = 1; t <= taper; ++t)
                path[t] = path[t - 1] + uniform(rng, -0.1, 0.1);
            y_min = ConstraintPath(std::move(path));
            label += "+varying_y_min";
        }

        const auto trace = run_closed_loop(sys.g, pol, NaturalProgression::custom(nat),
                                           NoiseSpec::none(), warm, taper, y_min);
        const auto frame = taper_window(trace, sys.g);
        for (double y : frame.wellbeing)
            out.max_abs_wellbeing = std::max(out.max_abs_wellbeing, std::abs(y));

        const auto t2 = oracles::check_theorem2(frame, pol.delta, pol.k_plus, pol.k_minus, g0, tol);
        const auto l1 = oracles::check_lemma1(frame, sys.g, pol.delta, tol);
        const json instance{{"run", run},       {"progression", label},
                            {"tau0", sys.cert.tau0}, {"g0", g0},
                            {"k_plus", pol.k_plus},  {"k_minus", pol.k_minus},
                            {"delta", pol.delta},    {"warmup_steps", warm.steps},
                            {"taper_steps", taper}};
        ++out.theorem2.runs;
        ++out.lemma1.runs;
        ++out.corrected.runs;
        if (!t2.hypothesis_holds || !t2.corrected_passed) {
            json bad = instance;
            bad["report"] = oracles::to_json(t2);
            out.corrected.fail(std::move(bad));
        }
        if (!t2.hypothesis_holds || !t2.passed) {
            json bad = instance;
            bad["report"] = oracles::to_json(t2);
            out.theorem2.fail(std::move(bad));
        }
        if (!l1.passed) {
            json bad = instance;
            bad["report"] = oracles::to_json(l1);
            out.lemma1.fail(std::move(bad));
        }
    }
    out.theorem2.seconds = out.lemma1.seconds = out.corrected.seconds = clock.seconds();
    out.corrected.details = {{"tolerance", tol}};
    out.theorem2.details = {{"tolerance", tol}, {"max_abs_wellbeing", out.max_abs_wellbeing}};
    out.lemma1.details = {{"tolerance", tol}};
    return out;
}

// =============================================================================
// Monotone finite-time taper on coarsened systems
// =============================================================================

[[nodiscard]] inline SuiteReport run_prop2_suite(std::size_t runs, std::uint64_t seed,
                                                 double tol = 1e-8) {
    detail::Stopwatch clock;
    SuiteReport rep;
    rep.name = "prop2_monotone_finite_time";
    Rng rng(seed);
    std::size_t coarsened = 0;
    std::size_t max_bound = 0;
    for (std::size_t run = 0; run < runs; ++run) {
        const auto sys = random_lpop(rng, 2);
        const auto g = coarsen(sys.g, sys.cert.tau0);
        ++coarsened;
        const double g0 = g(0);
        const double u0 = uniform(rng, 0.5, 2.0);
        const double k_plus = uniform(rng, 0.3, 1.0) / g0;
        const double k_minus = k_plus * uniform(rng, 1.0, 3.0);
        const double delta =
            std::max(uniform(rng, 0.05, 1.0), u0 / (k_plus * std::log(200.0)));
        const std::size_t bound = oracles::prop2_zero_bound(u0, k_plus, delta);
        max_bound = std::max(max_bound, bound);
        const std::size_t steps = bound + 20;

        std::vector<double> nat(steps + 1);
        nat[0] = uniform(rng, -1.0, 1.0);
        nat[1] = nat[0] + uniform(rng, -0.5, 0.5);
        for (std::size_t t = 1; t < steps; ++t) {
            const double slack = uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : uniform(rng, 0.0, 0.2);
            nat[t + 1] = nat[t] - g(t) * u0 + delta / static_cast<double>(t) + slack;
        }
        const double y1 = g0 * u0 + nat[1];
        const double y_min = y1 - uniform(rng, 0.0, 1.0);

        const auto frame =
            oracles::simulate_integral_from(g, nat, y_min, u0, k_plus, k_minus, 0.0);
        const auto r = oracles::check_prop2(frame, g, u0, k_plus, delta, y_min, tol);
        ++rep.runs;
        if (!r.precondition_ok || !r.conclusions_hold())
            rep.fail({{"run", run},
                      {"tau0_original", sys.cert.tau0},
                      {"u0", u0},
                      {"k_plus", k_plus},
                      {"delta", delta},
                      {"report", oracles::to_json(r)}});
    }
    rep.seconds = clock.seconds();
    rep.details = {{"coarsened_systems", coarsened}, {"max_zero_bound", max_bound},
                   {"tolerance", tol}};
    return rep;
}

// =============================================================================
// Greedy optimality against exhaustive search
// =============================================================================

struct Theorem1Options {
    std::size_t max_horizon = 4;
    oracles::DoseGrid grid{};
    double feas_tol = 1e-8;
};

[[nodiscard]] inline SuiteReport run_theorem1_suite(std::size_t runs, std::uint64_t seed,
                                                    Theorem1Options opt = {}) {
    detail::Stopwatch clock;
    SuiteReport rep;
    rep.name = "theorem1_med_vs_brute_force";
    Rng rng(seed);
    std::size_t resampled = 0;
    std::size_t exchange_checks = 0;
    std::size_t strict_optimal = 0;
    double worst_gap = -std::numeric_limits<double>::infinity();
    while (rep.runs < runs) {
        const auto sys = random_lpop(rng);
        const std::size_t horizon = uniform_int(rng, 1, opt.max_horizon);
        std::vector<double> nat(horizon + 1, 0.0);
        for (std::size_t t = 1; t <= horizon; ++t)
            nat[t] = nat[t - 1] + uniform(rng, -1.0, 0.5);
        const ConstraintPath y_min(uniform(rng, -1.5, 0.5));

        std::vector<double> med;
        std::vector<double> y{nat[0]};
        for (std::size_t t = 0; t < horizon; ++t) {
            med.push_back(med_dose(sys.g, med, y_min.at(t + 1), nat[t + 1]));
            y.push_back(simulate_step(sys.g, med, nat[t + 1]));
        }
        if (*std::max_element(med.begin(), med.end()) > opt.grid.max_dose) {
            ++resampled;
            continue;
        }
        const auto best = oracles::brute_force_min_dose(sys.g, nat, y_min, horizon, opt.grid);
        if (!best) {
            ++resampled;
            continue;
        }
        ++rep.runs;
        double med_cum = 0.0;
        for (double u : med)
            med_cum += u;
        const double slack = static_cast<double>(horizon) * opt.grid.resolution *
                             std::max(1.0, 1.0 / sys.g(0));
        bool safe = true;
        for (std::size_t t = 1; t <= horizon; ++t)
            safe = safe && y[t] >= y_min.at(t) - opt.feas_tol;
        worst_gap = std::max(worst_gap, med_cum - best->cum_dose);
        if (med_cum <= best->cum_dose + 1e-9)
            ++strict_optimal;

        // exchange step on the oracle schedule
        bool exchange_ok = true;
        for (std::size_t t0 = 0; t0 + 1 < horizon; ++t0) {
            if (best->doses[t0] < opt.grid.resolution)
                continue;
            for (double alpha : {sys.cert.alpha_lo, 0.5 * (sys.cert.alpha_lo + sys.cert.alpha_hi)}) {
                ++exchange_checks;
                const double gain = oracles::exchange_gain(sys.g, best->doses, nat, t0,
                                                           opt.grid.resolution, alpha);
                exchange_ok = exchange_ok && gain >= -1e-12;
            }
        }

        if (!safe || med_cum > best->cum_dose + slack || !exchange_ok)
            rep.fail({{"horizon", horizon},
                      {"g0", sys.g(0)},
                      {"tau0", sys.cert.tau0},
                      {"med", med},
                      {"oracle", best->doses},
                      {"safe", safe},
                      {"exchange_ok", exchange_ok}});
    }
    rep.seconds = clock.seconds();
    rep.details = {{"resampled", resampled},
                   {"exchange_checks", exchange_checks},
                   {"med_at_or_below_oracle", strict_optimal},
                   {"worst_med_minus_oracle", worst_gap},
                   {"grid_resolution", opt.grid.resolution},
                   {"grid_max_dose", opt.grid.max_dose}};
    return rep;
}

// =============================================================================
// Generalized MED bisection
// =============================================================================

struct NonlinearHead {
    std::string name;
    std::function<double(double)> value;
    double slope_lo;
    double slope_hi;
};

[[nodiscard]] inline NonlinearHead random_head(Rng& rng, double cap) {
    const double a = uniform(rng, 0.2, 3.0);
    switch (uniform_int(rng, 0, 2)) {
    case 0: {
        const double b = uniform(rng, 0.3, 2.0);
        return {"saturating_exp", [a, b](double u) { return a * (1.0 - std::exp(-b * u)); },
                a * b * std::exp(-b * cap), a * b};
    }
    case 1:
        return {"hyperbolic", [a](double u) { return a * u / (1.0 + u); },
                a / ((1.0 + cap) * (1.0 + cap)), a};
    default: {
        const double b = uniform(rng, 0.01, 0.5);
        return {"cubic", [a, b](double u) { return a * u + b * u * u * u; }, a,
                a + 3.0 * b * cap * cap};
    }
    }
}

[[nodiscard]] inline SuiteReport run_generalized_med_suite(std::size_t runs, std::uint64_t seed,
                                                           double eps = 1e-9) {
    detail::Stopwatch clock;
    SuiteReport rep;
    rep.name = "generalized_med_bisection";
    Rng rng(seed);
    double worst_linear = 0.0;
    std::size_t worst_iter_slack = std::numeric_limits<std::size_t>::max();

    for (std::size_t run = 0; run < runs; ++run) {
        // linear case: must match the closed form
        const auto sys = random_lpop(rng);
        std::vector<double> hist(uniform_int(rng, 0, 10));
        for (auto& u : hist)
            u = uniform(rng, 0.0, 2.0);
        const double y_min = uniform(rng, -1.0, 1.0);
        const double lb = uniform(rng, -2.0, 0.5);
        const double closed = med_dose(sys.g, hist, y_min, lb);
        const auto lin = linear_response(sys.g, std::max(10.0, 2.0 * closed + 1.0));
        const double bis = generalized_med_dose(lin, hist, y_min, lb, eps);
        worst_linear = std::max(worst_linear, std::abs(bis - closed));
        ++rep.runs;
        if (std::abs(bis - closed) > 1e-6)
            rep.fail({{"case", "linear"}, {"closed_form", closed}, {"bisection", bis}});

        // nonlinear monotone head with linear tail lags
        const double cap = uniform(rng, 1.0, 5.0);
        const auto head = random_head(rng, cap);
        GeneralizedResponse gr;
        gr.dose_cap = cap;
        gr.du_lo = {head.slope_lo};
        gr.du_hi = {head.slope_hi};
        for (std::size_t k = 1; k < sys.g.horizon(); ++k) {
            gr.du_lo.push_back(sys.g(k));
            gr.du_hi.push_back(sys.g(k));
        }
        gr.eval = [head, g = sys.g](std::size_t k, double u) {
            return k == 0 ? head.value(u) : g(k) * u;
        };
        const double target = uniform(rng, 0.01, 0.99) * head.value(cap);
        // choose y_min so that the bisection target is exactly `target`
        const double carry = gr.convolve(hist, 1);
        const double y_min_nl = target + lb + carry;
        const auto res = generalized_med_solve(gr, hist, y_min_nl, lb, eps);
        const std::size_t bound = bisection_iteration_bound(gr, eps);
        worst_iter_slack = std::min(worst_iter_slack, bound >= res.iterations
                                                          ? bound - res.iterations
                                                          : std::size_t{0});
        ++rep.runs;
        if (std::abs(res.residual) > eps || res.iterations > bound)
            rep.fail({{"case", head.name},
                      {"residual", res.residual},
                      {"iterations", res.iterations},
                      {"bound", bound}});
    }
    rep.seconds = clock.seconds();
    rep.details = {{"eps", eps},
                   {"worst_linear_abs_diff", worst_linear},
                   {"min_iteration_headroom", worst_iter_slack}};
    return rep;
}

} // namespace taper::suites
