// Population experiments on the canonical systems: trade-off curves, gain
// ablation, tapered fraction, dominance checks, CSV and manifest output.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "taper/dynamics.hpp"
#include "taper/hash.hpp"
#include "taper/io.hpp"
#include "taper/models.hpp"
#include "taper/oracles.hpp"
#include "taper/protocols.hpp"

#ifndef TAPER_CANONICAL_PATH
#define TAPER_CANONICAL_PATH "systems/canonical.json"
#endif

#ifndef TAPER_VERSION
#define TAPER_VERSION "0.0.0"
#endif

namespace taper::experiments {

inline constexpr const char* kDefaultSystemsPath = TAPER_CANONICAL_PATH;
inline constexpr const char* kVersion = TAPER_VERSION;
inline constexpr std::uint64_t kDefaultSeed = 20240601;

// =============================================================================
// Canonical systems
// =============================================================================

struct CanonicalSystem {
    std::string id;
    std::string description;
    std::vector<Mode> modes;
    double y_min_lo = 0.0;
    double y_min_hi = 0.0;
    std::size_t taper_steps = 0;
    double nat_base = 0.0;

    [[nodiscard]] ImpulseResponse response(double tail_tol = kDefaultTailTolerance) const {
        return build_impulse_response(modes, tail_tol);
    }
};

/// Shared experiment constants from the systems file.
struct ExperimentSetup {
    std::vector<CanonicalSystem> systems;
    Warmup warmup{1.0, 60};
    double noise_half_width = 0.25;
    std::size_t population = 100;
    double tail_tol = kDefaultTailTolerance;
    std::string path;
    std::string sha256;

    [[nodiscard]] const CanonicalSystem& system(const std::string& id) const {
        for (const auto& s : systems)
            if (s.id == id)
                return s;
        throw ParseError(path, "unknown system id '" + id + "'");
    }
};

[[nodiscard]] inline ExperimentSetup setup_from_json(const json& j, const std::string& ctx) {
    ExperimentSetup s;
    const auto& w = detail::field(j, "warmup", ctx);
    s.warmup.dose = detail::number(w, "dose", ctx + ".warmup");
    s.warmup.steps = static_cast<std::size_t>(detail::number(w, "steps", ctx + ".warmup"));
    s.noise_half_width = detail::number(j, "noise_half_width", ctx);
    s.population = static_cast<std::size_t>(detail::number(j, "population", ctx));
    s.tail_tol = detail::number_or(j, "tail_tol", kDefaultTailTolerance, ctx);
    const auto& arr = detail::field(j, "systems", ctx);
    if (!arr.is_array() || arr.empty())
        throw ParseError(ctx + ".systems", "expected a nonempty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string sctx = ctx + ".systems[" + std::to_string(i) + "]";
        CanonicalSystem c;
        c.id = detail::string_field(arr[i], "id", sctx);
        c.description = arr[i].value("description", "");
        c.modes = system_spec_from_json(arr[i], sctx).modes;
        if (c.modes.empty())
            throw ParseError(sctx, "canonical systems are given by modes");
        const auto& ym = detail::field(arr[i], "y_min", sctx);
        c.y_min_lo = detail::number(ym, "lo", sctx + ".y_min");
        c.y_min_hi = detail::number(ym, "hi", sctx + ".y_min");
        if (!(c.y_min_lo <= c.y_min_hi))
            throw ParseError(sctx + ".y_min", "lo must not exceed hi");
        c.taper_steps = static_cast<std::size_t>(detail::number(arr[i], "taper_steps", sctx));
        c.nat_base = detail::number_or(arr[i], "nat_base", 0.0, sctx);
        s.systems.push_back(std::move(c));
    }
    return s;
}

[[nodiscard]] inline ExperimentSetup load_setup(const std::string& path = kDefaultSystemsPath) {
    const std::string text = read_file(path);
    auto s = setup_from_json(parse_json(text, path), path);
    s.path = path;
    s.sha256 = sha256_hex(text);
    return s;
}

/// Most negative point of the step response to a single unit dose.
[[nodiscard]] inline double withdrawal_trough(const ImpulseResponse& g) {
    double cum = 0.0;
    double lo = 0.0;
    for (double v : g.values()) {
        cum += v;
        lo = std::min(lo, cum);
    }
    return lo;
}

/// Well-being under a constant dose from a zero natural progression (allostasis).
[[nodiscard]] inline std::vector<double> allostasis_curve(const ImpulseResponse& g, double dose,
                                                          std::size_t steps) {
    std::vector<double> y{0.0};
    double cum = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        cum += g(t);
        y.push_back(dose * cum);
    }
    return y;
}

// =============================================================================
// Per-unit seeding
// =============================================================================

struct UnitDraw {
    double y_min;
    std::uint64_t noise_seed;
};

/// Unit parameters depend only on (seed, system, unit), never on sweep values.
[[nodiscard]] inline UnitDraw draw_unit(const CanonicalSystem& sys, std::uint64_t seed,
                                        std::size_t unit) {
    std::uint32_t sys_tag = 0;
    for (char ch : sys.id)
        sys_tag = sys_tag * 131u + static_cast<unsigned char>(ch);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      sys_tag, static_cast<std::uint32_t>(unit),
                      static_cast<std::uint32_t>(static_cast<std::uint64_t>(unit) >> 32)};
    std::mt19937_64 rng(seq);
    const double y_min = std::uniform_real_distribution<double>(sys.y_min_lo, sys.y_min_hi)(rng);
    return {y_min, rng()};
}

// =============================================================================
// Sweeps
// =============================================================================

enum class Family { integral, linear, exponential, med };

[[nodiscard]] inline const char* family_name(Family f) {
    switch (f) {
    case Family::integral: return "integral";
    case Family::linear: return "linear";
    case Family::exponential: return "exponential";
    case Family::med: return "med";
    }
    return "?";
}

[[nodiscard]] inline Family family_from_name(const std::string& s) {
    if (s == "integral") return Family::integral;
    if (s == "linear") return Family::linear;
    if (s == "exponential") return Family::exponential;
    if (s == "med") return Family::med;
    throw ParseError("family", "unknown protocol family '" + s + "'");
}

struct SweepSpec {
    Family family = Family::integral;
    std::vector<double> values{}; ///< delta (integral) or rate (baselines); ignored for med
    std::size_t population = 100;
    std::uint64_t seed = kDefaultSeed;
    std::string label{}; ///< protocol column in CSV output; defaults to the family name

    void validate() const {
        if (population == 0)
            throw PolicyError("population must be >= 1");
        if (family != Family::med && values.empty())
            throw PolicyError("sweep value list is empty");
        for (double v : values) {
            if (family == Family::linear && !(v > 0.0))
                throw PolicyError("linear rate must be > 0");
            if (family == Family::exponential && !(v > 0.0 && v < 1.0))
                throw PolicyError("exponential rate must lie in (0, 1)");
        }
    }
};

struct UnitResult {
    std::size_t unit = 0;
    double y_min = 0.0;
    double avg_cum_dose = 0.0;
    double avg_cum_violation = 0.0;
    bool fully_tapered = false;
    std::optional<std::size_t> taper_time{};
    // integral family only
    bool bound_checked = false;
    bool stated_bound_ok = true;
    bool corrected_bound_ok = true;
    bool lemma_ok = true;
};

struct CurvePoint {
    std::string system;
    std::string protocol;
    double param = 0.0;
    std::size_t n = 0;
    double mean_dose = 0.0;
    double se_dose = 0.0;
    double mean_violation = 0.0;
    double se_violation = 0.0;
    double fraction_fully_tapered = 0.0;
    std::size_t stated_bound_failures = 0;
    std::size_t corrected_bound_failures = 0;
    std::size_t lemma_failures = 0;
    std::vector<UnitResult> units{};
};

[[nodiscard]] inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) /
                                             static_cast<double>(n - 1));
    return out;
}

/// Taper lengths log-spaced over [0.25 T, 4 T].
[[nodiscard]] inline std::vector<double> taper_lengths(std::size_t taper_steps, std::size_t n) {
    std::vector<double> out;
    const double lo = std::log(0.25 * static_cast<double>(taper_steps));
    const double hi = std::log(4.0 * static_cast<double>(taper_steps));
    for (double v : linspace(lo, hi, n))
        out.push_back(std::exp(v));
    return out;
}

/// Linear rates reaching zero after each taper length (u0 = 1).
[[nodiscard]] inline std::vector<double> default_linear_rates(std::size_t taper_steps,
                                                              std::size_t n = 9) {
    std::vector<double> out;
    for (double tf : taper_lengths(taper_steps, n))
        out.push_back(1.0 / tf);
    return out;
}

/// Exponential factors reaching 1% of the start dose after each taper length.
[[nodiscard]] inline std::vector<double> default_exponential_rates(std::size_t taper_steps,
                                                                   std::size_t n = 9) {
    std::vector<double> out;
    for (double tf : taper_lengths(taper_steps, n))
        out.push_back(std::pow(0.01, 1.0 / tf));
    return out;
}

[[nodiscard]] inline std::vector<double> default_deltas() { return linspace(-1.0, 1.0, 9); }

/// Padding grid for the headline reproduction: non-negative padding only.
[[nodiscard]] inline std::vector<double> reproduction_deltas() { return linspace(0.0, 1.0, 9); }

namespace detail {

[[nodiscard]] inline TaperPolicy make_policy(Family f, double v, const Gains& k, double u0) {
    switch (f) {
    case Family::integral: return IntegralPolicy{k.k_plus, k.k_minus, v};
    case Family::linear: return LinearPolicy{u0, v};
    case Family::exponential: return ExponentialPolicy{u0, v};
    case Family::med: return MedPolicy{};
    }
    return MedPolicy{};
}

inline void summarize(CurvePoint& p) {
    const auto n = static_cast<double>(p.units.size());
    p.n = p.units.size();
    double sd = 0.0, sv = 0.0, tapered = 0.0;
    for (const auto& u : p.units) {
        sd += u.avg_cum_dose;
        sv += u.avg_cum_violation;
        tapered += u.fully_tapered ? 1.0 : 0.0;
        p.stated_bound_failures += u.bound_checked && !u.stated_bound_ok;
        p.corrected_bound_failures += u.bound_checked && !u.corrected_bound_ok;
        p.lemma_failures += u.bound_checked && !u.lemma_ok;
    }
    p.mean_dose = sd / n;
    p.mean_violation = sv / n;
    p.fraction_fully_tapered = tapered / n;
    if (p.units.size() > 1) {
        double vd = 0.0, vv = 0.0;
        for (const auto& u : p.units) {
            vd += (u.avg_cum_dose - p.mean_dose) * (u.avg_cum_dose - p.mean_dose);
            vv += (u.avg_cum_violation - p.mean_violation) *
                  (u.avg_cum_violation - p.mean_violation);
        }
        p.se_dose = std::sqrt(vd / (n - 1.0) / n);
        p.se_violation = std::sqrt(vv / (n - 1.0) / n);
    }
}

/// Run fn(i) for i in [0, count) on up to `jobs` threads.
template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    for (std::size_t w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err)
                        err = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);
}

} // namespace detail

struct SweepContext {
    const ExperimentSetup* setup = nullptr;
    Gains gains{}; ///< integral gains; defaults to the (0.5, 1.5) factors when unset
    bool gains_set = false;
    std::size_t jobs = 1;
    bool check_bounds = true; ///< run the long-term bound and per-step checks on integral traces
};

[[nodiscard]] inline Gains default_gains(double g0) { return gains_from_factors(g0, 0.5, 1.5); }

/// Simulate one unit under one policy and score it.
[[nodiscard]] inline UnitResult run_unit(const CanonicalSystem& sys, const ImpulseResponse& g,
                                         const ExperimentSetup& setup, Family family,
                                         double value, const Gains& gains, std::uint64_t seed,
                                         std::size_t unit, bool check_bounds) {
    const auto draw = draw_unit(sys, seed, unit);
    const auto policy = detail::make_policy(family, value, gains, setup.warmup.dose);
    const auto trace = run_closed_loop(
        g, policy, NaturalProgression::constant(sys.nat_base),
        NoiseSpec::uniform(setup.noise_half_width, draw.noise_seed), setup.warmup,
        sys.taper_steps, ConstraintPath(draw.y_min));
    const auto m = compute_metrics(trace);
    UnitResult r;
    r.unit = unit;
    r.y_min = draw.y_min;
    r.avg_cum_dose = m.avg_cum_dose;
    r.avg_cum_violation = m.avg_cum_violation;
    r.fully_tapered = m.fully_tapered;
    r.taper_time = m.taper_time;
    if (family == Family::integral && check_bounds) {
        const auto frame = taper_window(trace, g);
        const auto t2 =
            oracles::check_theorem2(frame, value, gains.k_plus, gains.k_minus, g(0), 1e-8);
        const auto l1 = oracles::check_lemma1(frame, g, value, 1e-8);
        r.bound_checked = t2.hypothesis_holds;
        r.stated_bound_ok = t2.passed;
        r.corrected_bound_ok = t2.corrected_passed;
        r.lemma_ok = l1.passed;
    }
    return r;
}

/// One curve point per swept value (a single point for MED), N units each.
[[nodiscard]] inline std::vector<CurvePoint> run_sweep(const CanonicalSystem& sys,
                                                       const SweepSpec& spec,
                                                       const SweepContext& ctx) {
    spec.validate();
    const auto& setup = *ctx.setup;
    const auto g = sys.response(setup.tail_tol);
    const Gains gains = ctx.gains_set ? ctx.gains : default_gains(g(0));
    const std::vector<double> values =
        spec.family == Family::med ? std::vector<double>{0.0} : spec.values;

    std::vector<CurvePoint> points(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        points[i].system = sys.id;
        points[i].protocol = spec.label.empty() ? family_name(spec.family) : spec.label;
        points[i].param = values[i];
        points[i].units.resize(spec.population);
    }
    const std::size_t work = values.size() * spec.population;
    detail::parallel_for(work, ctx.jobs, [&](std::size_t w) {
        const std::size_t vi = w / spec.population;
        const std::size_t unit = w % spec.population;
        points[vi].units[unit] = run_unit(sys, g, setup, spec.family, values[vi], gains,
                                          spec.seed, unit, ctx.check_bounds);
    });
    for (auto& p : points)
        detail::summarize(p);
    return points;
}

// =============================================================================
// Gain ablation and tapered fraction
// =============================================================================

struct GainPair {
    double p1; ///< K- = (p1 g0)^-1
    double p2; ///< K+ = (p2 g0)^-1

    [[nodiscard]] bool compliant() const noexcept { return p1 > 0.0 && p1 <= 1.0 && 1.0 <= p2; }
    [[nodiscard]] std::string label() const {
        return "(" + format_double(p1) + "," + format_double(p2) + ")";
    }
};

[[nodiscard]] inline std::vector<GainPair> default_gain_pairs() {
    return {{0.5, 1.5}, {0.25, 1.5}, {0.5, 3.0}, {0.1, 1.5}, {1.0, 1.0}, {0.5, 1.0},
            {1.0, 1.5}, {1.5, 1.5}, {0.5, 0.75}};
}

struct AblationCurve {
    GainPair pair;
    Gains gains;
    std::vector<CurvePoint> points;
};

[[nodiscard]] inline std::vector<AblationCurve>
run_gain_ablation(const CanonicalSystem& sys, const std::vector<GainPair>& pairs,
                  const std::vector<double>& deltas, std::size_t population, std::uint64_t seed,
                  SweepContext ctx) {
    const double g0 = sys.response(ctx.setup->tail_tol)(0);
    std::vector<AblationCurve> out;
    for (const auto& pair : pairs) {
        ctx.gains = gains_from_factors(g0, pair.p1, pair.p2);
        ctx.gains_set = true;
        SweepSpec spec{Family::integral, deltas, population, seed, "integral" + pair.label()};
        // the law requires K- >= K+; such pairs are reported without a curve
        if (ctx.gains.k_minus < ctx.gains.k_plus) {
            out.push_back({pair, ctx.gains, {}});
            continue;
        }
        out.push_back({pair, ctx.gains, run_sweep(sys, spec, ctx)});
    }
    return out;
}

struct TaperedFraction {
    std::vector<CurvePoint> integral;
    CurvePoint med;
};

[[nodiscard]] inline TaperedFraction run_tapered_fraction(const CanonicalSystem& sys,
                                                          const std::vector<double>& deltas,
                                                          std::size_t population,
                                                          std::uint64_t seed,
                                                          const SweepContext& ctx) {
    TaperedFraction out;
    out.integral = run_sweep(sys, {Family::integral, deltas, population, seed}, ctx);
    out.med = run_sweep(sys, {Family::med, {}, population, seed}, ctx).front();
    return out;
}

// =============================================================================
// Dominance
// =============================================================================

struct DominanceCheck {
    bool passed = true;
    json details = json::array();
};

/// Lower-left Pareto frontier of a curve, sorted by violation.
[[nodiscard]] inline std::vector<const CurvePoint*> pareto_frontier(
    const std::vector<CurvePoint>& curve) {
    std::vector<const CurvePoint*> pts;
    for (const auto& p : curve)
        pts.push_back(&p);
    std::sort(pts.begin(), pts.end(), [](const CurvePoint* a, const CurvePoint* b) {
        return a->mean_violation < b->mean_violation ||
               (a->mean_violation == b->mean_violation && a->mean_dose < b->mean_dose);
    });
    std::vector<const CurvePoint*> front;
    for (const auto* p : pts)
        if (front.empty() || p->mean_dose < front.back()->mean_dose)
            front.push_back(p);
    return front;
}

/// Frontier dose at violation x: linear between points, flat beyond either end.
[[nodiscard]] inline double frontier_dose(const std::vector<const CurvePoint*>& front, double x) {
    if (x <= front.front()->mean_violation)
        return front.front()->mean_dose;
    for (std::size_t i = 1; i < front.size(); ++i) {
        const auto* a = front[i - 1];
        const auto* c = front[i];
        if (x <= c->mean_violation) {
            const double w = (x - a->mean_violation) / (c->mean_violation - a->mean_violation);
            return a->mean_dose + w * (c->mean_dose - a->mean_dose);
        }
    }
    return front.back()->mean_dose;
}

/**
 * No baseline point lies strictly below-left of the integral curve by more than
 * two standard errors. The curve is the piecewise-linear frontier through the
 * integral mean points, held flat to the left of its smallest violation;
 * baseline points right of its largest violation are outside its range. A
 * baseline point fails when, moved up and right by two combined standard
 * errors, it is still strictly below the frontier.
 */
[[nodiscard]] inline DominanceCheck baseline_dominated(const std::vector<CurvePoint>& integral,
                                                       const std::vector<CurvePoint>& baseline) {
    DominanceCheck out;
    const auto front = pareto_frontier(integral);
    if (front.empty())
        return out;
    double se_d_front = 0.0;
    double se_v_front = 0.0;
    for (const auto* p : front) {
        se_d_front = std::max(se_d_front, p->se_dose);
        se_v_front = std::max(se_v_front, p->se_violation);
    }
    for (const auto& b : baseline) {
        const bool comparable = b.mean_violation <= front.back()->mean_violation;
        json rec{{"protocol", b.protocol}, {"param", b.param}, {"comparable", comparable}};
        if (comparable) {
            const double se_d = std::hypot(b.se_dose, se_d_front);
            const double se_v = std::hypot(b.se_violation, se_v_front);
            const double f = frontier_dose(front, b.mean_violation + 2.0 * se_v);
            const double gap = f - (b.mean_dose + 2.0 * se_d);
            rec["frontier_dose"] = frontier_dose(front, b.mean_violation);
            rec["gap_beyond_2se"] = gap;
            if (gap > 0.0)
                out.passed = false;
        }
        out.details.push_back(std::move(rec));
    }
    return out;
}

/// Absolute slack on mean violations, so that roundoff above an exact zero is not a loss.
inline constexpr double kViolationFloor = 1e-9;

/// The MED point has violation and dose no larger than each integral point, within 2 SE.
[[nodiscard]] inline DominanceCheck med_dominates(const CurvePoint& med,
                                                  const std::vector<CurvePoint>& integral) {
    DominanceCheck out;
    for (const auto& p : integral) {
        const double se_d = std::hypot(med.se_dose, p.se_dose);
        const double se_v = std::hypot(med.se_violation, p.se_violation);
        const bool ok = med.mean_dose <= p.mean_dose + 2.0 * se_d &&
                        med.mean_violation <= p.mean_violation + 2.0 * se_v + kViolationFloor;
        out.passed = out.passed && ok;
        out.details.push_back({{"delta", p.param},
                               {"dose_gap", p.mean_dose - med.mean_dose},
                               {"violation_gap", p.mean_violation - med.mean_violation},
                               {"ok", ok}});
    }
    return out;
}

/// MED has violation no larger and tapered fraction no smaller than each integral point.
[[nodiscard]] inline DominanceCheck med_dominates_fraction(const CurvePoint& med,
                                                           const std::vector<CurvePoint>& integral) {
    DominanceCheck out;
    for (const auto& p : integral) {
        const double se_v = std::hypot(med.se_violation, p.se_violation);
        const bool ok = med.mean_violation <= p.mean_violation + 2.0 * se_v + kViolationFloor &&
                        med.fraction_fully_tapered >= p.fraction_fully_tapered;
        out.passed = out.passed && ok;
        out.details.push_back({{"delta", p.param},
                               {"fraction_gap", med.fraction_fully_tapered - p.fraction_fully_tapered},
                               {"ok", ok}});
    }
    return out;
}

// =============================================================================
// Output
// =============================================================================

[[nodiscard]] inline std::string long_csv_header() {
    return "system,protocol,param,unit,y_min,avg_cum_dose,avg_cum_violation,fully_tapered,"
           "taper_time\n";
}

[[nodiscard]] inline std::string long_csv_rows(const std::vector<CurvePoint>& curve) {
    std::ostringstream os;
    for (const auto& p : curve)
        for (const auto& u : p.units)
            os << p.system << ',' << p.protocol << ',' << format_double(p.param) << ','
               << u.unit << ',' << format_double(u.y_min) << ','
               << format_double(u.avg_cum_dose) << ',' << format_double(u.avg_cum_violation)
               << ',' << (u.fully_tapered ? 1 : 0) << ','
               << (u.taper_time ? std::to_string(*u.taper_time) : std::string()) << '\n';
    return os.str();
}

[[nodiscard]] inline std::string summary_csv_header() {
    return "system,protocol,param,n,mean_dose,se_dose,mean_violation,se_violation,"
           "fraction_fully_tapered\n";
}

[[nodiscard]] inline std::string summary_csv_rows(const std::vector<CurvePoint>& curve) {
    std::ostringstream os;
    for (const auto& p : curve)
        os << p.system << ',' << p.protocol << ',' << format_double(p.param) << ',' << p.n
           << ',' << format_double(p.mean_dose) << ',' << format_double(p.se_dose) << ','
           << format_double(p.mean_violation) << ',' << format_double(p.se_violation) << ','
           << format_double(p.fraction_fully_tapered) << '\n';
    return os.str();
}

[[nodiscard]] inline json to_json(const CurvePoint& p) {
    return {{"system", p.system},
            {"protocol", p.protocol},
            {"param", p.param},
            {"n", p.n},
            {"mean_dose", p.mean_dose},
            {"se_dose", p.se_dose},
            {"mean_violation", p.mean_violation},
            {"se_violation", p.se_violation},
            {"fraction_fully_tapered", p.fraction_fully_tapered},
            {"stated_bound_failures", p.stated_bound_failures},
            {"corrected_bound_failures", p.corrected_bound_failures},
            {"lemma_failures", p.lemma_failures}};
}

[[nodiscard]] inline json manifest(const ExperimentSetup& setup, std::uint64_t seed,
                                   const json& extra = json::object()) {
    json j{{"software", "taper"},
           {"version", kVersion},
           {"seed", seed},
           {"constants_file", setup.path},
           {"constants_sha256", setup.sha256},
           {"population", setup.population},
           {"warmup", {{"dose", setup.warmup.dose}, {"steps", setup.warmup.steps}}},
           {"noise_half_width", setup.noise_half_width}};
    for (const auto& [k, v] : extra.items())
        j[k] = v;
    return j;
}

} // namespace taper::experiments
