// Closed-loop simulation of well-being under linear opponent-process dynamics.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "taper/models.hpp"
#include "taper/protocols.hpp"

namespace taper {

// =============================================================================
// Natural progression and noise
// =============================================================================

struct NaturalProgression {
    enum class Kind { constant, custom_sequence, monotone_drift, lipschitz_drift };

    Kind kind = Kind::constant;
    double base = 0.0;
    double drift = 0.0; ///< monotone_drift: per-step increase, >= 0
    double l_nat = 0.0; ///< lipschitz_drift: per-step decrease, >= 0
    std::vector<double> sequence{};

    static NaturalProgression constant(double base) { return {Kind::constant, base}; }
    static NaturalProgression monotone(double base, double drift) {
        return {Kind::monotone_drift, base, drift};
    }
    /// Worst case of the Lipschitz model: y_nat falls by exactly L_nat each step.
    static NaturalProgression lipschitz(double base, double l_nat) {
        return {Kind::lipschitz_drift, base, 0.0, l_nat};
    }
    static NaturalProgression custom(std::vector<double> values) {
        NaturalProgression p{Kind::custom_sequence};
        p.sequence = std::move(values);
        return p;
    }

    void validate(std::size_t steps) const {
        switch (kind) {
        case Kind::monotone_drift:
            if (!(drift >= 0.0))
                throw ModelError("monotone drift must be >= 0");
            break;
        case Kind::lipschitz_drift:
            if (!(l_nat >= 0.0))
                throw ModelError("L_nat must be >= 0");
            break;
        case Kind::custom_sequence:
            if (sequence.size() < steps + 1)
                throw ModelError("natural progression sequence shorter than the horizon");
            break;
        case Kind::constant: break;
        }
    }

    [[nodiscard]] double at(std::size_t t) const {
        const auto tt = static_cast<double>(t);
        switch (kind) {
        case Kind::constant: return base;
        case Kind::monotone_drift: return base + drift * tt;
        case Kind::lipschitz_drift: return base - l_nat * tt;
        case Kind::custom_sequence: return sequence.at(t);
        }
        return base;
    }
};

struct NoiseSpec {
    enum class Kind { none, uniform };
    Kind kind = Kind::none;
    double half_width = 0.0;
    std::uint64_t seed = 0;

    static NoiseSpec none() { return {}; }
    static NoiseSpec uniform(double half_width, std::uint64_t seed) {
        return {Kind::uniform, half_width, seed};
    }

    /// Draws for steps 0..steps; entry 0 is always zero so that y_0 = y_nat_0.
    [[nodiscard]] std::vector<double> draws(std::size_t steps) const {
        std::vector<double> out(steps + 1, 0.0);
        if (kind == Kind::none || half_width == 0.0)
            return out;
        if (!(half_width > 0.0))
            throw ModelError("noise half-width must be >= 0");
        std::seed_seq seq{static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> dist(-half_width, half_width);
        for (std::size_t t = 1; t <= steps; ++t)
            out[t] = dist(rng);
        return out;
    }
};

// =============================================================================
// Traces
// =============================================================================

struct Warmup {
    double dose = 0.0;
    std::size_t steps = 0;
};

/**
 * Aligned record of a closed-loop run. Global time t runs over warmup then
 * taper: doses u_0..u_{T-1}, well-being y_0..y_T, natural progression
 * y_nat_0..y_nat_T (noise included). y_min holds the constraint for taper
 * steps 0..T_taper.
 */
struct SimulationTrace {
    std::vector<double> doses;
    std::vector<double> wellbeing;
    std::vector<double> nat;
    std::vector<double> y_min;
    std::size_t warmup_len = 0;
    std::vector<std::size_t> cap_events{}; ///< taper steps where a dose cap bound
    bool noise_in_warmup = true;

    [[nodiscard]] std::size_t taper_len() const noexcept { return doses.size() - warmup_len; }

    [[nodiscard]] std::span<const double> taper_doses() const noexcept {
        return std::span<const double>(doses).subspan(warmup_len);
    }
    /// y at taper steps 0..T_taper (step 0 is the state at the end of warmup).
    [[nodiscard]] std::span<const double> taper_wellbeing() const noexcept {
        return std::span<const double>(wellbeing).subspan(warmup_len);
    }
};

struct TraceMetrics {
    double avg_cum_dose = 0.0;
    double avg_cum_violation = 0.0;
    std::vector<double> long_term_violation{}; ///< entry T-1: mean(y_1..y_T) - mean(y_min)
    bool fully_tapered = false;
    std::optional<std::size_t> taper_time{};
    bool warmup_only = false;
};

/// Raised when a policy emits a negative or non-finite dose.
class ProtocolAbort : public std::runtime_error {
public:
    ProtocolAbort(const std::string& what, SimulationTrace partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    [[nodiscard]] const SimulationTrace& partial_trace() const noexcept { return partial_; }

private:
    SimulationTrace partial_;
};

// =============================================================================
// Dynamics
// =============================================================================

/// y_{t+1} = sum_{k=0}^{min(t, H-1)} g(k) u_{t-k} + y_nat_{t+1}, history = u_0..u_t.
[[nodiscard]] inline double simulate_step(const ImpulseResponse& g,
                                          std::span<const double> dose_history,
                                          double y_nat_next) {
    return g.convolve(dose_history) + y_nat_next;
}

/// y_nat_t = y_t - sum_{k=0}^{t-1} g(k) u_{t-k-1}.
[[nodiscard]] inline std::vector<double> recover_natural_progression(
    std::span<const double> wellbeing, std::span<const double> doses, const ImpulseResponse& g) {
    if (wellbeing.size() != doses.size() + 1)
        throw ModelError("trace length mismatch: need |y| = |u| + 1");
    std::vector<double> out(wellbeing.size());
    for (std::size_t t = 0; t < wellbeing.size(); ++t)
        out[t] = wellbeing[t] - g.convolve(doses.first(t));
    return out;
}

[[nodiscard]] inline std::vector<double> recover_natural_progression(const SimulationTrace& tr,
                                                                     const ImpulseResponse& g) {
    return recover_natural_progression(tr.wellbeing, tr.doses, g);
}

/**
 * Re-base a trace at the end of warmup: taper doses only, y_0 := y at taper
 * start, and y_nat recovered over taper doses so that warmup effects fold
 * into the natural progression.
 */
[[nodiscard]] inline SimulationTrace taper_window(const SimulationTrace& tr,
                                                  const ImpulseResponse& g) {
    SimulationTrace out;
    const auto u = tr.taper_doses();
    const auto y = tr.taper_wellbeing();
    out.doses.assign(u.begin(), u.end());
    out.wellbeing.assign(y.begin(), y.end());
    out.nat = recover_natural_progression(out.wellbeing, out.doses, g);
    out.y_min = tr.y_min;
    out.cap_events = tr.cap_events;
    out.noise_in_warmup = tr.noise_in_warmup;
    return out;
}

namespace detail {

[[nodiscard]] inline std::vector<double> constraint_values(const ConstraintPath& y_min,
                                                           std::size_t taper_steps) {
    if (!y_min.is_constant() && y_min.size() < taper_steps + 1)
        throw PolicyError("time-varying constraint shorter than the taper horizon");
    std::vector<double> out(taper_steps + 1);
    for (std::size_t s = 0; s <= taper_steps; ++s)
        out[s] = y_min.at(s);
    return out;
}

} // namespace detail

/**
 * Simulate `warmup.steps` steps at the warmup dose followed by `taper_steps`
 * policy-driven steps.
 *
 * Noise is added into y_nat before the policy observes the resulting y. The
 * MED policy in clairvoyant mode reads the true y_nat_{t+1}; every other
 * policy sees only past y values. At taper step s the policy doses against
 * the constraint for step s+1.
 */
[[nodiscard]] inline SimulationTrace run_closed_loop(const ImpulseResponse& g,
                                                     const TaperPolicy& policy,
                                                     const NaturalProgression& progression,
                                                     const NoiseSpec& noise, Warmup warmup,
                                                     std::size_t taper_steps,
                                                     const ConstraintPath& y_min) {
    validate(policy);
    if (!(warmup.dose >= 0.0) || !std::isfinite(warmup.dose))
        throw PolicyError("warmup dose must be finite and >= 0");
    const std::size_t total = warmup.steps + taper_steps;
    progression.validate(total);

    SimulationTrace tr;
    tr.warmup_len = warmup.steps;
    tr.y_min = detail::constraint_values(y_min, taper_steps);
    tr.doses.reserve(total);
    tr.wellbeing.reserve(total + 1);
    tr.nat.resize(total + 1);

    const auto eps = noise.draws(total);
    for (std::size_t t = 0; t <= total; ++t)
        tr.nat[t] = progression.at(t) + eps[t];
    tr.wellbeing.push_back(tr.nat[0]);

    double u_prev = warmup.dose;
    if (const auto* ip = std::get_if<IntegralPolicy>(&policy))
        u_prev = ip->u_init.value_or(warmup.steps > 0 ? warmup.dose : 0.0);

    for (std::size_t t = 0; t < total; ++t) {
        double u = warmup.dose;
        if (t >= warmup.steps) {
            const std::size_t s = t - warmup.steps;
            const double target = tr.y_min[s + 1];
            const double y_now = tr.wellbeing.back();
            u = std::visit(
                [&](const auto& p) -> double {
                    using P = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<P, MedPolicy>) {
                        double lb = tr.nat[t + 1];
                        if (p.bound != NatBoundMode::clairvoyant) {
                            const double nat_now = y_now - g.convolve(tr.doses);
                            lb = nat_lower_bound(p.bound, nat_now, p.l_nat);
                        }
                        return med_dose(g, tr.doses, target, lb);
                    } else if constexpr (std::is_same_v<P, IntegralPolicy>) {
                        double next =
                            integral_dose(u_prev, y_now, target, p.k_plus, p.k_minus, p.delta);
                        if (p.dose_cap && next > *p.dose_cap) {
                            next = *p.dose_cap;
                            tr.cap_events.push_back(s);
                        }
                        return next;
                    } else if constexpr (std::is_same_v<P, FixedPolicy>) {
                        return p.u;
                    } else {
                        return baseline_dose(p, s);
                    }
                },
                policy);
            if (!std::isfinite(u) || u < 0.0)
                throw ProtocolAbort(std::string(policy_name(policy)) +
                                        " policy produced invalid dose " + std::to_string(u) +
                                        " at taper step " + std::to_string(s),
                                    tr);
            u_prev = u;
        }
        tr.doses.push_back(u);
        tr.wellbeing.push_back(simulate_step(g, tr.doses, tr.nat[t + 1]));
    }
    return tr;
}

/// Metrics over the taper window. Warmup measurements are excluded.
[[nodiscard]] inline TraceMetrics compute_metrics(const SimulationTrace& tr) {
    TraceMetrics m;
    const auto u = tr.taper_doses();
    const auto y = tr.taper_wellbeing();
    const std::size_t n = u.size();
    if (n == 0) {
        m.warmup_only = true;
        return m;
    }
    double dose = 0.0;
    double viol = 0.0;
    double sum_y = 0.0;
    double sum_min = 0.0;
    m.long_term_violation.resize(n);
    for (std::size_t t = 1; t <= n; ++t) {
        dose += u[t - 1];
        const double floor = tr.y_min[std::min(t, tr.y_min.size() - 1)];
        viol += std::max(floor - y[t], 0.0);
        sum_y += y[t];
        sum_min += floor;
        m.long_term_violation[t - 1] = (sum_y - sum_min) / static_cast<double>(t);
    }
    m.avg_cum_dose = dose / static_cast<double>(n);
    m.avg_cum_violation = viol / static_cast<double>(n);

    std::size_t first_zero_tail = n;
    while (first_zero_tail > 0 && u[first_zero_tail - 1] == 0.0)
        --first_zero_tail;
    if (first_zero_tail < n) {
        m.fully_tapered = true;
        m.taper_time = first_zero_tail;
    }
    return m;
}

} // namespace taper
