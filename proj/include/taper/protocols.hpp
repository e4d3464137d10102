// Dosing policies: minimum effective dose, integral control, baselines.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "taper/models.hpp"

namespace taper {

class PolicyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// =============================================================================
// Policy configurations
// =============================================================================

enum class NatBoundMode { monotone, lipschitz, clairvoyant };

struct MedPolicy {
    NatBoundMode bound = NatBoundMode::clairvoyant;
    double l_nat = 0.0; ///< per-step downward drift bound, lipschitz mode only
};

struct IntegralPolicy {
    double k_plus = 1.0;  ///< gain above the setpoint, dose per well-being unit
    double k_minus = 1.0; ///< gain below the setpoint
    double delta = 0.0;   ///< setpoint padding; may be negative
    std::optional<double> u_init{};   ///< defaults to the warmup dose
    std::optional<double> dose_cap{}; ///< per-step maximum, off by default
};

struct LinearPolicy {
    double u0 = 1.0;
    double rate = 0.1; ///< dose units per step
};

struct ExponentialPolicy {
    double u0 = 1.0;
    double rate = 0.9; ///< multiplicative factor per step, in (0, 1)
};

struct FixedPolicy {
    double u = 0.0;
};

using TaperPolicy =
    std::variant<MedPolicy, IntegralPolicy, LinearPolicy, ExponentialPolicy, FixedPolicy>;

inline void validate(const MedPolicy& p) {
    if (!(p.l_nat >= 0.0) || !std::isfinite(p.l_nat))
        throw PolicyError("L_nat must be finite and >= 0");
}

inline void validate(const IntegralPolicy& p) {
    if (!(p.k_plus > 0.0) || !std::isfinite(p.k_plus))
        throw PolicyError("K+ must be finite and > 0");
    if (!(p.k_minus > 0.0) || !std::isfinite(p.k_minus))
        throw PolicyError("K- must be finite and > 0");
    if (p.k_minus < p.k_plus)
        throw PolicyError("K- must be >= K+");
    if (!std::isfinite(p.delta))
        throw PolicyError("padding must be finite");
    if (p.u_init && !(*p.u_init >= 0.0 && std::isfinite(*p.u_init)))
        throw PolicyError("u_init must be finite and >= 0");
    if (p.dose_cap && !(*p.dose_cap > 0.0))
        throw PolicyError("dose cap must be > 0");
}

inline void validate(const LinearPolicy& p) {
    if (!(p.u0 >= 0.0) || !std::isfinite(p.u0))
        throw PolicyError("linear u0 must be finite and >= 0");
    if (!(p.rate > 0.0) || !std::isfinite(p.rate))
        throw PolicyError("linear rate must be > 0");
}

inline void validate(const ExponentialPolicy& p) {
    if (!(p.u0 >= 0.0) || !std::isfinite(p.u0))
        throw PolicyError("exponential u0 must be finite and >= 0");
    if (!(p.rate > 0.0 && p.rate < 1.0))
        throw PolicyError("exponential rate must lie in (0, 1)");
}

inline void validate(const FixedPolicy& p) {
    if (!(p.u >= 0.0) || !std::isfinite(p.u))
        throw PolicyError("fixed dose must be finite and >= 0");
}

inline void validate(const TaperPolicy& p) {
    std::visit([](const auto& x) { validate(x); }, p);
}

[[nodiscard]] inline const char* policy_name(const TaperPolicy& p) {
    switch (p.index()) {
    case 0: return "med";
    case 1: return "integral";
    case 2: return "linear";
    case 3: return "exponential";
    default: return "fixed";
    }
}

// =============================================================================
// Constraint paths
// =============================================================================

/// Constant or time-varying lower bound y_min^(t), indexed by taper step.
class ConstraintPath {
public:
    ConstraintPath(double constant = 0.0) : values_{constant} {} // NOLINT(google-explicit-constructor)
    explicit ConstraintPath(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty())
            throw PolicyError("constraint path is empty");
        for (double v : values_)
            if (!std::isfinite(v))
                throw PolicyError("constraint values must be finite");
    }

    /// y_min at step t; a path is held at its last value beyond its end.
    [[nodiscard]] double at(std::size_t t) const noexcept {
        return values_[std::min(t, values_.size() - 1)];
    }
    [[nodiscard]] bool is_constant() const noexcept { return values_.size() == 1; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

// =============================================================================
// Dose rules
// =============================================================================

/**
 * Minimum effective dose for step t given past doses u_0..u_{t-1}:
 *   max{0, (y_min - y_nat_lb - sum_{k>=1} g(k) u_{t-k}) / g(0)}.
 */
[[nodiscard]] inline double med_dose(const ImpulseResponse& g, std::span<const double> past_doses,
                                     double y_min_next, double y_nat_lb_next) {
    const double g0 = g(0);
    if (!(g0 > 0.0))
        throw PolicyError("MED requires g(0) > 0");
    const double carry = g.convolve(past_doses, 1);
    return std::max(0.0, (y_min_next - y_nat_lb_next - carry) / g0);
}

/// Lower bound on y_nat_{t+1} from the current natural progression value.
[[nodiscard]] inline double nat_lower_bound(NatBoundMode mode, double y_nat_current,
                                            double l_nat) {
    if (!(l_nat >= 0.0))
        throw PolicyError("L_nat must be >= 0");
    switch (mode) {
    case NatBoundMode::lipschitz: return y_nat_current - l_nat;
    case NatBoundMode::monotone:
    case NatBoundMode::clairvoyant: return y_nat_current;
    }
    return y_nat_current;
}

/// Asymmetric-gain integral update with setpoint y_min + delta, clipped at zero.
[[nodiscard]] inline double integral_dose(double u_prev, double y, double y_min, double k_plus,
                                          double k_minus, double delta = 0.0) {
    const double err = y - (y_min + delta);
    const double pos = std::max(err, 0.0);
    const double neg = std::min(err, 0.0);
    return std::max(0.0, u_prev - k_plus * pos - k_minus * neg);
}

struct Gains {
    double k_plus;
    double k_minus;
};

/// K+ = 1/g0_hi and K- = 1/g0_lo, so K+ <= 1/g(0) <= K- for any g(0) in range.
[[nodiscard]] inline Gains gains_from_g0_range(double g0_lo, double g0_hi) {
    if (!(g0_lo > 0.0) || !std::isfinite(g0_hi))
        throw PolicyError("g(0) bounds must be positive and finite");
    if (g0_hi < g0_lo)
        throw PolicyError("g(0) bounds are inverted");
    return {1.0 / g0_hi, 1.0 / g0_lo};
}

/// Rule of thumb: a dose change of `dose_step` moves y by somewhere in [dy_lo, dy_hi].
[[nodiscard]] inline Gains gains_from_rule_of_thumb(double dose_step, double dy_lo,
                                                    double dy_hi) {
    if (!(dose_step > 0.0))
        throw PolicyError("noticeable dose change must be > 0");
    return gains_from_g0_range(dy_lo / dose_step, dy_hi / dose_step);
}

/// Gains from misspecification factors: K- = (p1 g0)^-1, K+ = (p2 g0)^-1.
[[nodiscard]] inline Gains gains_from_factors(double g0, double p1, double p2) {
    if (!(g0 > 0.0) || !(p1 > 0.0) || !(p2 > 0.0))
        throw PolicyError("g(0) and factors must be > 0");
    return {1.0 / (p2 * g0), 1.0 / (p1 * g0)};
}

[[nodiscard]] inline bool gains_bracket(const Gains& k, double g0) noexcept {
    return k.k_plus <= 1.0 / g0 && 1.0 / g0 <= k.k_minus;
}

[[nodiscard]] inline double baseline_dose(const LinearPolicy& p, std::size_t t) {
    return std::max(0.0, p.u0 - p.rate * static_cast<double>(t));
}

[[nodiscard]] inline double baseline_dose(const ExponentialPolicy& p, std::size_t t) {
    return std::pow(p.rate, static_cast<double>(t)) * p.u0;
}

// =============================================================================
// Generalized MED
// =============================================================================

class InfeasibleDose : public std::runtime_error {
public:
    InfeasibleDose(double target, double reachable)
        : std::runtime_error("MED target " + std::to_string(target) +
                             " exceeds g(0, dose_cap) = " + std::to_string(reachable)),
          target_(target), reachable_(reachable) {}
    [[nodiscard]] double target() const noexcept { return target_; }
    [[nodiscard]] double reachable() const noexcept { return reachable_; }

private:
    double target_;
    double reachable_;
};

struct BisectionResult {
    double dose;
    std::size_t iterations;
    double residual; ///< g(0, dose) - target
};

/// Worst-case iteration count to reach |g(0, u) - target| <= eps.
[[nodiscard]] inline std::size_t bisection_iteration_bound(const GeneralizedResponse& gr,
                                                           double eps) {
    const double slope = gr.du_hi.empty() ? 1.0 : gr.du_hi[0];
    const double eps_u = eps / std::max(slope, std::numeric_limits<double>::min());
    const double ratio = gr.dose_cap / eps_u;
    return ratio <= 1.0 ? 0 : static_cast<std::size_t>(std::ceil(std::log2(ratio)));
}

/**
 * Solve g(0, u) = max{0, y_min - y_nat_lb - sum_{k>=1} g(k, u_{t-k})} for u by
 * bisection on [0, dose_cap]; g(0, .) is increasing.
 */
[[nodiscard]] inline BisectionResult
generalized_med_solve(const GeneralizedResponse& gr, std::span<const double> past_doses,
                      double y_min_next, double y_nat_lb_next, double eps = 1e-8) {
    if (!(eps > 0.0))
        throw PolicyError("bisection tolerance must be > 0");
    if (!gr.eval || gr.horizon() == 0)
        throw PolicyError("generalized response is empty");
    const double target = y_min_next - y_nat_lb_next - gr.convolve(past_doses, 1);
    if (!std::isfinite(target))
        throw PolicyError("MED target is not finite");
    if (target <= 0.0)
        return {0.0, 0, gr.eval(0, 0.0) - target};

    double lo = 0.0;
    double hi = gr.dose_cap;
    const double at_cap = gr.eval(0, hi);
    if (at_cap < target - eps)
        throw InfeasibleDose(target, at_cap);
    if (std::abs(at_cap - target) <= eps)
        return {hi, 0, at_cap - target};

    std::size_t it = 0;
    double mid = lo;
    double r = -target;
    for (;;) {
        ++it;
        mid = 0.5 * (lo + hi);
        r = gr.eval(0, mid) - target;
        if (std::abs(r) <= eps || hi - lo <= std::numeric_limits<double>::epsilon() * hi)
            break;
        (r < 0.0 ? lo : hi) = mid;
    }
    return {mid, it, r};
}

[[nodiscard]] inline double generalized_med_dose(const GeneralizedResponse& gr,
                                                 std::span<const double> past_doses,
                                                 double y_min_next, double y_nat_lb_next,
                                                 double eps = 1e-8) {
    return generalized_med_solve(gr, past_doses, y_min_next, y_nat_lb_next, eps).dose;
}

} // namespace taper
