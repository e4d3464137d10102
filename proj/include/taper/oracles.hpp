// Independent checks of the tapering guarantees on concrete traces.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taper/dynamics.hpp"
#include "taper/io.hpp"
#include "taper/models.hpp"
#include "taper/protocols.hpp"

namespace taper::oracles {

// =============================================================================
// Brute-force minimum cumulative dose
// =============================================================================

struct DoseGrid {
    double max_dose = 2.0;
    double resolution = 0.05;

    [[nodiscard]] std::size_t points() const {
        if (!(resolution > 0.0) || !(max_dose >= 0.0))
            throw ModelError("dose grid needs resolution > 0 and max_dose >= 0");
        return static_cast<std::size_t>(std::floor(max_dose / resolution + 1e-9)) + 1;
    }
    [[nodiscard]] double value(std::size_t i) const {
        return static_cast<double>(i) * resolution;
    }
};

struct OracleSchedule {
    std::vector<double> doses;
    double cum_dose;
    std::size_t visited; ///< schedules whose prefix was simulated
};

inline constexpr std::size_t kMaxOracleStates = 10'000'000;

/**
 * Exhaustive search over grid^T schedules for the feasible one with the least
 * cumulative dose. y_nat holds y_nat_0..y_nat_T and y_min(t) constrains y_t for
 * t = 1..T. Ties go to the lexicographically smallest schedule. Branches whose
 * prefix is already infeasible or no cheaper than the incumbent are cut, which
 * leaves the result identical to full enumeration.
 */
[[nodiscard]] inline std::optional<OracleSchedule>
brute_force_min_dose(const ImpulseResponse& g, std::span<const double> y_nat,
                     const ConstraintPath& y_min, std::size_t horizon, const DoseGrid& grid,
                     double feas_tol = 1e-12) {
    if (horizon == 0 || horizon > 6)
        throw ModelError("brute-force horizon must lie in [1, 6]");
    if (y_nat.size() < horizon + 1)
        throw ModelError("natural progression shorter than the oracle horizon");
    const std::size_t n = grid.points();
    if (std::pow(static_cast<double>(n), static_cast<double>(horizon)) >
        static_cast<double>(kMaxOracleStates))
        throw ModelError("oracle state space exceeds the enumeration cap");

    std::vector<std::size_t> idx(horizon, 0);
    std::vector<double> doses(horizon, 0.0);
    std::optional<std::vector<std::size_t>> best;
    std::size_t best_sum = std::numeric_limits<std::size_t>::max();
    std::size_t visited = 0;

    // depth-first in lexicographic order; sums of grid indices compare exactly
    auto dfs = [&](auto&& self, std::size_t depth, std::size_t sum) -> void {
        if (depth == horizon) {
            if (sum < best_sum) {
                best_sum = sum;
                best = idx;
            }
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (sum + i >= best_sum)
                break;
            ++visited;
            idx[depth] = i;
            doses[depth] = grid.value(i);
            const double y = simulate_step(
                g, std::span<const double>(doses).first(depth + 1), y_nat[depth + 1]);
            if (y >= y_min.at(depth + 1) - feas_tol)
                self(self, depth + 1, sum + i);
        }
    };
    dfs(dfs, 0, 0);
    if (!best)
        return std::nullopt;
    OracleSchedule out{{}, 0.0, visited};
    for (std::size_t i : *best) {
        out.doses.push_back(grid.value(i));
        out.cum_dose += grid.value(i);
    }
    return out;
}

// =============================================================================
// Long-term violation bound for the integral controller
// =============================================================================

struct BoundReport {
    bool hypothesis_holds = true; ///< gains bracket 1/g(0) (or other preconditions met)
    bool passed = true;
    std::optional<std::size_t> first_violation{};
    double min_margin = std::numeric_limits<double>::infinity();
    std::size_t checked = 0;
    /// Same prefixes with the g(0) u_T term that the summed per-step inequality leaves behind.
    bool corrected_passed = true;
    double corrected_min_margin = std::numeric_limits<double>::infinity();
};

[[nodiscard]] inline json to_json(const BoundReport& r) {
    return {{"hypothesis_holds", r.hypothesis_holds},
            {"passed", r.passed},
            {"first_violation",
             r.first_violation ? json(*r.first_violation) : json(nullptr)},
            {"min_margin", std::isfinite(r.min_margin) ? json(r.min_margin) : json(nullptr)},
            {"checked", r.checked},
            {"corrected_passed", r.corrected_passed},
            {"corrected_min_margin", std::isfinite(r.corrected_min_margin)
                                         ? json(r.corrected_min_margin)
                                         : json(nullptr)}};
}

/// Setpoint the integral controller used at taper step t: y_min for step t+1 plus delta.
[[nodiscard]] inline double setpoint(std::span<const double> y_min, std::size_t t, double delta) {
    return y_min[std::min(t + 1, y_min.size() - 1)] + delta;
}

/**
 * Running margins of the long-term bound for every prefix T of a taper-frame
 * well-being sequence y_0..y_n:
 *   (sum_{t=1}^T y_t - sum_{t=0}^T c_t + y_0) / T
 * with c_t the setpoint at step t. For a constant y_min this is
 *   mean(y_1..y_T) - (y_min + delta) + (y_0 - y_min - delta) / T.
 */
[[nodiscard]] inline std::vector<double> theorem2_margins(std::span<const double> y,
                                                          std::span<const double> y_min,
                                                          double delta) {
    std::vector<double> out;
    if (y.size() < 2 || y_min.empty())
        return out;
    double sum_y = 0.0;
    double sum_c = setpoint(y_min, 0, delta);
    for (std::size_t big_t = 1; big_t < y.size(); ++big_t) {
        sum_y += y[big_t];
        sum_c += setpoint(y_min, big_t, delta);
        out.push_back((sum_y - sum_c + y[0]) / static_cast<double>(big_t));
    }
    return out;
}

/**
 * Check the long-term violation bound on a taper-frame trace (see
 * taper_window). The bound is asserted only when K+ <= 1/g0 <= K-; otherwise
 * the report is informational.
 *
 * Summing the per-step inequality over t = 0..T and cancelling y_{T+1} leaves
 *   sum_{t=1}^T y_t >= sum_{t=0}^T c_t - y_0 - g(0) u_T,
 * so the corrected margins add g(0) u_T / T, with u_T the law's next dose.
 */
[[nodiscard]] inline BoundReport check_theorem2(const SimulationTrace& frame, double delta,
                                                double k_plus, double k_minus, double g0,
                                                double tol = 1e-8) {
    BoundReport r;
    r.hypothesis_holds = k_plus <= 1.0 / g0 && 1.0 / g0 <= k_minus && frame.cap_events.empty();
    const auto margins = theorem2_margins(frame.wellbeing, frame.y_min, delta);
    r.checked = margins.size();
    for (std::size_t i = 0; i < margins.size(); ++i) {
        r.min_margin = std::min(r.min_margin, margins[i]);
        if (margins[i] < -tol && !r.first_violation)
            r.first_violation = i + 1;
        const std::size_t big_t = i + 1;
        double u_t = 0.0;
        if (big_t < frame.doses.size()) {
            u_t = frame.doses[big_t];
        } else {
            const double prev = frame.doses.empty() ? 0.0 : frame.doses.back();
            const double c = setpoint(frame.y_min, big_t, delta);
            u_t = integral_dose(prev, frame.wellbeing[big_t], c, k_plus, k_minus);
        }
        const double corrected = margins[i] + g0 * u_t / static_cast<double>(big_t);
        r.corrected_min_margin = std::min(r.corrected_min_margin, corrected);
        if (corrected < -tol * std::max(1.0, std::abs(g0 * u_t)))
            r.corrected_passed = false;
    }
    r.passed = !r.first_violation;
    return r;
}

/**
 * Per-step inequality behind the long-term bound:
 *   y_{t+1} >= c_t + (y_nat_{t+1} - y_nat_t) - sum_{k=1}^t g(k)(u_{t-k-1} - u_{t-k})
 * with u_{-1} = 0 and y_nat recovered over the frame's own doses.
 */
[[nodiscard]] inline BoundReport check_lemma1(const SimulationTrace& frame,
                                              const ImpulseResponse& g, double delta,
                                              double tol = 1e-8) {
    BoundReport r;
    const auto& u = frame.doses;
    const auto nat = recover_natural_progression(frame.wellbeing, frame.doses, g);
    auto dose = [&](std::ptrdiff_t i) { return i < 0 ? 0.0 : u[static_cast<std::size_t>(i)]; };
    for (std::size_t t = 0; t < u.size(); ++t) {
        double s = 0.0;
        for (std::size_t k = 1; k <= t && k < g.horizon(); ++k) {
            const auto tk = static_cast<std::ptrdiff_t>(t - k);
            s += g(k) * (dose(tk - 1) - dose(tk));
        }
        const double rhs = setpoint(frame.y_min, t, delta) + (nat[t + 1] - nat[t]) - s;
        const double margin = frame.wellbeing[t + 1] - rhs;
        r.min_margin = std::min(r.min_margin, margin);
        ++r.checked;
        if (margin < -tol && !r.first_violation)
            r.first_violation = t;
    }
    r.passed = !r.first_violation;
    return r;
}

// =============================================================================
// Monotone finite-time taper for tau0 = 1
// =============================================================================

struct Prop2Report {
    bool precondition_ok = true;
    std::string precondition_failure{};
    bool non_increasing = true;
    bool constraint_held = true;
    bool zero_after_bound = true;
    std::size_t zero_bound = 0; ///< ceil(exp(u0 / (K+ delta)))
    std::optional<std::size_t> first_failure{};

    [[nodiscard]] bool conclusions_hold() const noexcept {
        return non_increasing && constraint_held && zero_after_bound;
    }
};

[[nodiscard]] inline json to_json(const Prop2Report& r) {
    return {{"precondition_ok", r.precondition_ok},
            {"precondition_failure", r.precondition_failure},
            {"non_increasing", r.non_increasing},
            {"constraint_held", r.constraint_held},
            {"zero_after_bound", r.zero_after_bound},
            {"zero_bound", r.zero_bound},
            {"first_failure", r.first_failure ? json(*r.first_failure) : json(nullptr)}};
}

[[nodiscard]] inline std::size_t prop2_zero_bound(double u0, double k_plus, double delta) {
    const double e = std::exp(u0 / (k_plus * delta));
    if (!std::isfinite(e) || e > 1e15)
        return std::numeric_limits<std::size_t>::max();
    return static_cast<std::size_t>(std::ceil(e));
}

/**
 * Check a frame whose first dose is u0 and whose later doses follow the
 * integral law with setpoint y_min (constant). Preconditions (tau0 = 1,
 * y_1 >= y_min, drift y_nat_{t+1} >= y_nat_t - g(t) u0 + delta / t) are
 * reported separately from the three conclusions.
 */
[[nodiscard]] inline Prop2Report check_prop2(const SimulationTrace& frame,
                                             const ImpulseResponse& g, double u0, double k_plus,
                                             double delta, double y_min, double tol = 1e-8) {
    Prop2Report r;
    r.zero_bound = prop2_zero_bound(u0, k_plus, delta);
    const auto& u = frame.doses;
    const auto& y = frame.wellbeing;
    auto fail_pre = [&](std::string why) {
        if (r.precondition_ok) {
            r.precondition_ok = false;
            r.precondition_failure = std::move(why);
        }
    };

    auto cert = certify_opponent(g);
    if (!is_certified(cert) || std::get<OpponentCertificate>(cert).tau0 != 1)
        fail_pre("kernel does not certify with tau0 = 1");
    if (!(delta > 0.0))
        fail_pre("delta must be > 0");
    if (u.empty() || std::abs(u[0] - u0) > tol)
        fail_pre("first dose differs from u0");
    if (y.size() < 2 || y[1] < y_min - tol)
        fail_pre("u0 does not ensure y_1 >= y_min");
    const auto nat = recover_natural_progression(y, u, g);
    for (std::size_t t = 1; t + 1 < nat.size(); ++t) {
        const double need = nat[t] - g(t) * u0 + delta / static_cast<double>(t);
        if (nat[t + 1] < need - tol) {
            fail_pre("drift condition fails at t = " + std::to_string(t));
            break;
        }
    }

    for (std::size_t t = 1; t < u.size(); ++t) {
        if (u[t] > u[t - 1] + tol) {
            r.non_increasing = false;
            r.first_failure = r.first_failure.value_or(t);
        }
    }
    for (std::size_t t = 1; t < y.size(); ++t) {
        if (y[t] < y_min - tol) {
            r.constraint_held = false;
            r.first_failure = r.first_failure.value_or(t);
        }
    }
    for (std::size_t t = r.zero_bound; t < u.size(); ++t) {
        if (u[t] != 0.0) {
            r.zero_after_bound = false;
            r.first_failure = r.first_failure.value_or(t);
            break;
        }
    }
    return r;
}

/// Frame with u_0 fixed and u_t (t >= 1) from the integral law against y_min + delta.
[[nodiscard]] inline SimulationTrace simulate_integral_from(const ImpulseResponse& g,
                                                            std::span<const double> y_nat,
                                                            double y_min, double u0,
                                                            double k_plus, double k_minus,
                                                            double delta = 0.0) {
    if (y_nat.size() < 2)
        throw ModelError("natural progression needs at least two entries");
    SimulationTrace tr;
    tr.nat.assign(y_nat.begin(), y_nat.end());
    tr.y_min = {y_min};
    tr.wellbeing.push_back(y_nat[0]);
    for (std::size_t t = 0; t + 1 < y_nat.size(); ++t) {
        const double u = t == 0 ? u0
                                : integral_dose(tr.doses.back(), tr.wellbeing.back(), y_min,
                                                k_plus, k_minus, delta);
        tr.doses.push_back(u);
        tr.wellbeing.push_back(simulate_step(g, tr.doses, y_nat[t + 1]));
    }
    return tr;
}

// =============================================================================
// Exchange step of the greedy-optimality argument
// =============================================================================

/**
 * Move eps of dose from step t0 to alpha*eps at step t0+1 and return
 * min over t > t0 of (y'_{t+1} - y_{t+1}). Non-negative for any alpha in the
 * certified interval.
 */
[[nodiscard]] inline double exchange_gain(const ImpulseResponse& g,
                                          std::span<const double> schedule,
                                          std::span<const double> y_nat, std::size_t t0,
                                          double eps, double alpha) {
    if (t0 + 1 >= schedule.size())
        throw ModelError("exchange needs a step after t0");
    std::vector<double> a(schedule.begin(), schedule.end());
    std::vector<double> b = a;
    b[t0] -= eps;
    b[t0 + 1] += alpha * eps;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t t = t0 + 1; t < a.size(); ++t) {
        const auto pa = std::span<const double>(a).first(t + 1);
        const auto pb = std::span<const double>(b).first(t + 1);
        worst = std::min(worst, simulate_step(g, pb, y_nat[t + 1]) -
                                    simulate_step(g, pa, y_nat[t + 1]));
    }
    return worst;
}

} // namespace taper::oracles
