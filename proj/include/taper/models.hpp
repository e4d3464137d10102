// Opponent-process response kernels: construction, certification, coarsening.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace taper {

inline constexpr double kSignTolerance = 1e-12;
inline constexpr double kDefaultTailTolerance = 1e-9;
inline constexpr std::size_t kDefaultHorizonCap = 4096;

/// Thrown for malformed model inputs (bad modes, unreachable tail bound, ...).
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// =============================================================================
// Kernel types
// =============================================================================

/// One geometric mode c * decay^t of an impulse response.
struct Mode {
    double coefficient; ///< well-being units per dose unit
    double decay;       ///< per-step rate in [0, 1)
};

/**
 * Discretized dose-response kernel g(0..H-1).
 *
 * g(t) for t >= H is treated as zero; tail_tol bounds the ignored mass when
 * the kernel came from modes (0 for explicit kernels).
 */
class ImpulseResponse {
public:
    ImpulseResponse() = default;

    explicit ImpulseResponse(std::vector<double> values, double tail_tol = 0.0)
        : values_(std::move(values)), tail_tol_(tail_tol) {
        if (values_.empty())
            throw ModelError("impulse response needs at least one value");
        for (double v : values_)
            if (!std::isfinite(v))
                throw ModelError("impulse response values must be finite");
        if (!(tail_tol_ >= 0.0))
            throw ModelError("tail tolerance must be >= 0");
    }

    [[nodiscard]] std::size_t horizon() const noexcept { return values_.size(); }
    [[nodiscard]] double tail_tol() const noexcept { return tail_tol_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    /// g(k), zero beyond the horizon.
    [[nodiscard]] double operator()(std::size_t k) const noexcept {
        return k < values_.size() ? values_[k] : 0.0;
    }

    /**
     * sum_{k>=lag_offset} g(k) * doses[n-1-(k-lag_offset)], i.e. the effect on the
     * next well-being value of a dose history whose most recent entry sits at
     * lag `lag_offset`.
     *
     * lag_offset = 0 with the current dose appended is the plain dynamics convolution;
     * lag_offset = 1 on the past doses is the carry-over term of the MED formula.
     */
    [[nodiscard]] double convolve(std::span<const double> doses,
                                  std::size_t lag_offset = 0) const noexcept {
        const std::size_t n = doses.size();
        if (lag_offset >= values_.size())
            return 0.0;
        const std::size_t terms = std::min(n, values_.size() - lag_offset);
        double acc = 0.0;
        for (std::size_t j = 0; j < terms; ++j)
            acc += values_[lag_offset + j] * doses[n - 1 - j];
        return acc;
    }

    friend bool operator==(const ImpulseResponse&, const ImpulseResponse&) = default;

private:
    std::vector<double> values_{};
    double tail_tol_ = 0.0;
};

// =============================================================================
// Certificates
// =============================================================================

struct OpponentCertificate {
    std::size_t tau0; ///< first step with g <= 0
};

struct LpopCertificate {
    std::size_t tau0;
    double alpha_lo;
    double alpha_hi;
    std::vector<std::size_t> skipped; ///< ratio indices skipped by the zero guard

    [[nodiscard]] bool contains(double alpha) const noexcept {
        return alpha >= alpha_lo && alpha <= alpha_hi;
    }
};

struct Violation {
    std::size_t index;
    std::string reason;
};

template <typename Certificate>
using Certified = std::variant<Certificate, Violation>;

template <typename Certificate>
[[nodiscard]] bool is_certified(const Certified<Certificate>& r) noexcept {
    return std::holds_alternative<Certificate>(r);
}

// =============================================================================
// Construction
// =============================================================================

inline void validate_mode(const Mode& m) {
    if (!std::isfinite(m.coefficient) || m.coefficient == 0.0)
        throw ModelError("mode coefficient must be finite and nonzero");
    if (!(m.decay >= 0.0 && m.decay < 1.0))
        throw ModelError("mode decay must lie in [0, 1)");
}

[[nodiscard]] inline double evaluate_modes(std::span<const Mode> modes, std::size_t t) {
    double acc = 0.0;
    for (const auto& m : modes)
        acc += m.coefficient * std::pow(m.decay, static_cast<double>(t));
    return acc;
}

/// g(t) = sum c * decay^t, truncated where sum|c| * decay_max^t <= tail_tol.
[[nodiscard]] inline ImpulseResponse
build_impulse_response(std::span<const Mode> modes, double tail_tol = kDefaultTailTolerance,
                       std::size_t horizon_cap = kDefaultHorizonCap) {
    if (modes.empty())
        throw ModelError("mode list is empty");
    if (!(tail_tol > 0.0))
        throw ModelError("tail tolerance must be > 0");
    double mass = 0.0;
    double decay_max = 0.0;
    for (const auto& m : modes) {
        validate_mode(m);
        mass += std::abs(m.coefficient);
        decay_max = std::max(decay_max, m.decay);
    }

    // smallest n with mass * decay_max^n <= tail_tol; g(n) is kept so that
    // |g(H-1)| <= tail_tol as well
    std::size_t n = 0;
    if (mass > tail_tol) {
        if (decay_max == 0.0) {
            n = 1;
        } else {
            const double exact = std::log(tail_tol / mass) / std::log(decay_max);
            n = static_cast<std::size_t>(std::max(0.0, std::floor(exact)));
            while (mass * std::pow(decay_max, static_cast<double>(n)) > tail_tol)
                ++n;
            while (n > 0 && mass * std::pow(decay_max, static_cast<double>(n - 1)) <= tail_tol)
                --n;
        }
    }
    const std::size_t horizon = n + 1;
    if (horizon > horizon_cap)
        throw ModelError("tail tolerance unreachable within horizon cap " +
                         std::to_string(horizon_cap) + "; required horizon " +
                         std::to_string(horizon));

    std::vector<double> g(horizon);
    for (std::size_t t = 0; t < horizon; ++t)
        g[t] = evaluate_modes(modes, t);
    return ImpulseResponse(std::move(g), tail_tol);
}

[[nodiscard]] inline ImpulseResponse
build_impulse_response(const std::vector<Mode>& modes, double tail_tol = kDefaultTailTolerance,
                       std::size_t horizon_cap = kDefaultHorizonCap) {
    return build_impulse_response(std::span<const Mode>(modes), tail_tol, horizon_cap);
}

// =============================================================================
// Certification
// =============================================================================

[[nodiscard]] inline Certified<OpponentCertificate>
certify_opponent(const ImpulseResponse& g, double sign_tol = kSignTolerance) {
    const auto v = g.values();
    if (v.empty() || v[0] <= sign_tol)
        return Violation{0, "g(0) is not positive"};
    std::size_t tau0 = 0;
    for (std::size_t t = 1; t < v.size(); ++t) {
        if (v[t] <= sign_tol) {
            tau0 = t;
            break;
        }
    }
    if (tau0 == 0)
        return Violation{v.size() - 1, "no tau0 found: g never becomes <= 0"};
    for (std::size_t t = tau0; t < v.size(); ++t)
        if (v[t] > sign_tol)
            return Violation{t, "g turns positive again after tau0 = " + std::to_string(tau0)};
    return OpponentCertificate{tau0};
}

/**
 * Feasible alpha interval for the linearly-progressing condition:
 *   g(t+1) <= alpha g(t)        for t < tau0 - 1
 *   |g(t+1)| >= alpha |g(t)|    for tau0 <= t < H - 1
 * The crossover index tau0 - 1 carries no constraint.
 */
[[nodiscard]] inline Certified<LpopCertificate>
certify_lpop(const ImpulseResponse& g, double sign_tol = kSignTolerance) {
    auto opp = certify_opponent(g, sign_tol);
    if (auto* bad = std::get_if<Violation>(&opp))
        return *bad;
    const std::size_t tau0 = std::get<OpponentCertificate>(opp).tau0;
    const auto v = g.values();
    const std::size_t h = v.size();

    LpopCertificate cert{tau0, 0.0, std::nextafter(1.0, 0.0), {}};
    for (std::size_t t = 0; t + 1 < tau0; ++t)
        cert.alpha_lo = std::max(cert.alpha_lo, v[t + 1] / v[t]);
    for (std::size_t t = tau0; t + 1 < h; ++t) {
        if (std::abs(v[t]) <= sign_tol) {
            cert.skipped.push_back(t);
            continue;
        }
        cert.alpha_hi = std::min(cert.alpha_hi, std::abs(v[t + 1]) / std::abs(v[t]));
    }
    if (cert.alpha_lo >= 1.0)
        return Violation{0, "A-process does not decay: alpha_lo >= 1"};
    if (cert.alpha_lo > cert.alpha_hi)
        return Violation{tau0, "no feasible alpha: alpha_lo > alpha_hi"};
    return cert;
}

/// The three mode conditions under which a sum of geometric modes is an LPOP.
struct ModeConditions {
    bool decay_ordering; ///< max positive-mode decay <= min negative-mode decay
    bool positive_sum;   ///< sum of coefficients > 0
    bool turns_negative; ///< some g(t) <= 0 within the horizon
    double lambda_minus_min; ///< min decay over negative-coefficient modes (1 if none)

    [[nodiscard]] bool all() const noexcept {
        return decay_ordering && positive_sum && turns_negative;
    }
};

[[nodiscard]] inline ModeConditions check_mode_conditions(std::span<const Mode> modes,
                                                          const ImpulseResponse& g) {
    double pos_max = 0.0;
    double neg_min = 1.0;
    double sum = 0.0;
    for (const auto& m : modes) {
        sum += m.coefficient;
        if (m.coefficient >= 0.0)
            pos_max = std::max(pos_max, m.decay);
        else
            neg_min = std::min(neg_min, m.decay);
    }
    const auto v = g.values();
    const bool turns = std::any_of(v.begin(), v.end(), [](double x) { return x <= 0.0; });
    return {pos_max <= neg_min, sum > 0.0, turns, neg_min};
}

// =============================================================================
// Coarsening
// =============================================================================

/// Block-average the kernel: g'(t) = block^-1 * sum_{t' in block t} g(t').
/// The last block may be partial; missing entries count as zero.
[[nodiscard]] inline ImpulseResponse coarsen(const ImpulseResponse& g, std::size_t block) {
    if (block == 0)
        throw ModelError("coarsening block must be positive");
    if (block >= g.horizon() && block != 1)
        throw ModelError("coarsening block must be shorter than the horizon");
    if (block == 1)
        return g;
    const auto v = g.values();
    const std::size_t blocks = (v.size() + block - 1) / block;
    std::vector<double> out(blocks, 0.0);
    for (std::size_t t = 0; t < v.size(); ++t)
        out[t / block] += v[t];
    for (auto& x : out)
        x /= static_cast<double>(block);
    return ImpulseResponse(std::move(out), g.tail_tol());
}

// =============================================================================
// Generalized (nonlinear) responses
// =============================================================================

/**
 * Per-lag nonlinear response g(k, u) with caller-supplied slope bounds
 * du_lo(k) <= d/du g(k, u) <= du_hi(k) on [0, dose_cap].
 */
struct GeneralizedResponse {
    std::function<double(std::size_t, double)> eval;
    std::vector<double> du_lo;
    std::vector<double> du_hi;
    double dose_cap = 1.0;

    [[nodiscard]] std::size_t horizon() const noexcept { return du_lo.size(); }

    /// sum_{k>=lag_offset} g(k, doses[n-1-(k-lag_offset)]) over the known lags.
    [[nodiscard]] double convolve(std::span<const double> doses,
                                  std::size_t lag_offset = 0) const {
        const std::size_t n = doses.size();
        const std::size_t h = horizon();
        if (lag_offset >= h)
            return 0.0;
        const std::size_t terms = std::min(n, h - lag_offset);
        double acc = 0.0;
        for (std::size_t j = 0; j < terms; ++j)
            acc += eval(lag_offset + j, doses[n - 1 - j]);
        return acc;
    }
};

/// The linear special case g(k, u) = g(k) * u.
[[nodiscard]] inline GeneralizedResponse linear_response(const ImpulseResponse& g,
                                                         double dose_cap) {
    std::vector<double> slopes(g.values().begin(), g.values().end());
    return GeneralizedResponse{
        [g](std::size_t k, double u) { return g(k) * u; }, slopes, slopes, dose_cap};
}

/**
 * Generalized opponent-process and G-LPOP check on the slope bounds.
 *
 * Sign conditions: before tau0, g(k, .) >= 0 with du_lo >= 0; from tau0 on,
 * g(k, .) <= 0 with du_hi <= 0. Ratio conditions:
 *   du_hi(t+1) <= alpha du_lo(t)     for t < tau0 - 1
 *   du_hi(t+1) <= alpha du_lo(t)     for t >= tau0   (|du_hi(t+1)| >= alpha |du_lo(t)|)
 */
[[nodiscard]] inline Certified<LpopCertificate>
certify_g_lpop(const GeneralizedResponse& gr, std::size_t horizon,
               double sign_tol = kSignTolerance) {
    if (gr.du_lo.size() < horizon || gr.du_hi.size() < horizon || horizon == 0)
        throw ModelError("slope bounds missing for requested horizon");
    if (!gr.eval)
        throw ModelError("generalized response has no evaluator");
    const auto& lo = gr.du_lo;
    const auto& hi = gr.du_hi;

    if (hi[0] <= sign_tol)
        return Violation{0, "no initial positive response"};
    std::size_t tau0 = 0;
    for (std::size_t k = 1; k < horizon; ++k) {
        if (hi[k] <= sign_tol) {
            tau0 = k;
            break;
        }
    }
    if (tau0 == 0)
        return Violation{horizon - 1, "no tau0 found: slopes never become <= 0"};
    for (std::size_t k = 0; k < horizon; ++k) {
        const double g_cap = gr.eval(k, gr.dose_cap);
        if (k < tau0) {
            if (lo[k] < -sign_tol || g_cap < -sign_tol)
                return Violation{k, "A-process lag is not non-decreasing and non-negative"};
        } else if (hi[k] > sign_tol || g_cap > sign_tol) {
            return Violation{k, "B-process lag is not non-increasing and non-positive"};
        }
    }

    LpopCertificate cert{tau0, 0.0, std::nextafter(1.0, 0.0), {}};
    for (std::size_t t = 0; t + 1 < tau0; ++t) {
        if (lo[t] <= sign_tol) {
            if (hi[t + 1] > sign_tol)
                return Violation{t, "zero slope bound cannot dominate the next lag"};
            cert.skipped.push_back(t);
            continue;
        }
        cert.alpha_lo = std::max(cert.alpha_lo, hi[t + 1] / lo[t]);
    }
    for (std::size_t t = tau0; t + 1 < horizon; ++t) {
        if (std::abs(lo[t]) <= sign_tol) {
            cert.skipped.push_back(t);
            continue;
        }
        cert.alpha_hi = std::min(cert.alpha_hi, std::abs(hi[t + 1]) / std::abs(lo[t]));
    }
    if (cert.alpha_lo >= 1.0)
        return Violation{0, "A-process slopes do not decay: alpha_lo >= 1"};
    if (cert.alpha_lo > cert.alpha_hi)
        return Violation{tau0, "no feasible alpha: alpha_lo > alpha_hi"};
    return cert;
}

} // namespace taper
