// JSON spec files and CSV output.
#pragma once

#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "taper/dynamics.hpp"
#include "taper/models.hpp"
#include "taper/protocols.hpp"

namespace taper {

using json = nlohmann::json;

/// Malformed or unreadable input; `where()` names the line/field at fault.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(where) {}
    [[nodiscard]] const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

// =============================================================================
// Text helpers
// =============================================================================

/// Shortest round-trip decimal form; output is stable across runs.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

[[nodiscard]] inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError(path, "cannot open file");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

/// Parse JSON text, mapping byte offsets in syntax errors to line:column.
[[nodiscard]] inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(col),
                         "invalid JSON");
    }
}

namespace detail {

[[nodiscard]] inline const json& field(const json& obj, const char* key, const std::string& ctx) {
    if (!obj.is_object())
        throw ParseError(ctx, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError(ctx + "." + key, "missing field");
    return *it;
}

[[nodiscard]] inline double number(const json& obj, const char* key, const std::string& ctx) {
    const auto& v = field(obj, key, ctx);
    if (!v.is_number())
        throw ParseError(ctx + "." + key, "expected a number");
    return v.get<double>();
}

[[nodiscard]] inline double number_or(const json& obj, const char* key, double fallback,
                                      const std::string& ctx) {
    if (!obj.contains(key))
        return fallback;
    return number(obj, key, ctx);
}

[[nodiscard]] inline std::optional<double> optional_number(const json& obj, const char* key,
                                                           const std::string& ctx) {
    if (!obj.contains(key) || obj.at(key).is_null())
        return std::nullopt;
    return number(obj, key, ctx);
}

[[nodiscard]] inline std::string string_field(const json& obj, const char* key,
                                              const std::string& ctx) {
    const auto& v = field(obj, key, ctx);
    if (!v.is_string())
        throw ParseError(ctx + "." + key, "expected a string");
    return v.get<std::string>();
}

[[nodiscard]] inline std::vector<double> number_array(const json& v, const std::string& ctx) {
    if (!v.is_array())
        throw ParseError(ctx, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number())
            throw ParseError(ctx + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

} // namespace detail

// =============================================================================
// System spec: {"modes": [{"c", "lambda"}...], "tail_tol"} or {"kernel": [...]}
// =============================================================================

struct SystemSpec {
    std::vector<Mode> modes{}; ///< empty for explicit kernels
    double tail_tol = kDefaultTailTolerance;
    std::vector<double> kernel{};

    [[nodiscard]] ImpulseResponse response() const {
        if (!modes.empty())
            return build_impulse_response(modes, tail_tol);
        return ImpulseResponse(kernel);
    }
};

[[nodiscard]] inline SystemSpec system_spec_from_json(const json& j, const std::string& ctx) {
    SystemSpec spec;
    if (!j.is_object())
        throw ParseError(ctx, "expected an object");
    if (j.contains("modes")) {
        const auto& arr = j.at("modes");
        if (!arr.is_array() || arr.empty())
            throw ParseError(ctx + ".modes", "expected a nonempty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string mctx = ctx + ".modes[" + std::to_string(i) + "]";
            spec.modes.push_back(
                {detail::number(arr[i], "c", mctx), detail::number(arr[i], "lambda", mctx)});
        }
        spec.tail_tol = detail::number_or(j, "tail_tol", kDefaultTailTolerance, ctx);
    } else if (j.contains("kernel")) {
        spec.kernel = detail::number_array(j.at("kernel"), ctx + ".kernel");
        if (spec.kernel.empty())
            throw ParseError(ctx + ".kernel", "kernel is empty");
    } else {
        throw ParseError(ctx, "expected \"modes\" or \"kernel\"");
    }
    return spec;
}

[[nodiscard]] inline json to_json(const SystemSpec& s) {
    json j;
    if (!s.modes.empty()) {
        j["modes"] = json::array();
        for (const auto& m : s.modes)
            j["modes"].push_back({{"c", m.coefficient}, {"lambda", m.decay}});
        j["tail_tol"] = s.tail_tol;
    } else {
        j["kernel"] = s.kernel;
    }
    return j;
}

[[nodiscard]] inline SystemSpec load_system_spec(const std::string& path) {
    return system_spec_from_json(parse_json(read_file(path), path), path);
}

// =============================================================================
// Policy spec: {"type": "integral" | "med" | "linear" | "exponential" | "fixed", ...}
// =============================================================================

[[nodiscard]] inline TaperPolicy policy_from_json(const json& j, const std::string& ctx) {
    const std::string type = detail::string_field(j, "type", ctx);
    if (type == "integral") {
        IntegralPolicy p;
        p.k_plus = detail::number(j, "k_plus", ctx);
        p.k_minus = detail::number(j, "k_minus", ctx);
        p.delta = detail::number_or(j, "delta", 0.0, ctx);
        p.u_init = detail::optional_number(j, "u_init", ctx);
        p.dose_cap = detail::optional_number(j, "dose_cap", ctx);
        return p;
    }
    if (type == "med") {
        MedPolicy p;
        const std::string bound = j.contains("bound") ? detail::string_field(j, "bound", ctx)
                                                      : std::string("clairvoyant");
        if (bound == "clairvoyant")
            p.bound = NatBoundMode::clairvoyant;
        else if (bound == "monotone")
            p.bound = NatBoundMode::monotone;
        else if (bound == "lipschitz")
            p.bound = NatBoundMode::lipschitz;
        else
            throw ParseError(ctx + ".bound", "unknown bound mode '" + bound + "'");
        p.l_nat = detail::number_or(j, "l_nat", 0.0, ctx);
        return p;
    }
    if (type == "linear")
        return LinearPolicy{detail::number_or(j, "u0", 1.0, ctx), detail::number(j, "rate", ctx)};
    if (type == "exponential")
        return ExponentialPolicy{detail::number_or(j, "u0", 1.0, ctx),
                                 detail::number(j, "rate", ctx)};
    if (type == "fixed")
        return FixedPolicy{detail::number(j, "u", ctx)};
    throw ParseError(ctx + ".type", "unknown policy type '" + type + "'");
}

[[nodiscard]] inline json to_json(const TaperPolicy& policy) {
    return std::visit(
        [](const auto& p) -> json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, IntegralPolicy>) {
                json j{{"type", "integral"},
                       {"k_plus", p.k_plus},
                       {"k_minus", p.k_minus},
                       {"delta", p.delta}};
                if (p.u_init)
                    j["u_init"] = *p.u_init;
                if (p.dose_cap)
                    j["dose_cap"] = *p.dose_cap;
                return j;
            } else if constexpr (std::is_same_v<P, MedPolicy>) {
                const char* b = p.bound == NatBoundMode::clairvoyant ? "clairvoyant"
                                : p.bound == NatBoundMode::monotone  ? "monotone"
                                                                     : "lipschitz";
                return {{"type", "med"}, {"bound", b}, {"l_nat", p.l_nat}};
            } else if constexpr (std::is_same_v<P, LinearPolicy>) {
                return {{"type", "linear"}, {"u0", p.u0}, {"rate", p.rate}};
            } else if constexpr (std::is_same_v<P, ExponentialPolicy>) {
                return {{"type", "exponential"}, {"u0", p.u0}, {"rate", p.rate}};
            } else {
                return {{"type", "fixed"}, {"u", p.u}};
            }
        },
        policy);
}

// =============================================================================
// Natural progression and noise specs
// =============================================================================

[[nodiscard]] inline NaturalProgression progression_from_json(const json& j,
                                                              const std::string& ctx) {
    const std::string kind = detail::string_field(j, "kind", ctx);
    const double base = detail::number_or(j, "base", 0.0, ctx);
    if (kind == "constant")
        return NaturalProgression::constant(base);
    if (kind == "monotone_drift")
        return NaturalProgression::monotone(base, detail::number(j, "drift", ctx));
    if (kind == "lipschitz_drift")
        return NaturalProgression::lipschitz(base, detail::number(j, "l_nat", ctx));
    if (kind == "custom_sequence")
        return NaturalProgression::custom(
            detail::number_array(detail::field(j, "sequence", ctx), ctx + ".sequence"));
    throw ParseError(ctx + ".kind", "unknown progression kind '" + kind + "'");
}

[[nodiscard]] inline json to_json(const NaturalProgression& p) {
    using K = NaturalProgression::Kind;
    switch (p.kind) {
    case K::constant: return {{"kind", "constant"}, {"base", p.base}};
    case K::monotone_drift:
        return {{"kind", "monotone_drift"}, {"base", p.base}, {"drift", p.drift}};
    case K::lipschitz_drift:
        return {{"kind", "lipschitz_drift"}, {"base", p.base}, {"l_nat", p.l_nat}};
    case K::custom_sequence: return {{"kind", "custom_sequence"}, {"sequence", p.sequence}};
    }
    return {};
}

[[nodiscard]] inline NoiseSpec noise_from_json(const json& j, const std::string& ctx) {
    const std::string kind = detail::string_field(j, "kind", ctx);
    if (kind == "none")
        return NoiseSpec::none();
    if (kind == "uniform") {
        const auto& s = j.contains("seed") ? j.at("seed") : json(0);
        if (!s.is_number_unsigned() && !s.is_number_integer())
            throw ParseError(ctx + ".seed", "expected an integer");
        return NoiseSpec::uniform(detail::number(j, "half_width", ctx), s.get<std::uint64_t>());
    }
    throw ParseError(ctx + ".kind", "unknown noise kind '" + kind + "'");
}

[[nodiscard]] inline json to_json(const NoiseSpec& n) {
    if (n.kind == NoiseSpec::Kind::none)
        return {{"kind", "none"}};
    return {{"kind", "uniform"}, {"half_width", n.half_width}, {"seed", n.seed}};
}

[[nodiscard]] inline json to_json(const LpopCertificate& c) {
    return {{"lpop", true},
            {"tau0", c.tau0},
            {"alpha_lo", c.alpha_lo},
            {"alpha_hi", c.alpha_hi},
            {"skipped_indices", c.skipped}};
}

[[nodiscard]] inline json to_json(const Violation& v) {
    return {{"lpop", false}, {"index", v.index}, {"reason", v.reason}};
}

[[nodiscard]] inline json to_json(const TraceMetrics& m) {
    json j{{"avg_cum_dose", m.avg_cum_dose},
           {"avg_cum_violation", m.avg_cum_violation},
           {"fully_tapered", m.fully_tapered},
           {"taper_time", m.taper_time ? json(*m.taper_time) : json(nullptr)},
           {"long_term_violation", m.long_term_violation}};
    if (m.warmup_only)
        j["annotation"] = "warmup-only: zero-length taper window";
    return j;
}

// =============================================================================
// CSV
// =============================================================================

/// Columns t, u, y, y_nat, y_min, phase; u and y_min are empty where undefined.
[[nodiscard]] inline std::string trace_csv(const SimulationTrace& tr,
                                           const std::string& unit = {}) {
    std::ostringstream out;
    if (unit.empty())
        out << "t,u,y,y_nat,y_min,phase\n";
    for (std::size_t t = 0; t < tr.wellbeing.size(); ++t) {
        if (!unit.empty())
            out << unit << ',';
        out << t << ',';
        if (t < tr.doses.size())
            out << format_double(tr.doses[t]);
        out << ',' << format_double(tr.wellbeing[t]) << ',' << format_double(tr.nat[t]) << ',';
        if (t >= tr.warmup_len)
            out << format_double(tr.y_min[std::min(t - tr.warmup_len, tr.y_min.size() - 1)]);
        out << ',' << (t < tr.warmup_len ? "warmup" : "taper") << '\n';
    }
    return out.str();
}

} // namespace taper
