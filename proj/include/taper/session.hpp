// Interactive tapering sessions persisted as append-only JSON-lines event logs.
#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include "taper/hash.hpp"
#include "taper/io.hpp"
#include "taper/oracles.hpp"
#include "taper/protocols.hpp"

namespace taper::session {

namespace fs = std::filesystem;

/// Error with an HTTP status and a stable machine-readable code.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, std::string code, const std::string& detail)
        : std::runtime_error(detail), status_(status), code_(std::move(code)) {}
    [[nodiscard]] int status() const noexcept { return status_; }
    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    int status_;
    std::string code_;
};

// =============================================================================
// State
// =============================================================================

struct SessionConfig {
    double k_plus = 0.0;
    double k_minus = 0.0;
    double delta = 0.0;
    double y_min = 0.0;
    double u_init = 0.0;
    std::optional<double> dose_cap{};
    double step_seconds = 86400.0; ///< expected spacing between measurements, for gap flags
};

enum class Status { active, completed, aborted };

[[nodiscard]] inline const char* status_name(Status s) {
    switch (s) {
    case Status::active: return "active";
    case Status::completed: return "completed";
    case Status::aborted: return "aborted";
    }
    return "?";
}

struct Measurement {
    std::size_t step;
    double y;
    double timestamp;
    std::string token;
    double y_min;     ///< constraint in effect for this step
    double delta;     ///< padding in effect for this step
    double u_prev;    ///< dose before this step
    double dose;      ///< issued recommendation
    bool capped;
    std::size_t gap_steps; ///< missed protocol steps before this measurement
};

struct ConstraintChange {
    std::size_t effective_step;
    double y_min;
    double delta;
    double timestamp;
};

struct SessionState {
    std::string id;
    SessionConfig config;
    std::string secret_sha256;
    double created_at = 0.0;
    double y_min = 0.0; ///< current constraint
    double delta = 0.0; ///< current padding
    double u_prev = 0.0;
    Status status = Status::active;
    std::string abort_reason{};
    std::vector<Measurement> measurements{};
    std::vector<ConstraintChange> constraint_log{};
    std::size_t events = 0;
};

struct Recommendation {
    double dose;
    bool capped;
};

/// Integral-law dose with the session's current constraint and an optional cap.
[[nodiscard]] inline Recommendation recommend(const SessionConfig& cfg, double u_prev, double y,
                                              double y_min, double delta) {
    double u = integral_dose(u_prev, y, y_min, cfg.k_plus, cfg.k_minus, delta);
    if (cfg.dose_cap && u > *cfg.dose_cap)
        return {*cfg.dose_cap, true};
    return {u, false};
}

inline void validate(const SessionConfig& c) {
    auto bad = [](const std::string& m) { return ServiceError(422, "invalid_config", m); };
    if (!(c.k_plus > 0.0) || !std::isfinite(c.k_plus))
        throw bad("K+ must be finite and > 0");
    if (!(c.k_minus > 0.0) || !std::isfinite(c.k_minus))
        throw bad("K- must be finite and > 0");
    if (c.k_minus < c.k_plus)
        throw bad("K- must be >= K+ (K+ = " + format_double(c.k_plus) +
                  ", K- = " + format_double(c.k_minus) + ")");
    if (!std::isfinite(c.delta) || !std::isfinite(c.y_min))
        throw bad("y_min and delta must be finite");
    if (!(c.u_init >= 0.0) || !std::isfinite(c.u_init))
        throw bad("u_init must be finite and >= 0");
    if (c.dose_cap && !(*c.dose_cap > 0.0))
        throw bad("dose cap must be > 0");
    if (!(c.step_seconds > 0.0))
        throw bad("step_seconds must be > 0");
}

// =============================================================================
// JSON
// =============================================================================

[[nodiscard]] inline json to_json(const SessionConfig& c) {
    json j{{"k_plus", c.k_plus},   {"k_minus", c.k_minus}, {"delta", c.delta},
           {"y_min", c.y_min},     {"u_init", c.u_init},   {"step_seconds", c.step_seconds},
           {"dose_cap", c.dose_cap ? json(*c.dose_cap) : json(nullptr)}};
    return j;
}

[[nodiscard]] inline SessionConfig config_from_json(const json& j) {
    SessionConfig c;
    c.k_plus = j.at("k_plus").get<double>();
    c.k_minus = j.at("k_minus").get<double>();
    c.delta = j.value("delta", 0.0);
    c.y_min = j.at("y_min").get<double>();
    c.u_init = j.value("u_init", 0.0);
    c.step_seconds = j.value("step_seconds", 86400.0);
    if (j.contains("dose_cap") && !j["dose_cap"].is_null())
        c.dose_cap = j["dose_cap"].get<double>();
    return c;
}

/**
 * Config from a create request. Gains come either explicitly
 * ({"k_plus", "k_minus"}), from a g(0) range ({"g0_lo", "g0_hi"}), or from the
 * rule of thumb ({"dose_step", "dy_lo", "dy_hi"}).
 */
[[nodiscard]] inline SessionConfig config_from_request(const json& j) {
    auto bad = [](const std::string& m) { return ServiceError(422, "invalid_config", m); };
    if (!j.is_object())
        throw ServiceError(400, "invalid_request", "request body must be a JSON object");
    auto num = [&](const char* k) {
        if (!j.contains(k) || !j[k].is_number())
            throw bad(std::string("missing numeric field '") + k + "'");
        return j[k].get<double>();
    };
    SessionConfig c;
    try {
        Gains k{};
        if (j.contains("k_plus") || j.contains("k_minus")) {
            k = {num("k_plus"), num("k_minus")};
        } else if (j.contains("g0_lo")) {
            k = gains_from_g0_range(num("g0_lo"), num("g0_hi"));
        } else if (j.contains("dose_step")) {
            k = gains_from_rule_of_thumb(num("dose_step"), num("dy_lo"), num("dy_hi"));
        } else {
            throw bad("gains required: k_plus/k_minus, g0_lo/g0_hi, or dose_step/dy_lo/dy_hi");
        }
        c.k_plus = k.k_plus;
        c.k_minus = k.k_minus;
    } catch (const PolicyError& e) {
        throw bad(e.what());
    }
    c.y_min = num("y_min");
    c.delta = j.contains("delta") ? num("delta") : 0.0;
    c.u_init = j.contains("u_init") ? num("u_init") : 0.0;
    c.step_seconds = j.contains("step_seconds") ? num("step_seconds") : 86400.0;
    if (j.contains("dose_cap") && !j["dose_cap"].is_null())
        c.dose_cap = num("dose_cap");
    validate(c);
    return c;
}

[[nodiscard]] inline json to_json(const Measurement& m) {
    return {{"step", m.step},         {"y", m.y},           {"timestamp", m.timestamp},
            {"token", m.token},       {"y_min", m.y_min},   {"delta", m.delta},
            {"u_prev", m.u_prev},     {"dose", m.dose},     {"capped", m.capped},
            {"gap_steps", m.gap_steps}};
}

/// Running long-term margins over measurements y_0..y_T; empty until two exist.
struct Margins {
    std::optional<double> vs_y_min;
    std::optional<double> vs_setpoint;
};

/**
 * Margin (sum_{t=1}^T y_t)/T - y_min + (y_0 - y_min)/T, generalized to a
 * changing constraint by using the y_min in effect at each step.
 */
[[nodiscard]] inline Margins running_margins(const SessionState& s) {
    Margins m;
    if (s.measurements.size() < 2)
        return m;
    std::vector<double> y;
    std::vector<double> path{s.measurements.front().y_min};
    std::vector<double> padded{s.measurements.front().y_min + s.measurements.front().delta};
    for (const auto& x : s.measurements) {
        y.push_back(x.y);
        path.push_back(x.y_min);
        padded.push_back(x.y_min + x.delta);
    }
    m.vs_y_min = oracles::theorem2_margins(y, path, 0.0).back();
    m.vs_setpoint = oracles::theorem2_margins(y, padded, 0.0).back();
    return m;
}

[[nodiscard]] inline json history_json(const SessionState& s) {
    json meas = json::array();
    json recs = json::array();
    for (const auto& m : s.measurements) {
        meas.push_back(to_json(m));
        recs.push_back({{"step", m.step}, {"dose", m.dose}, {"capped", m.capped}});
    }
    json changes = json::array();
    for (const auto& c : s.constraint_log)
        changes.push_back({{"effective_step", c.effective_step},
                           {"y_min", c.y_min},
                           {"delta", c.delta},
                           {"timestamp", c.timestamp}});
    const auto margins = running_margins(s);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"id", s.id},
            {"status", status_name(s.status)},
            {"config", to_json(s.config)},
            {"created_at", s.created_at},
            {"y_min", s.y_min},
            {"delta", s.delta},
            {"u_prev", s.u_prev},
            {"measurements", meas},
            {"recommendations", recs},
            {"constraint_changes", changes},
            {"theorem2_margin", opt(margins.vs_y_min)},
            {"theorem2_margin_padded", opt(margins.vs_setpoint)},
            {"abort_reason", s.abort_reason}};
}

// =============================================================================
// Events
// =============================================================================

/// Apply one logged event; measurement doses are taken from the log.
inline void apply_event(SessionState& s, const json& ev) {
    const std::string type = ev.at("type").get<std::string>();
    if (type == "created") {
        s.id = ev.at("id").get<std::string>();
        s.config = config_from_json(ev.at("config"));
        s.secret_sha256 = ev.value("secret_sha256", "");
        s.created_at = ev.value("timestamp", 0.0);
        s.y_min = s.config.y_min;
        s.delta = s.config.delta;
        s.u_prev = s.config.u_init;
    } else if (type == "measurement") {
        Measurement m;
        m.step = ev.at("step").get<std::size_t>();
        m.y = ev.at("y").get<double>();
        m.timestamp = ev.value("timestamp", 0.0);
        m.token = ev.value("token", "");
        m.y_min = ev.at("y_min").get<double>();
        m.delta = ev.at("delta").get<double>();
        m.u_prev = ev.at("u_prev").get<double>();
        m.dose = ev.at("dose").get<double>();
        m.capped = ev.value("capped", false);
        m.gap_steps = ev.value("gap_steps", std::size_t{0});
        s.u_prev = m.dose;
        s.measurements.push_back(std::move(m));
    } else if (type == "constraint") {
        ConstraintChange c{ev.at("effective_step").get<std::size_t>(),
                           ev.at("y_min").get<double>(), ev.at("delta").get<double>(),
                           ev.value("timestamp", 0.0)};
        s.y_min = c.y_min;
        s.delta = c.delta;
        s.constraint_log.push_back(c);
    } else if (type == "completed") {
        s.status = Status::completed;
    } else if (type == "aborted") {
        s.status = Status::aborted;
        s.abort_reason = ev.value("reason", "");
    } else {
        throw ServiceError(500, "corrupt_log", "unknown event type '" + type + "'");
    }
    ++s.events;
}

struct ReplayReport {
    bool consistent = true;
    std::size_t measurements = 0;
    std::optional<std::size_t> first_mismatch{};
    std::string detail{};
};

/**
 * Recompute every recommendation from the event log with the integral law and compare it
 * with the logged dose, bit for bit.
 */
[[nodiscard]] inline ReplayReport verify_replay(const std::vector<json>& events) {
    ReplayReport r;
    SessionState s;
    for (const auto& ev : events) {
        if (ev.at("type") == "measurement") {
            const double y = ev.at("y").get<double>();
            const auto rec = recommend(s.config, s.u_prev, y, s.y_min, s.delta);
            const std::size_t step = r.measurements++;
            const bool same = rec.dose == ev.at("dose").get<double>() &&
                              s.u_prev == ev.at("u_prev").get<double>() &&
                              s.y_min == ev.at("y_min").get<double>() &&
                              s.delta == ev.at("delta").get<double>();
            if (!same && r.consistent) {
                r.consistent = false;
                r.first_mismatch = step;
                r.detail = "step " + std::to_string(step) + ": replay gives " +
                           format_double(rec.dose) + ", log has " +
                           format_double(ev.at("dose").get<double>());
            }
        }
        apply_event(s, ev);
    }
    return r;
}

// =============================================================================
// Persistence
// =============================================================================

namespace detail {

inline void fsync_path(const fs::path& p, int flags) {
    const int fd = ::open(p.c_str(), flags);
    if (fd < 0)
        throw ServiceError(500, "storage_failure", "cannot open " + p.string());
    ::fsync(fd);
    ::close(fd);
}

/// Append one line and fsync before returning.
inline void append_durable(const fs::path& p, const std::string& line) {
    const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0)
        throw ServiceError(500, "storage_failure", "cannot open " + p.string());
    const std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            ::close(fd);
            throw ServiceError(500, "storage_failure", "write failed on " + p.string());
        }
        off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        throw ServiceError(500, "storage_failure", "fsync failed on " + p.string());
    }
    ::close(fd);
}

/// Write via a temporary file and rename.
inline void write_atomic(const fs::path& p, const std::string& content) {
    const fs::path tmp = p.string() + ".tmp";
    {
        const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd < 0)
            throw ServiceError(500, "storage_failure", "cannot open " + tmp.string());
        const ssize_t n = ::write(fd, content.data(), content.size());
        const bool ok = n == static_cast<ssize_t>(content.size()) && ::fsync(fd) == 0;
        ::close(fd);
        if (!ok)
            throw ServiceError(500, "storage_failure", "write failed on " + tmp.string());
    }
    fs::rename(tmp, p);
    fsync_path(p.parent_path(), O_RDONLY | O_DIRECTORY);
}

/**
 * Read the event log. A final line without a newline that fails to parse is a
 * torn write whose response was never sent; it is truncated away. A complete
 * final line that only lacks its newline is kept, and the newline is added.
 */
[[nodiscard]] inline std::vector<json> read_events(const fs::path& p) {
    std::vector<json> out;
    if (!fs::exists(p))
        return out;
    const std::string text = read_file(p.string());
    std::string kept;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            const std::string tail = text.substr(pos);
            try {
                out.push_back(json::parse(tail));
                kept += tail + "\n";
            } catch (const json::parse_error&) {
            }
            break;
        }
        const std::string line = text.substr(pos, nl - pos);
        if (!line.empty()) {
            try {
                out.push_back(json::parse(line));
            } catch (const json::parse_error&) {
                throw ServiceError(500, "corrupt_log", "unparseable event in " + p.string());
            }
        }
        kept += text.substr(pos, nl - pos + 1);
        pos = nl + 1;
    }
    if (kept != text)
        write_atomic(p, kept);
    return out;
}

} // namespace detail

using Clock = std::function<double()>;

[[nodiscard]] inline double system_clock_seconds() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct SubmitResult {
    Measurement measurement;
    bool duplicate = false;
    bool increase = false;
};

struct WhatIfQuery {
    std::optional<double> y{};
    std::optional<double> y_min{};
    std::optional<double> delta{};
    bool replace_last = false; ///< re-evaluate the last committed step instead of the next one
};

struct CreateResult {
    std::string id;
    std::string secret;
    json state;
};

/**
 * Sessions under a root directory, one subdirectory each with events.jsonl and
 * snapshot.json. Commits are serialized per session; reads and what-ifs share
 * the session lock.
 */
class SessionStore {
public:
    explicit SessionStore(fs::path root, Clock clock = system_clock_seconds,
                          std::size_t snapshot_every = 16)
        : root_(std::move(root)), clock_(std::move(clock)), snapshot_every_(snapshot_every) {
        fs::create_directories(root_);
    }

    [[nodiscard]] const fs::path& root() const noexcept { return root_; }

    CreateResult create(const SessionConfig& cfg) {
        validate(cfg);
        const std::string id = random_hex(16);
        const std::string secret = random_hex(32);
        const fs::path dir = root_ / id;
        fs::create_directories(dir);
        json ev{{"type", "created"},
                {"id", id},
                {"config", to_json(cfg)},
                {"secret_sha256", sha256_hex(secret)},
                {"timestamp", clock_()}};
        detail::append_durable(dir / "events.jsonl", ev.dump());
        detail::fsync_path(root_, O_RDONLY | O_DIRECTORY);
        auto entry = std::make_shared<Entry>();
        apply_event(entry->state, ev);
        {
            std::lock_guard lock(map_mu_);
            sessions_[id] = entry;
        }
        return {id, secret, history_json(entry->state)};
    }

    SubmitResult submit(const std::string& id, const std::string& secret, double y,
                        const std::string& token) {
        if (!std::isfinite(y))
            throw ServiceError(400, "invalid_request", "y must be finite");
        auto e = open(id, secret);
        std::unique_lock lock(e->mu);
        auto& s = e->state;
        if (!token.empty())
            for (const auto& m : s.measurements)
                if (m.token == token) {
                    if (m.y != y)
                        throw ServiceError(409, "token_conflict",
                                           "token already used with a different value");
                    return {m, true, m.dose > m.u_prev};
                }
        require_active(s);
        Measurement m;
        m.step = s.measurements.size();
        m.y = y;
        m.timestamp = clock_();
        m.token = token;
        m.y_min = s.y_min;
        m.delta = s.delta;
        m.u_prev = s.u_prev;
        const auto rec = recommend(s.config, s.u_prev, y, s.y_min, s.delta);
        m.dose = rec.dose;
        m.capped = rec.capped;
        m.gap_steps = 0;
        if (!s.measurements.empty()) {
            const double elapsed = m.timestamp - s.measurements.back().timestamp;
            const double steps = std::floor(elapsed / s.config.step_seconds + 0.5);
            if (steps > 1.0)
                m.gap_steps = static_cast<std::size_t>(steps) - 1;
        }
        json ev = to_json(m);
        ev["type"] = "measurement";
        commit(*e, ev);
        return {s.measurements.back(), false, m.dose > m.u_prev};
    }

    [[nodiscard]] json what_if(const std::string& id, const std::string& secret,
                               const WhatIfQuery& q) {
        auto e = open(id, secret);
        std::shared_lock lock(e->mu);
        const auto& s = e->state;
        double u_prev = s.u_prev;
        double y_min = s.y_min;
        double delta = s.delta;
        std::optional<double> y = q.y;
        if (q.replace_last) {
            if (s.measurements.empty())
                throw ServiceError(409, "no_measurements", "no committed step to re-evaluate");
            const auto& last = s.measurements.back();
            u_prev = last.u_prev;
            y_min = last.y_min;
            delta = last.delta;
            if (!y)
                y = last.y;
        } else if (!y) {
            if (s.measurements.empty())
                throw ServiceError(400, "invalid_request", "y is required before any measurement");
            y = s.measurements.back().y;
        }
        if (q.y_min)
            y_min = *q.y_min;
        if (q.delta)
            delta = *q.delta;
        if (!std::isfinite(*y) || !std::isfinite(y_min) || !std::isfinite(delta))
            throw ServiceError(400, "invalid_request", "what-if inputs must be finite");
        const auto rec = recommend(s.config, u_prev, *y, y_min, delta);
        return {{"hypothetical", true}, {"dose", rec.dose},   {"capped", rec.capped},
                {"u_prev", u_prev},     {"y", *y},            {"y_min", y_min},
                {"delta", delta},       {"replace_last", q.replace_last}};
    }

    ConstraintChange update_constraint(const std::string& id, const std::string& secret,
                                       std::optional<double> y_min, std::optional<double> delta) {
        if ((y_min && !std::isfinite(*y_min)) || (delta && !std::isfinite(*delta)))
            throw ServiceError(400, "invalid_request", "y_min and delta must be finite");
        if (!y_min && !delta)
            throw ServiceError(400, "invalid_request", "provide y_min and/or delta");
        auto e = open(id, secret);
        std::unique_lock lock(e->mu);
        auto& s = e->state;
        require_active(s);
        ConstraintChange c{s.measurements.size(), y_min.value_or(s.y_min),
                           delta.value_or(s.delta), clock_()};
        commit(*e, {{"type", "constraint"},
                    {"effective_step", c.effective_step},
                    {"y_min", c.y_min},
                    {"delta", c.delta},
                    {"timestamp", c.timestamp}});
        return c;
    }

    json complete(const std::string& id, const std::string& secret) {
        auto e = open(id, secret);
        std::unique_lock lock(e->mu);
        auto& s = e->state;
        require_active(s);
        if (s.measurements.empty() || s.u_prev != 0.0)
            throw ServiceError(409, "not_tapered",
                               "a session completes only after a zero-dose recommendation");
        commit(*e, {{"type", "completed"}, {"timestamp", clock_()}});
        return history_json(s);
    }

    json abort(const std::string& id, const std::string& secret, const std::string& reason) {
        auto e = open(id, secret);
        std::unique_lock lock(e->mu);
        require_active(e->state);
        commit(*e, {{"type", "aborted"}, {"reason", reason}, {"timestamp", clock_()}});
        return history_json(e->state);
    }

    [[nodiscard]] json history(const std::string& id, const std::string& secret) {
        auto e = open(id, secret);
        std::shared_lock lock(e->mu);
        return history_json(e->state);
    }

    [[nodiscard]] SessionState state(const std::string& id, const std::string& secret) {
        auto e = open(id, secret);
        std::shared_lock lock(e->mu);
        return e->state;
    }

    /// Raw event log of a session, as persisted.
    [[nodiscard]] std::vector<json> events(const std::string& id) const {
        check_id(id);
        return detail::read_events(root_ / id / "events.jsonl");
    }

    [[nodiscard]] std::vector<std::string> list_ids() const {
        std::vector<std::string> out;
        for (const auto& d : fs::directory_iterator(root_))
            if (d.is_directory() && fs::exists(d.path() / "events.jsonl"))
                out.push_back(d.path().filename().string());
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    struct Entry {
        std::shared_mutex mu;
        SessionState state;
    };

    static void check_id(const std::string& id) {
        if (id.empty() || id.size() > 64 ||
            id.find_first_not_of("0123456789abcdef") != std::string::npos)
            throw ServiceError(404, "unknown_session", "unknown session '" + id + "'");
    }

    static void require_active(const SessionState& s) {
        if (s.status != Status::active)
            throw ServiceError(409, "session_not_active",
                               std::string("session is ") + status_name(s.status));
    }

    std::shared_ptr<Entry> open(const std::string& id, const std::string& secret) {
        check_id(id);
        std::shared_ptr<Entry> e;
        {
            std::lock_guard lock(map_mu_);
            auto it = sessions_.find(id);
            if (it != sessions_.end()) {
                e = it->second;
            } else {
                e = load(id);
                sessions_[id] = e;
            }
        }
        if (sha256_hex(secret) != e->state.secret_sha256)
            throw ServiceError(403, "forbidden", "missing or wrong session secret");
        return e;
    }

    std::shared_ptr<Entry> load(const std::string& id) const {
        const fs::path dir = root_ / id;
        if (!fs::exists(dir / "events.jsonl"))
            throw ServiceError(404, "unknown_session", "unknown session '" + id + "'");
        const auto events = detail::read_events(dir / "events.jsonl");
        if (events.empty())
            throw ServiceError(404, "unknown_session", "session '" + id + "' has no events");
        auto e = std::make_shared<Entry>();
        std::size_t start = 0;
        const fs::path snap = dir / "snapshot.json";
        if (fs::exists(snap)) {
            try {
                const json j = json::parse(read_file(snap.string()));
                const std::size_t n = j.at("events").get<std::size_t>();
                // the snapshot is a cache of the log prefix; use it only when the log covers it
                if (n >= 1 && n <= events.size() && j.at("last_event") == events[n - 1]) {
                    for (std::size_t i = 0; i < n; ++i)
                        apply_event(e->state, events[i]);
                    start = n;
                }
            } catch (const std::exception&) {
                start = 0;
                e->state = SessionState{};
            }
        }
        if (start == 0)
            e->state = SessionState{};
        for (std::size_t i = start; i < events.size(); ++i)
            apply_event(e->state, events[i]);
        return e;
    }

    void commit(Entry& e, const json& ev) {
        const fs::path dir = root_ / e.state.id;
        detail::append_durable(dir / "events.jsonl", ev.dump());
        apply_event(e.state, ev);
        if (snapshot_every_ > 0 && e.state.events % snapshot_every_ == 0)
            detail::write_atomic(dir / "snapshot.json",
                                 json{{"events", e.state.events},
                                      {"last_event", ev},
                                      {"state", history_json(e.state)}}
                                     .dump());
    }

    static std::string random_hex(std::size_t chars) {
        static constexpr char hex[] = "0123456789abcdef";
        std::random_device rd;
        std::string out;
        while (out.size() < chars) {
            auto v = rd();
            for (int i = 0; i < 8 && out.size() < chars; ++i, v >>= 4)
                out.push_back(hex[v & 0xF]);
        }
        return out;
    }

    fs::path root_;
    Clock clock_;
    std::size_t snapshot_every_;
    std::mutex map_mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

} // namespace taper::session
