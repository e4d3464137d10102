// HTTP/JSON front end for SessionStore.
#pragma once

#include <string>

#include <httplib.h>

#include "taper/session.hpp"

namespace taper::session {

inline constexpr const char* kSecretHeader = "X-Session-Secret";

/// RFC 7807 problem document.
[[nodiscard]] inline json problem(int status, const std::string& code, const std::string& detail) {
    return {{"type", "urn:taper:error:" + code},
            {"title", httplib::status_message(status)},
            {"status", status},
            {"code", code},
            {"detail", detail}};
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_problem(httplib::Response& res, int status, const std::string& code,
                         const std::string& detail) {
    res.status = status;
    res.set_content(problem(status, code, detail).dump(), "application/problem+json");
}

[[nodiscard]] inline json body_json(const httplib::Request& req) {
    if (req.body.empty())
        return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ServiceError(400, "invalid_json", e.what());
    }
}

[[nodiscard]] inline std::optional<double> opt_number(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null())
        return std::nullopt;
    if (!j[key].is_number())
        throw ServiceError(400, "invalid_request", std::string("field '") + key + "' must be a number");
    return j[key].get<double>();
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const ServiceError& e) {
        send_problem(res, e.status(), e.code(), e.what());
    } catch (const json::exception& e) {
        send_problem(res, 400, "invalid_request", e.what());
    } catch (const std::exception& e) {
        send_problem(res, 500, "internal_error", e.what());
    }
}

} // namespace detail

/// Register the session routes on a server.
inline void register_routes(httplib::Server& srv, SessionStore& store) {
    using detail::guarded;
    using detail::send_json;

    srv.Post("/sessions", [&](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto cfg = config_from_request(detail::body_json(req));
            auto created = store.create(cfg);
            send_json(res, 201,
                      {{"id", created.id}, {"secret", created.secret}, {"session", created.state}});
        });
    });

    srv.Post(R"(/sessions/([0-9a-f]+)/measurements)",
             [&](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                     const json body = detail::body_json(req);
                     const auto y = detail::opt_number(body, "y");
                     if (!y)
                         throw ServiceError(400, "invalid_request", "field 'y' is required");
                     const std::string token = body.value("token", "");
                     const auto r = store.submit(req.matches[1], req.get_header_value(kSecretHeader),
                                                 *y, token);
                     json out = to_json(r.measurement);
                     out["duplicate"] = r.duplicate;
                     out["increase"] = r.increase;
                     out["gap_flagged"] = r.measurement.gap_steps > 0;
                     send_json(res, r.duplicate ? 200 : 201, out);
                 });
             });

    srv.Post(R"(/sessions/([0-9a-f]+)/what-if)",
             [&](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                     const json body = detail::body_json(req);
                     WhatIfQuery q;
                     q.y = detail::opt_number(body, "y");
                     q.y_min = detail::opt_number(body, "y_min");
                     q.delta = detail::opt_number(body, "delta");
                     q.replace_last = body.value("replace_last", false);
                     send_json(res, 200,
                               store.what_if(req.matches[1], req.get_header_value(kSecretHeader), q));
                 });
             });

    srv.Patch(R"(/sessions/([0-9a-f]+)/constraint)",
              [&](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                      const json body = detail::body_json(req);
                      const auto c = store.update_constraint(
                          req.matches[1], req.get_header_value(kSecretHeader),
                          detail::opt_number(body, "y_min"), detail::opt_number(body, "delta"));
                      send_json(res, 200,
                                {{"effective_step", c.effective_step},
                                 {"y_min", c.y_min},
                                 {"delta", c.delta},
                                 {"timestamp", c.timestamp}});
                  });
              });

    srv.Post(R"(/sessions/([0-9a-f]+)/complete)",
             [&](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                     send_json(res, 200,
                               store.complete(req.matches[1], req.get_header_value(kSecretHeader)));
                 });
             });

    srv.Post(R"(/sessions/([0-9a-f]+)/abort)",
             [&](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                     const json body = detail::body_json(req);
                     send_json(res, 200,
                               store.abort(req.matches[1], req.get_header_value(kSecretHeader),
                                           body.value("reason", "")));
                 });
             });

    srv.Get(R"(/sessions/([0-9a-f]+))", [&](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            send_json(res, 200, store.history(req.matches[1], req.get_header_value(kSecretHeader)));
        });
    });

    srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty())
            detail::send_problem(res, res.status, "not_found", "no such route");
    });
}

} // namespace taper::session
