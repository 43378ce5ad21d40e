#pragma once

#include <chrono>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "morai/session.hpp"

namespace morai {

namespace detail {

inline int status_for(const SessionError& e) {
  switch (e.kind()) {
    case SessionError::Kind::NotFound: return 404;
    case SessionError::Kind::WrongPhase: return 409;
    case SessionError::Kind::Invalid: return 400;
    case SessionError::Kind::AgentFailure: return 500;
  }
  return 500;
}

inline void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline nlohmann::json body_of(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SessionError(SessionError::Kind::Invalid, "request body is not a JSON object");
  return j;
}

inline int int_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw SessionError(SessionError::Kind::Invalid, std::string("missing integer field '") + key + "'");
  return j.at(key).get<int>();
}

inline std::string string_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw SessionError(SessionError::Kind::Invalid, std::string("missing string field '") + key + "'");
  return j.at(key).get<std::string>();
}

// Sprites may be given by index, palette name or single-character glyph.
inline SpriteId sprite_field(const nlohmann::json& j) {
  if (!j.contains("sprite")) throw SessionError(SessionError::Kind::Invalid, "missing field 'sprite'");
  const auto& v = j.at("sprite");
  const auto& palette = SpritePalette::standard();
  if (v.is_number_integer()) {
    const int i = v.get<int>();
    if (i < 0 || i >= kSpriteCount) throw SessionError(SessionError::Kind::Invalid, "sprite index out of range");
    return static_cast<SpriteId>(i);
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (auto id = palette.from_name(s)) return *id;
    if (s.size() == 1)
      if (auto id = palette.from_glyph(s[0])) return *id;
  }
  throw SessionError(SessionError::Kind::Invalid, "unknown sprite");
}

inline RankPayload rank_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_object())
    throw SessionError(SessionError::Kind::Invalid, std::string("missing ranking '") + key + "'");
  const auto& r = j.at(key);
  RankPayload p;
  p.reuse_rank = int_field(r, "reuse_rank");
  auto opt = [&](const char* k, std::optional<int>& v) {
    if (r.contains(k)) v = int_field(r, k);
  };
  opt("fun", p.fun);
  opt("frustration", p.frustration);
  opt("challenge", p.challenge);
  opt("aided", p.aided);
  opt("creative", p.creative);
  return p;
}

inline nlohmann::json addition_json(const Addition& a) {
  const auto& info = SpritePalette::standard().at(a.sprite);
  return {{"x", a.x}, {"y", a.y}, {"sprite", a.sprite}, {"name", std::string(info.name)}};
}

inline std::string sse_event(const StreamedAddition& s) {
  nlohmann::json d = addition_json(s.addition);
  d["seq"] = s.seq;
  d["turn"] = s.turn;
  return "id: " + std::to_string(s.seq) + "\nevent: addition\ndata: " + d.dump() + "\n\n";
}

}  // namespace detail

/// HTTP+JSON front end of a SessionService. AI additions are pushed to clients as
/// server-sent events on /sessions/{id}/stream.
class Server {
 public:
  explicit Server(SessionService& service) : service_(service) { routes(); }

  httplib::Server& http() { return http_; }

  /// Binds to an ephemeral port on `host` and returns it; call listen_after_bind() next.
  int bind_any(const std::string& host = "127.0.0.1") { return http_.bind_to_any_port(host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  bool listen(const std::string& host, int port) { return http_.listen(host, port); }
  void stop() { http_.stop(); }
  void wait_until_ready() { http_.wait_until_ready(); }

 private:
  template <class F>
  void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const SessionError& e) {
      detail::reply(res, detail::status_for(e), {{"error", e.what()}});
    } catch (const std::exception& e) {
      detail::reply(res, 500, {{"error", e.what()}});
    }
  }

  void routes() {
    using httplib::Request;
    using httplib::Response;

    http_.Get("/health", [](const Request&, Response& res) { detail::reply(res, 200, {{"status", "ok"}}); });

    http_.Get("/agents", [this](const Request&, Response& res) {
      detail::reply(res, 200, {{"agents", service_.registry().names()}});
    });

    http_.Post("/sessions", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto b = detail::body_of(req);
        Task task = Task::AboveGround;
        if (b.contains("task")) {
          auto t = b.at("task").is_string() ? task_from_string(b.at("task").get<std::string>()) : std::nullopt;
          if (!t) throw SessionError(SessionError::Kind::Invalid, "unknown task");
          task = *t;
        }
        const auto id = service_.create_session(detail::string_field(b, "participant_id"), detail::string_field(b, "agent"), task);
        detail::reply(res, 201, {{"session_id", id}});
      });
    });

    http_.Post(R"(/sessions/([^/]+)/place)", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto b = detail::body_of(req);
        service_.place(req.matches[1], detail::int_field(b, "x"), detail::int_field(b, "y"), detail::sprite_field(b));
        detail::reply(res, 200, {{"ok", true}});
      });
    });

    http_.Post(R"(/sessions/([^/]+)/delete)", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto b = detail::body_of(req);
        const bool applied = service_.remove(req.matches[1], detail::int_field(b, "x"), detail::int_field(b, "y"));
        detail::reply(res, applied ? 200 : 202, {{"ok", true}, {"queued", !applied}});
      });
    });

    http_.Post(R"(/sessions/([^/]+)/end-turn)", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto b = detail::body_of(req);
        std::optional<int> camera;
        if (b.contains("camera_x")) camera = detail::int_field(b, "camera_x");
        const std::string id = req.matches[1];
        const auto from = service_.ai_additions_since(id, 0).size();
        const auto adds = service_.end_turn(id, camera);
        nlohmann::json list = nlohmann::json::array();
        for (const auto& a : adds) list.push_back(detail::addition_json(a));
        detail::reply(res, 200, {{"additions", list}, {"stream_from", from}});
      });
    });

    http_.Post(R"(/sessions/([^/]+)/end)", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        service_.end_session(req.matches[1]);
        detail::reply(res, 200, {{"ok", true}});
      });
    });

    http_.Post("/rankings", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const auto b = detail::body_of(req);
        RankingRequest r;
        r.participant_id = detail::string_field(b, "participant_id");
        r.first_session = detail::string_field(b, "first_session");
        r.second_session = detail::string_field(b, "second_session");
        r.first = detail::rank_field(b, "first");
        r.second = detail::rank_field(b, "second");
        service_.rank(r);
        detail::reply(res, 200, {{"ok", true}});
      });
    });

    http_.Get(R"(/sessions/([^/]+)/level)", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        const auto grid = service_.level(id);
        nlohmann::json rows = nlohmann::json::array();
        std::string text = serialize_level_text(grid);
        std::size_t start = 0;
        for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1) rows.push_back(text.substr(start, nl - start));
        detail::reply(res, 200,
                      {{"width", grid.width()},
                       {"rows", rows},
                       {"phase", to_string(service_.phase(id))},
                       {"camera_x", service_.camera_x(id)},
                       {"overtime", service_.overtime(id)}});
      });
    });

    http_.Get(R"(/sessions/([^/]+)/log)", [this](const Request& req, Response& res) {
      guarded(res, [&] { res.set_content(to_jsonl(service_.log(req.matches[1])), "application/x-ndjson"); });
    });

    // ?from=N starts after the first N additions; ?follow=0 returns what exists and closes.
    http_.Get(R"(/sessions/([^/]+)/stream)", [this](const Request& req, Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        std::size_t from = 0;
        if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
        const bool follow = !req.has_param("follow") || req.get_param_value("follow") != "0";
        (void)service_.phase(id);  // 404 before the stream starts
        if (!follow) {
          std::string out;
          for (const auto& s : service_.ai_additions_since(id, from)) out += detail::sse_event(s);
          res.set_content(out, "text/event-stream");
          return;
        }
        auto next = std::make_shared<std::size_t>(from);
        res.set_chunked_content_provider("text/event-stream", [this, id, next](std::size_t, httplib::DataSink& sink) {
          const auto batch = service_.wait_ai_additions(id, *next, std::chrono::milliseconds(1000));
          for (const auto& s : batch) {
            const auto ev = detail::sse_event(s);
            if (!sink.write(ev.data(), ev.size())) return false;
            *next = s.seq + 1;
          }
          if (batch.empty()) {
            if (service_.phase(id) == Phase::Ended) {
              const std::string bye = "event: end\ndata: {}\n\n";
              sink.write(bye.data(), bye.size());
              sink.done();
              return true;
            }
            const std::string ping = ": keep-alive\n\n";
            if (!sink.write(ping.data(), ping.size())) return false;
          }
          return true;
        });
      });
    });
  }

  SessionService& service_;
  httplib::Server http_;
};

}  // namespace morai
