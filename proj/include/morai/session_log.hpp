#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "morai/errors.hpp"
#include "morai/level.hpp"

namespace morai {

enum class Actor { Human, Ai };
enum class EventKind { SessionStart, Place, Delete, EndTurn, SessionEnd, Rank, Run };
enum class Task { AboveGround, BelowGround };

inline const char* to_string(Actor a) { return a == Actor::Human ? "human" : "ai"; }
inline const char* to_string(Task t) { return t == Task::AboveGround ? "above_ground" : "below_ground"; }
inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::SessionStart: return "session_start";
    case EventKind::Place: return "place";
    case EventKind::Delete: return "delete";
    case EventKind::EndTurn: return "end_turn";
    case EventKind::SessionEnd: return "session_end";
    case EventKind::Rank: return "rank";
    case EventKind::Run: return "run";
  }
  return "?";
}

inline std::optional<Actor> actor_from_string(std::string_view s) {
  if (s == "human") return Actor::Human;
  if (s == "ai") return Actor::Ai;
  return std::nullopt;
}
inline std::optional<Task> task_from_string(std::string_view s) {
  if (s == "above_ground") return Task::AboveGround;
  if (s == "below_ground") return Task::BelowGround;
  return std::nullopt;
}
inline std::optional<EventKind> kind_from_string(std::string_view s) {
  for (auto k : {EventKind::SessionStart, EventKind::Place, EventKind::Delete, EventKind::EndTurn,
                 EventKind::SessionEnd, EventKind::Rank, EventKind::Run})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct PlacePayload {
  int x = 0;
  int y = 0;
  SpriteId sprite = 0;
};

struct DeletePayload {
  int x = 0;
  int y = 0;
  Actor deleted_actor = Actor::Human;
};

/// Survey answers for one session: 1 = ranked first, 2 = ranked second.
struct RankPayload {
  int reuse_rank = 1;
  std::optional<int> fun, frustration, challenge, aided, creative;
};

struct SessionEvent {
  std::int64_t timestamp_ms = 0;
  Actor actor = Actor::Human;
  EventKind kind = EventKind::SessionStart;
  std::optional<PlacePayload> place;
  std::optional<DeletePayload> del;
  std::optional<RankPayload> rank;
  // Unrecognised fields seen on read. Never written back.
  nlohmann::json extra = nlohmann::json::object();

  static SessionEvent make(std::int64_t t, Actor a, EventKind k) {
    SessionEvent e;
    e.timestamp_ms = t;
    e.actor = a;
    e.kind = k;
    return e;
  }
  static SessionEvent placed(std::int64_t t, Actor a, int x, int y, SpriteId s) {
    auto e = make(t, a, EventKind::Place);
    e.place = PlacePayload{x, y, s};
    return e;
  }
  static SessionEvent deleted(std::int64_t t, int x, int y, Actor owner) {
    auto e = make(t, Actor::Human, EventKind::Delete);
    e.del = DeletePayload{x, y, owner};
    return e;
  }
  static SessionEvent ranked(std::int64_t t, RankPayload r) {
    auto e = make(t, Actor::Human, EventKind::Rank);
    e.rank = r;
    return e;
  }
};

inline constexpr int kDefaultLevelWidth = 120;

struct SessionLog {
  std::string session_id;
  std::string participant_id;
  std::string agent_name;
  Task task = Task::AboveGround;
  int width = kDefaultLevelWidth;
  std::vector<SessionEvent> events;
  // False when the file was cut short (trailing lines unreadable or no session_end).
  bool complete = true;

  std::optional<RankPayload> final_rank() const {
    std::optional<RankPayload> r;
    for (const auto& e : events)
      if (e.kind == EventKind::Rank && e.rank) r = e.rank;
    return r;
  }
};

struct Turn {
  int index = 0;
  std::vector<SessionEvent> human_events;  // places and deletes since the previous turn
  Additions ai_additions;
  // Event indices of the ai place events, parallel to ai_additions.
  std::vector<std::size_t> ai_event_indices;
  TileGrid state_after_human;
};

// ---------------------------------------------------------------------------
// Replay

namespace detail {

struct ReplayState {
  explicit ReplayState(int width) : grid(width), owner(static_cast<std::size_t>(width) * kLevelHeight, Actor::Human) {}
  TileGrid grid;
  std::vector<Actor> owner;

  void apply(const SessionEvent& e, std::size_t index) {
    if (e.kind == EventKind::Place) {
      if (!e.place) throw ReplayError(index, "place event without payload");
      const auto& p = *e.place;
      if (!grid.in_bounds(p.x, p.y)) throw ReplayError(index, "place outside level");
      if (p.sprite >= kSpriteCount) throw ReplayError(index, "sprite index out of range");
      if (grid.occupied(p.x, p.y)) throw ReplayError(index, "place on occupied cell");
      grid.set(p.x, p.y, p.sprite);
      owner[static_cast<std::size_t>(p.x) * kLevelHeight + p.y] = e.actor;
    } else if (e.kind == EventKind::Delete) {
      if (!e.del) throw ReplayError(index, "delete event without payload");
      const auto& d = *e.del;
      if (!grid.in_bounds(d.x, d.y)) throw ReplayError(index, "delete outside level");
      if (!grid.occupied(d.x, d.y)) throw ReplayError(index, "delete of empty cell");
      grid.clear(d.x, d.y);
    }
  }
  Actor owner_of(int x, int y) const { return owner[static_cast<std::size_t>(x) * kLevelHeight + y]; }
};

}  // namespace detail

/// Grid after applying the first `count` events.
inline TileGrid replay_prefix(const SessionLog& log, std::size_t count) {
  detail::ReplayState st(log.width);
  for (std::size_t i = 0; i < count && i < log.events.size(); ++i) st.apply(log.events[i], i);
  return st.grid;
}

inline TileGrid replay(const SessionLog& log) { return replay_prefix(log, log.events.size()); }

/// Checks the structural invariants of a log; throws ValidationError (or ReplayError).
inline void validate_log(const SessionLog& log) {
  if (log.width < 1) throw ValidationError("level width must be >= 1");
  if (log.events.empty()) throw ValidationError("log has no events");
  if (log.events.front().kind != EventKind::SessionStart) throw ValidationError("first event must be session_start");
  detail::ReplayState st(log.width);
  bool ai_window = false;
  bool ended = false;
  std::int64_t last_t = log.events.front().timestamp_ms;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    if (e.timestamp_ms < last_t) throw ValidationError("event " + std::to_string(i) + ": timestamp decreases");
    last_t = e.timestamp_ms;
    if (i > 0 && e.kind == EventKind::SessionStart)
      throw ValidationError("event " + std::to_string(i) + ": repeated session_start");
    if (ended && e.kind != EventKind::Rank)
      throw ValidationError("event " + std::to_string(i) + ": only rank events may follow session_end");
    if (e.kind == EventKind::Rank) {
      if (!e.rank) throw ValidationError("event " + std::to_string(i) + ": rank event without payload");
      if (e.rank->reuse_rank != 1 && e.rank->reuse_rank != 2)
        throw ValidationError("event " + std::to_string(i) + ": reuse_rank must be 1 or 2");
    }
    if (e.actor == Actor::Ai) {
      if (e.kind != EventKind::Place)
        throw ValidationError("event " + std::to_string(i) + ": the ai may only place");
      if (!ai_window) throw ValidationError("event " + std::to_string(i) + ": ai place outside an ai turn");
    } else if (e.kind != EventKind::SessionStart) {
      ai_window = e.kind == EventKind::EndTurn;
    }
    if (e.kind == EventKind::Delete && e.del && st.grid.in_bounds(e.del->x, e.del->y) &&
        st.grid.occupied(e.del->x, e.del->y) && st.owner_of(e.del->x, e.del->y) != e.del->deleted_actor)
      throw ValidationError("event " + std::to_string(i) + ": deleted_actor does not match the cell's author");
    st.apply(e, i);
    if (e.kind == EventKind::SessionEnd) ended = true;
  }
  if (log.complete && !ended) throw ValidationError("last event must be session_end");
}

/// One Turn per human end_turn; the ai additions are the ai place events that follow it.
inline std::vector<Turn> segment_turns(const SessionLog& log) {
  std::vector<Turn> turns;
  detail::ReplayState st(log.width);
  std::vector<SessionEvent> pending_human;
  bool ai_window = false;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    if (e.actor == Actor::Ai) {
      if (!ai_window || e.kind != EventKind::Place || turns.empty())
        throw StructureError("event " + std::to_string(i) + ": ai event outside a turn window");
      st.apply(e, i);
      turns.back().ai_additions.push_back({e.place->x, e.place->y, e.place->sprite});
      turns.back().ai_event_indices.push_back(i);
      continue;
    }
    st.apply(e, i);
    ai_window = false;
    if (e.kind == EventKind::EndTurn) {
      Turn t;
      t.index = static_cast<int>(turns.size());
      t.human_events = std::move(pending_human);
      pending_human.clear();
      t.state_after_human = st.grid;
      turns.push_back(std::move(t));
      ai_window = true;
    } else if (e.kind == EventKind::Place || e.kind == EventKind::Delete) {
      pending_human.push_back(e);
    }
  }
  return turns;
}

// ---------------------------------------------------------------------------
// JSONL

namespace detail {

inline nlohmann::ordered_json header_json(const SessionLog& log) {
  nlohmann::ordered_json h;
  h["v"] = 1;
  h["session_id"] = log.session_id;
  h["participant_id"] = log.participant_id;
  h["agent_name"] = log.agent_name;
  h["task"] = to_string(log.task);
  h["width"] = log.width;
  return h;
}

inline nlohmann::ordered_json event_json(const SessionEvent& e) {
  nlohmann::ordered_json j;
  j["timestamp_ms"] = e.timestamp_ms;
  j["actor"] = to_string(e.actor);
  j["kind"] = to_string(e.kind);
  if (e.place) j["place"] = {{"x", e.place->x}, {"y", e.place->y}, {"sprite", e.place->sprite}};
  if (e.del) j["delete"] = {{"x", e.del->x}, {"y", e.del->y}, {"deleted_actor", to_string(e.del->deleted_actor)}};
  if (e.rank) {
    nlohmann::ordered_json r;
    r["reuse_rank"] = e.rank->reuse_rank;
    auto opt = [&](const char* key, const std::optional<int>& v) {
      if (v) r[key] = *v;
    };
    opt("fun", e.rank->fun);
    opt("frustration", e.rank->frustration);
    opt("challenge", e.rank->challenge);
    opt("aided", e.rank->aided);
    opt("creative", e.rank->creative);
    j["rank"] = r;
  }
  return j;
}

template <class T>
T require(const nlohmann::json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) throw ParseError(line, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(line, std::string("bad type for field '") + key + "'");
  }
}

inline SessionEvent event_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "event is not an object");
  SessionEvent e;
  e.timestamp_ms = require<std::int64_t>(j, "timestamp_ms", line);
  auto actor = actor_from_string(require<std::string>(j, "actor", line));
  if (!actor) throw ParseError(line, "unknown actor");
  e.actor = *actor;
  auto kind = kind_from_string(require<std::string>(j, "kind", line));
  if (!kind) throw ParseError(line, "unknown event kind");
  e.kind = *kind;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "timestamp_ms" || key == "actor" || key == "kind") continue;
    if (key == "place") {
      const auto& p = it.value();
      int s = require<int>(p, "sprite", line);
      if (s < 0 || s >= kSpriteCount) throw ParseError(line, "sprite index out of range");
      e.place = PlacePayload{require<int>(p, "x", line), require<int>(p, "y", line), static_cast<SpriteId>(s)};
    } else if (key == "delete") {
      const auto& d = it.value();
      auto owner = actor_from_string(require<std::string>(d, "deleted_actor", line));
      if (!owner) throw ParseError(line, "unknown deleted_actor");
      e.del = DeletePayload{require<int>(d, "x", line), require<int>(d, "y", line), *owner};
    } else if (key == "rank") {
      const auto& r = it.value();
      RankPayload rp;
      rp.reuse_rank = require<int>(r, "reuse_rank", line);
      auto opt = [&](const char* k, std::optional<int>& v) {
        if (r.contains(k)) v = require<int>(r, k, line);
      };
      opt("fun", rp.fun);
      opt("frustration", rp.frustration);
      opt("challenge", rp.challenge);
      opt("aided", rp.aided);
      opt("creative", rp.creative);
      e.rank = rp;
    } else {
      e.extra[key] = it.value();
    }
  }
  if (e.kind == EventKind::Place && !e.place) throw ParseError(line, "place event without 'place'");
  if (e.kind == EventKind::Delete && !e.del) throw ParseError(line, "delete event without 'delete'");
  if (e.kind == EventKind::Rank && !e.rank) throw ParseError(line, "rank event without 'rank'");
  return e;
}

}  // namespace detail

inline std::string format_header_line(const SessionLog& log) { return detail::header_json(log).dump() + "\n"; }
inline std::string format_event_line(const SessionEvent& e) { return detail::event_json(e).dump() + "\n"; }

inline std::string to_jsonl(const SessionLog& log) {
  std::string out = format_header_line(log);
  for (const auto& e : log.events) out += format_event_line(e);
  return out;
}

struct ReadOptions {
  // Skip unparseable trailing lines (a session cut short) instead of failing, and
  // mark the log incomplete.
  bool tolerate_truncation = false;
  bool validate = true;
};

inline SessionLog parse_jsonl(std::string_view text, ReadOptions opts = {}) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(1, "empty log");

  SessionLog log;
  {
    nlohmann::json h;
    try {
      h = nlohmann::json::parse(lines[0]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(1, std::string("malformed header: ") + e.what());
    }
    if (!h.is_object()) throw ParseError(1, "header is not an object");
    if (detail::require<int>(h, "v", 1) != 1) throw ParseError(1, "unsupported log version");
    log.session_id = detail::require<std::string>(h, "session_id", 1);
    log.participant_id = detail::require<std::string>(h, "participant_id", 1);
    log.agent_name = detail::require<std::string>(h, "agent_name", 1);
    auto task = task_from_string(detail::require<std::string>(h, "task", 1));
    if (!task) throw ParseError(1, "unknown task");
    log.task = *task;
    if (h.contains("width")) log.width = detail::require<int>(h, "width", 1);
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(lines[i]);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_no, std::string("malformed event: ") + e.what());
      }
      log.events.push_back(detail::event_from_json(j, line_no));
    } catch (const ParseError& e) {
      if (!opts.tolerate_truncation) throw;
      std::cerr << "warning: " << log.session_id << ": skipping " << (lines.size() - i)
                << " unreadable trailing line(s): " << e.what() << "\n";
      log.complete = false;
      break;
    }
  }
  if (opts.tolerate_truncation) {
    bool ended = false;
    for (const auto& e : log.events) ended = ended || e.kind == EventKind::SessionEnd;
    if (!ended) log.complete = false;
  }
  if (opts.validate) validate_log(log);
  return log;
}

inline SessionLog read_jsonl(const std::string& path, ReadOptions opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_jsonl(ss.str(), opts);
}

inline void write_jsonl(const SessionLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << to_jsonl(log);
}

inline std::string log_file_name(const SessionLog& log) { return log.participant_id + "_" + log.session_id + ".jsonl"; }

}  // namespace morai
