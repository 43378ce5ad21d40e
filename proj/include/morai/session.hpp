#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "morai/agents/agent.hpp"
#include "morai/errors.hpp"
#include "morai/level.hpp"
#include "morai/rng.hpp"
#include "morai/session_log.hpp"

namespace morai {

using AgentFactory = std::function<std::unique_ptr<Agent>()>;

/// Named agent constructors. Every session gets its own instance.
class AgentRegistry {
 public:
  void add(const std::string& name, AgentFactory f) { factories_[name] = std::move(f); }
  bool has(const std::string& name) const { return factories_.count(name) > 0; }
  std::unique_ptr<Agent> make(const std::string& name) const { return factories_.at(name)(); }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, f] : factories_) out.push_back(n);
    return out;
  }

 private:
  std::map<std::string, AgentFactory> factories_;
};

enum class Phase { HumanTurn, AiTurn, Ended };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::HumanTurn: return "human_turn";
    case Phase::AiTurn: return "ai_turn";
    case Phase::Ended: return "ended";
  }
  return "?";
}

class SessionError : public Error {
 public:
  enum class Kind { NotFound, WrongPhase, Invalid, AgentFailure };
  SessionError(Kind k, const std::string& what) : Error(what), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// One AI addition as pushed to stream clients. `seq` counts additions within the session.
struct StreamedAddition {
  std::size_t seq = 0;
  int turn = 0;
  Addition addition;
};

struct ServiceOptions {
  // Where logs go (<data_dir>/logs). Empty: keep logs in memory only.
  std::string data_dir;
  std::uint64_t seed = 0;
  int level_width = kDefaultLevelWidth;
  std::int64_t time_limit_ms = 15 * 60 * 1000;
  // Wall clock in milliseconds; event timestamps are relative to session start.
  std::function<std::int64_t()> clock;
};

inline std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

struct RankingRequest {
  std::string participant_id;
  std::string first_session;
  std::string second_session;
  RankPayload first;
  RankPayload second;
};

/// Turn-based sessions. Requests on one session are serialized; agent inference runs
/// without holding the session lock, guarded by the ai_turn phase.
class SessionService {
 public:
  SessionService(std::shared_ptr<const AgentRegistry> registry, ServiceOptions opts = {})
      : registry_(std::move(registry)), opts_(std::move(opts)) {
    if (!opts_.clock) opts_.clock = system_clock_ms;
    if (!opts_.data_dir.empty()) std::filesystem::create_directories(logs_dir());
  }

  std::string logs_dir() const { return opts_.data_dir.empty() ? "" : (std::filesystem::path(opts_.data_dir) / "logs").string(); }

  std::string create_session(const std::string& participant, const std::string& agent, Task task = Task::AboveGround) {
    if (!registry_->has(agent)) throw SessionError(SessionError::Kind::NotFound, "unknown agent '" + agent + "'");
    if (participant.empty()) throw SessionError(SessionError::Kind::Invalid, "participant id is empty");
    auto s = std::make_shared<Session>(opts_.level_width);
    std::string id;
    {
      std::lock_guard lk(map_mu_);
      do {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%04zu", ++counter_);
        id = buf;
      } while (sessions_.count(id) ||
               (!opts_.data_dir.empty() &&
                std::filesystem::exists(std::filesystem::path(logs_dir()) / (participant + "_" + id + ".jsonl"))));
      s->rng.seed(derive_seed(opts_.seed, counter_));
      sessions_[id] = s;
    }
    s->agent = registry_->make(agent);
    s->log.session_id = id;
    s->log.participant_id = participant;
    s->log.agent_name = agent;
    s->log.task = task;
    s->log.width = opts_.level_width;
    s->log.complete = false;
    s->camera_x = std::min(kChunkWidth / 2, opts_.level_width - 1);
    std::lock_guard lk(s->mu);
    if (!opts_.data_dir.empty()) {
      s->path = (std::filesystem::path(logs_dir()) / log_file_name(s->log)).string();
      std::ofstream f(s->path, std::ios::binary | std::ios::trunc);
      f << format_header_line(s->log);
      if (!f) throw IoError("cannot write " + s->path);
    }
    s->started_ms = opts_.clock();
    append(*s, SessionEvent::make(0, Actor::Human, EventKind::SessionStart));
    return id;
  }

  void place(const std::string& id, int x, int y, SpriteId sprite) {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    require_phase(*s, Phase::HumanTurn);
    if (!s->level.in_bounds(x, y)) throw SessionError(SessionError::Kind::Invalid, "cell outside the level");
    if (sprite >= kSpriteCount) throw SessionError(SessionError::Kind::Invalid, "unknown sprite");
    if (s->level.occupied(x, y)) throw SessionError(SessionError::Kind::Invalid, "cell is occupied");
    apply_place(*s, Actor::Human, {x, y, sprite});
  }

  /// Deletes a sprite. During the AI's turn the deletion is queued and applied once the
  /// human turn resumes; returns false in that case.
  bool remove(const std::string& id, int x, int y) {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    if (s->phase == Phase::AiTurn) {
      if (!s->level.in_bounds(x, y)) throw SessionError(SessionError::Kind::Invalid, "cell outside the level");
      s->queued_deletes.emplace_back(x, y);
      return false;
    }
    require_phase(*s, Phase::HumanTurn);
    if (!s->level.in_bounds(x, y)) throw SessionError(SessionError::Kind::Invalid, "cell outside the level");
    if (!s->level.occupied(x, y)) throw SessionError(SessionError::Kind::Invalid, "cell is empty");
    apply_delete(*s, x, y);
    return true;
  }

  /// Runs the agent on the current level and applies its additions in order.
  Additions end_turn(const std::string& id, std::optional<int> camera_x = std::nullopt) {
    auto s = find(id);
    TileGrid snapshot(1);
    int camera = 0;
    {
      std::lock_guard lk(s->mu);
      require_phase(*s, Phase::HumanTurn);
      if (camera_x) {
        if (*camera_x < 0 || *camera_x >= s->level.width())
          throw SessionError(SessionError::Kind::Invalid, "camera_x outside the level");
        s->camera_x = *camera_x;
      }
      s->phase = Phase::AiTurn;
      snapshot = s->level;
      camera = s->camera_x;
    }
    Additions adds;
    std::string failure;
    try {
      adds = s->agent->propose(snapshot, camera, s->rng);
      check_additions(snapshot, adds, kMaxAdditions);
    } catch (const std::exception& e) {
      failure = e.what();
    }
    std::lock_guard lk(s->mu);
    s->phase = Phase::HumanTurn;
    if (!failure.empty()) {
      flush_queued_deletes(*s);
      s->last_error = failure;
      std::fprintf(stderr, "session %s: agent %s failed: %s\n", id.c_str(), s->log.agent_name.c_str(), failure.c_str());
      throw SessionError(SessionError::Kind::AgentFailure, "agent failed: " + failure);
    }
    append(*s, SessionEvent::make(now(*s), Actor::Human, EventKind::EndTurn));
    for (const auto& a : adds) {
      apply_place(*s, Actor::Ai, a);
      s->stream.push_back({s->stream.size(), s->turns, a});
    }
    ++s->turns;
    flush_queued_deletes(*s);
    s->cv.notify_all();
    return adds;
  }

  void end_session(const std::string& id) {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    require_phase(*s, Phase::HumanTurn);
    s->phase = Phase::Ended;
    append(*s, SessionEvent::make(now(*s), Actor::Human, EventKind::SessionEnd));
    s->log.complete = true;
    s->cv.notify_all();
  }

  /// Appends the survey answers to both sessions of one participant.
  void rank(const RankingRequest& r) {
    if (r.first_session == r.second_session) throw SessionError(SessionError::Kind::Invalid, "the two sessions must differ");
    const int a = r.first.reuse_rank, b = r.second.reuse_rank;
    if (!((a == 1 && b == 2) || (a == 2 && b == 1)))
      throw SessionError(SessionError::Kind::Invalid, "reuse ranks must be 1 and 2");
    auto s1 = find(r.first_session);
    auto s2 = find(r.second_session);
    std::scoped_lock lk(s1->mu, s2->mu);
    for (const auto* s : {s1.get(), s2.get()}) {
      if (s->log.participant_id != r.participant_id)
        throw SessionError(SessionError::Kind::Invalid, "session " + s->log.session_id + " belongs to another participant");
      if (s->phase != Phase::Ended)
        throw SessionError(SessionError::Kind::WrongPhase, "session " + s->log.session_id + " has not ended");
      if (s->log.final_rank()) throw SessionError(SessionError::Kind::Invalid, "session " + s->log.session_id + " is already ranked");
    }
    append(*s1, SessionEvent::ranked(now(*s1), r.first));
    append(*s2, SessionEvent::ranked(now(*s2), r.second));
  }

  TileGrid level(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return s->level;
  }

  SessionLog log(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return s->log;
  }

  Phase phase(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return s->phase;
  }

  int camera_x(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return s->camera_x;
  }

  /// True once the session has run past the time limit. Nothing is blocked by it.
  bool overtime(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    const std::int64_t elapsed = s->phase == Phase::Ended ? s->log.events.back().timestamp_ms : opts_.clock() - s->started_ms;
    return elapsed > opts_.time_limit_ms;
  }

  std::string log_path(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return s->path;
  }

  std::vector<StreamedAddition> ai_additions_since(const std::string& id, std::size_t from) const {
    auto s = find(id);
    std::lock_guard lk(s->mu);
    return slice(*s, from);
  }

  /// Blocks until there is an addition at or after `from`, the session ends, or the timeout passes.
  std::vector<StreamedAddition> wait_ai_additions(const std::string& id, std::size_t from, std::chrono::milliseconds timeout) const {
    auto s = find(id);
    std::unique_lock lk(s->mu);
    s->cv.wait_for(lk, timeout, [&] { return s->stream.size() > from || s->phase == Phase::Ended; });
    return slice(*s, from);
  }

  std::vector<std::string> session_ids() const {
    std::lock_guard lk(map_mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : sessions_) out.push_back(k);
    return out;
  }

  const AgentRegistry& registry() const { return *registry_; }

 private:
  struct Session {
    explicit Session(int width) : level(width), owners(static_cast<std::size_t>(width) * kLevelHeight, Actor::Human) {}
    mutable std::mutex mu;
    mutable std::condition_variable cv;
    std::unique_ptr<Agent> agent;
    TileGrid level;
    std::vector<Actor> owners;
    SessionLog log;
    Phase phase = Phase::HumanTurn;
    int camera_x = 0;
    int turns = 0;
    std::int64_t started_ms = 0;
    std::string path;
    std::string last_error;
    std::vector<StreamedAddition> stream;
    std::vector<std::pair<int, int>> queued_deletes;
    Rng rng;

    Actor owner(int x, int y) const { return owners[static_cast<std::size_t>(x) * kLevelHeight + y]; }
  };

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lk(map_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw SessionError(SessionError::Kind::NotFound, "no session '" + id + "'");
    return it->second;
  }

  static void require_phase(const Session& s, Phase p) {
    if (s.phase != p)
      throw SessionError(SessionError::Kind::WrongPhase,
                         std::string("session is in ") + to_string(s.phase) + ", expected " + to_string(p));
  }

  // Milliseconds since session start; never goes backwards even if the clock does.
  std::int64_t now(const Session& s) const {
    const std::int64_t t = opts_.clock() - s.started_ms;
    return s.log.events.empty() ? t : std::max(t, s.log.events.back().timestamp_ms);
  }

  void apply_place(Session& s, Actor actor, const Addition& a) {
    s.level.set(a.x, a.y, a.sprite);
    s.owners[static_cast<std::size_t>(a.x) * kLevelHeight + a.y] = actor;
    append(s, SessionEvent::placed(now(s), actor, a.x, a.y, a.sprite));
  }

  void apply_delete(Session& s, int x, int y) {
    const Actor owner = s.owner(x, y);
    s.level.clear(x, y);
    append(s, SessionEvent::deleted(now(s), x, y, owner));
  }

  // Queued cells that were emptied in the meantime are dropped.
  void flush_queued_deletes(Session& s) {
    for (auto [x, y] : s.queued_deletes)
      if (s.level.occupied(x, y)) apply_delete(s, x, y);
    s.queued_deletes.clear();
  }

  void append(Session& s, SessionEvent e) {
    if (!s.path.empty()) {
      std::ofstream f(s.path, std::ios::binary | std::ios::app);
      f << format_event_line(e);
      if (!f) throw IoError("cannot append to " + s.path);
    }
    s.log.events.push_back(std::move(e));
  }

  static std::vector<StreamedAddition> slice(const Session& s, std::size_t from) {
    if (from >= s.stream.size()) return {};
    return {s.stream.begin() + static_cast<std::ptrdiff_t>(from), s.stream.end()};
  }

  std::shared_ptr<const AgentRegistry> registry_;
  ServiceOptions opts_;
  mutable std::mutex map_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t counter_ = 0;
};

}  // namespace morai
