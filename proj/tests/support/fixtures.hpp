#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "morai/morai.hpp"

namespace morai::fixtures {

/// A Mario-like level: two ground rows with gaps, pipes, block rows with coins,
/// staircases, goombas, scenery, and a flagpole near the right edge.
inline TileGrid smb_like_level(int width, Rng& rng) {
  using namespace sprite;
  TileGrid g(width);
  auto coin = [&](double p) { return uniform_real(rng, 0.0, 1.0) < p; };
  auto free = [&](int x, int y) { return g.in_bounds(x, y) && !g.occupied(x, y); };
  for (int x = 0; x < width; ++x) {
    g.set(x, 14, kGround);
    g.set(x, 13, kGround);
  }
  int x = 8;
  while (x < width - 12) {
    const int feature = static_cast<int>(uniform_index(rng, 5));
    if (feature == 0) {  // gap
      const int w = 2 + static_cast<int>(uniform_index(rng, 2));
      for (int i = 0; i < w; ++i) {
        g.clear(x + i, 14);
        g.clear(x + i, 13);
      }
      x += w + 3;
    } else if (feature == 1) {  // pipe
      const int h = 2 + static_cast<int>(uniform_index(rng, 3));
      const int top = 13 - h;
      g.set(x, top, kPipeTopLeft);
      g.set(x + 1, top, kPipeTopRight);
      for (int y = top + 1; y < 13; ++y) {
        g.set(x, y, kPipeBodyLeft);
        g.set(x + 1, y, kPipeBodyRight);
      }
      x += 5;
    } else if (feature == 2) {  // block row
      const int w = 3 + static_cast<int>(uniform_index(rng, 3));
      for (int i = 0; i < w; ++i) {
        g.set(x + i, 9, coin(0.3) ? kQuestion : kBrick);
        if (coin(0.3)) g.set(x + i, 8, kCoin);
      }
      if (coin(0.5)) g.set(x + w / 2, 12, kGoomba);
      x += w + 2;
    } else if (feature == 3) {  // staircase
      const int h = 2 + static_cast<int>(uniform_index(rng, 3));
      for (int i = 0; i < h; ++i)
        for (int y = 12; y > 12 - (i + 1); --y) g.set(x + i, y, kHardBlock);
      x += h + 3;
    } else {  // enemies and scenery
      g.set(x, 12, kGoomba);
      if (coin(0.5) && free(x + 2, 12)) g.set(x + 2, 12, kGoomba);
      if (coin(0.5)) g.set(x + 1, 3, 28);  // cloud
      x += 4;
    }
  }
  const int pole = width - 4;
  for (int y = 4; y <= 12; ++y) g.set(pole, y, kFlagpole);
  g.set(pole, 3, kFlagTop);
  return g;
}

inline std::vector<TileGrid> smb_like_corpus(int count, int width, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TileGrid> out;
  for (int i = 0; i < count; ++i) out.push_back(smb_like_level(width, rng));
  return out;
}

/// Random level with scattered sprites of every kind, flying enemies only where unsupported.
inline TileGrid scattered_level(int width, Rng& rng, double density) {
  TileGrid g(width);
  for (int x = 0; x < width; ++x)
    for (int y = kLevelHeight - 1; y >= 0; --y)
      if (uniform_real(rng, 0.0, 1.0) < density) {
        auto s = static_cast<SpriteId>(uniform_index(rng, kSpriteCount));
        if (SpritePalette::standard().is_flying(s) && g.occupied_or_false(x, y + 1)) s = sprite::kCoin;
        g.set(x, y, s);
      }
  return g;
}

/// Empty if `adds` is a valid proposal for `level`, else what is wrong with it.
inline std::string additions_violation(const TileGrid& level, const Additions& adds, int cap = kMaxAdditions) {
  try {
    check_additions(level, adds, cap);
  } catch (const ContractError& e) {
    return e.what();
  }
  return {};
}

/// Random well-formed log: up to `max_turns` turns, each with a few human edits (some
/// deleting earlier sprites of either author) and up to `max_ai` AI additions.
inline SessionLog random_session_log(Rng& rng, int max_turns = 5, int max_ai = 10, int width = 60,
                                     const std::string& participant = "p0", const std::string& session = "s0") {
  SessionLog log;
  log.session_id = session;
  log.participant_id = participant;
  log.agent_name = "random";
  log.width = width;
  TileGrid g(width);
  std::vector<Actor> owner(static_cast<std::size_t>(width) * kLevelHeight, Actor::Human);
  std::int64_t t = 0;
  log.events.push_back(SessionEvent::make(t, Actor::Human, EventKind::SessionStart));
  auto random_empty = [&]() -> std::pair<int, int> {
    for (;;) {
      const int x = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(width)));
      const int y = static_cast<int>(uniform_index(rng, kLevelHeight));
      if (!g.occupied(x, y)) return {x, y};
    }
  };
  auto human_phase = [&] {
    const int edits = static_cast<int>(uniform_index(rng, 6));
    for (int k = 0; k < edits; ++k) {
      t += static_cast<std::int64_t>(uniform_index(rng, 500));
      std::vector<std::pair<int, int>> filled;
      for (int x = 0; x < width; ++x)
        for (int y = 0; y < kLevelHeight; ++y)
          if (g.occupied(x, y)) filled.emplace_back(x, y);
      if (!filled.empty() && uniform_real(rng, 0.0, 1.0) < 0.5) {
        const auto [x, y] = filled[uniform_index(rng, filled.size())];
        log.events.push_back(SessionEvent::deleted(t, x, y, owner[static_cast<std::size_t>(x) * kLevelHeight + y]));
        g.clear(x, y);
      } else {
        const auto [x, y] = random_empty();
        const auto s = static_cast<SpriteId>(uniform_index(rng, kSpriteCount));
        log.events.push_back(SessionEvent::placed(t, Actor::Human, x, y, s));
        g.set(x, y, s);
        owner[static_cast<std::size_t>(x) * kLevelHeight + y] = Actor::Human;
      }
    }
  };
  const int turns = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_turns)));
  for (int turn = 0; turn < turns; ++turn) {
    human_phase();
    t += 10;
    log.events.push_back(SessionEvent::make(t, Actor::Human, EventKind::EndTurn));
    const int n = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_ai + 1)));
    const auto& palette = SpritePalette::standard();
    for (int k = 0; k < n; ++k) {
      // AI proposals obey the flying-enemy rule: nothing under a flying enemy, which
      // itself never rests on anything.
      auto [x, y] = random_empty();
      while (g.occupied_or_false(x, y - 1) && palette.is_flying(*g.at(x, y - 1))) std::tie(x, y) = random_empty();
      auto s = static_cast<SpriteId>(uniform_index(rng, kSpriteCount));
      while (palette.is_flying(s) && g.occupied_or_false(x, y + 1)) s = static_cast<SpriteId>(uniform_index(rng, kSpriteCount));
      t += 1;
      log.events.push_back(SessionEvent::placed(t, Actor::Ai, x, y, s));
      g.set(x, y, s);
      owner[static_cast<std::size_t>(x) * kLevelHeight + y] = Actor::Ai;
    }
  }
  human_phase();
  t += 10;
  log.events.push_back(SessionEvent::make(t, Actor::Human, EventKind::SessionEnd));
  RankPayload r;
  r.reuse_rank = uniform_index(rng, 2) == 0 ? 1 : 2;
  log.events.push_back(SessionEvent::ranked(t, r));
  return log;
}

/// Credit by the letter of the definition, straight off the event list: an AI addition
/// earns final * gamma^(end_turns after it), plus the penalty if a later delete hits
/// its cell before anything else is placed there.
struct OracleCredit {
  std::size_t event_index;
  double reward;
};

inline std::vector<OracleCredit> oracle_credit(const SessionLog& log, double gamma = 0.1, double penalty = -0.1) {
  int reuse = 0;
  for (const auto& e : log.events)
    if (e.kind == EventKind::Rank) reuse = e.rank->reuse_rank;
  const double final_reward = reuse == 1 ? 1.0 : -1.0;
  std::vector<OracleCredit> out;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    if (e.actor != Actor::Ai || e.kind != EventKind::Place) continue;
    int later_turns = 0;
    for (std::size_t j = i + 1; j < log.events.size(); ++j)
      if (log.events[j].kind == EventKind::EndTurn) ++later_turns;
    double r = final_reward * std::pow(gamma, later_turns);
    for (std::size_t j = i + 1; j < log.events.size(); ++j) {
      const auto& f = log.events[j];
      if (f.kind == EventKind::Place && f.place->x == e.place->x && f.place->y == e.place->y) break;
      if (f.kind == EventKind::Delete && f.del->x == e.place->x && f.del->y == e.place->y) {
        r += penalty;
        break;
      }
    }
    out.push_back({i, r});
  }
  return out;
}

/// Logs of `participants` users with `sessions` random sessions each, ids p0.., s0...
inline std::vector<SessionLog> random_study(Rng& rng, int participants, int sessions) {
  std::vector<SessionLog> logs;
  int sid = 0;
  for (int p = 0; p < participants; ++p)
    for (int k = 0; k < sessions; ++k)
      logs.push_back(random_session_log(rng, 5, 10, 120, "p" + std::to_string(p), "s" + std::to_string(sid++)));
  return logs;
}

/// Fixed-policy agent that proposes each sample's logged additions, in evaluation order.
inline ScriptedAgent logged_policy(const ParticipantGroups& groups) {
  std::vector<Additions> script;
  for (const auto& [pid, samples] : groups)
    for (const auto& s : samples) {
      Additions a;
      for (const auto& act : s.actions) a.push_back({act.x, act.y, act.sprite});
      script.push_back(std::move(a));
    }
  return ScriptedAgent(std::move(script), "logged");
}

inline SmdpSample coin_row_sample(const std::string& pid, double reward) {
  SmdpSample s;
  s.participant_id = pid;
  for (int x = 0; x < kChunkWidth; ++x) s.state.set(x, kGroundRow, sprite::kGround);
  for (int x = 5; x < 11; ++x) s.actions.push_back({x, 8, sprite::kCoin, reward});
  return s;
}

/// A CNN pretrained to propose a row of six coins, and four participants who disagree
/// about it: "a" deletes the coins, "b" and "d" keep them, "c" keeps then deletes.
struct ActiveModeFixture {
  CnnModel model;
  ParticipantGroups groups;
};

inline ActiveModeFixture active_mode_fixture() {
  ActiveModeFixture f{CnnModel(CnnConfig{}, 1), {}};
  TrainConfig cfg;
  cfg.target_loss = 1e-5;
  cfg.max_epochs = 500;
  cfg.min_rel_improvement = 1e-12;
  pretrain(f.model, {coin_row_sample("train", 1.0)}, cfg);
  f.groups = {{"a", {coin_row_sample("a", -1.0)}},
              {"b", {coin_row_sample("b", 1.0)}},
              {"c", {coin_row_sample("c", 1.0), coin_row_sample("c", -1.0)}},
              {"d", {coin_row_sample("d", 1.0)}}};
  return f;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("morai_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::filesystem::path source_dir() { return MORAI_SOURCE_DIR; }

}  // namespace morai::fixtures
