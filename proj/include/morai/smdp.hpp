#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "morai/errors.hpp"
#include "morai/level.hpp"
#include "morai/rng.hpp"
#include "morai/session_log.hpp"

namespace morai {

struct CreditConfig {
  double gamma = 0.1;
  double deletion_penalty = -0.1;
  double first_rank_reward = 1.0;
  double second_rank_reward = -1.0;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("gamma must lie in (0, 1]");
    if (!(deletion_penalty <= 0.0)) throw ContractError("deletion_penalty must be <= 0");
  }
};

/// Reward credited to one AI addition of a session.
struct CreditedAddition {
  int turn = 0;        // Turn::index
  int position = 0;    // index within the turn's additions
  std::size_t event_index = 0;
  int x = 0;
  int y = 0;
  SpriteId sprite = 0;
  bool deleted = false;
  double reward = 0.0;
};

using CreditMap = std::vector<CreditedAddition>;

/// Spreads the session's Reuse reward over the AI's additions. All additions of one
/// AI turn share the discount exponent, counted backwards from the final AI turn;
/// additions the human later deleted also receive the (undiscounted) deletion penalty.
inline CreditMap assign_credit(const SessionLog& log, const CreditConfig& cfg = {}) {
  cfg.validate();
  auto rank = log.final_rank();
  if (!rank) throw CreditError("session " + log.session_id + " has no rank event");
  const double final_reward = rank->reuse_rank == 1 ? cfg.first_rank_reward : cfg.second_rank_reward;
  const auto turns = segment_turns(log);
  if (turns.empty()) throw CreditError("session " + log.session_id + " has no turns");

  CreditMap credits;
  // cell -> index into `credits` of the AI addition currently occupying it
  std::map<std::pair<int, int>, std::size_t> live;
  std::vector<std::size_t> event_to_credit(log.events.size(), SIZE_MAX);
  for (const auto& t : turns) {
    const int exponent = static_cast<int>(turns.size()) - 1 - t.index;
    const double discounted = final_reward * std::pow(cfg.gamma, exponent);
    for (std::size_t k = 0; k < t.ai_additions.size(); ++k) {
      const auto& a = t.ai_additions[k];
      event_to_credit[t.ai_event_indices[k]] = credits.size();
      credits.push_back({t.index, static_cast<int>(k), t.ai_event_indices[k], a.x, a.y, a.sprite, false, discounted});
    }
  }
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    if (e.kind == EventKind::Place && event_to_credit[i] != SIZE_MAX) {
      live[{e.place->x, e.place->y}] = event_to_credit[i];
    } else if (e.kind == EventKind::Place) {
      live.erase({e.place->x, e.place->y});
    } else if (e.kind == EventKind::Delete) {
      auto it = live.find({e.del->x, e.del->y});
      if (it != live.end()) {
        auto& c = credits[it->second];
        c.deleted = true;
        c.reward += cfg.deletion_penalty;
        live.erase(it);
      }
    }
  }
  return credits;
}

// ---------------------------------------------------------------------------
// Samples

struct ActionEntry {
  int x = 0;
  int y = 0;
  SpriteId sprite = 0;
  double reward = 0.0;
  bool operator==(const ActionEntry&) const = default;
};

/// One training/evaluation unit: a 40-column state chunk and the credited additions over it.
/// The state is held as the 40-wide grid it one-hot encodes (see state_tensor()).
struct SmdpSample {
  std::string participant_id;
  TileGrid state{kChunkWidth};
  std::vector<ActionEntry> actions;

  ChunkTensor state_tensor() const { return encode_chunk(state, 0); }
  bool operator==(const SmdpSample&) const = default;
};

inline void validate_sample(const SmdpSample& s) {
  if (s.state.width() != kChunkWidth) throw ContractError("sample state must be 40 columns wide");
  std::set<std::pair<int, int>> seen;
  for (const auto& a : s.actions) {
    if (a.x < 0 || a.x >= kChunkWidth || a.y < 0 || a.y >= kLevelHeight)
      throw ContractError("sample action outside the 40x15 chunk");
    if (!std::isfinite(a.reward)) throw ContractError("sample action reward is not finite");
    if (s.state.occupied(a.x, a.y)) throw ContractError("sample action targets an occupied cell");
    if (!seen.insert({a.x, a.y}).second) throw ContractError("sample has duplicate action cells");
  }
}

/// Cuts every turn into non-overlapping 40-column windows anchored at x = 0 and keeps
/// the windows that received at least one AI addition.
inline std::vector<SmdpSample> build_samples(const SessionLog& log, const CreditMap& credits) {
  const auto turns = segment_turns(log);
  std::map<int, std::vector<const CreditedAddition*>> by_turn;
  for (const auto& c : credits) by_turn[c.turn].push_back(&c);
  std::vector<SmdpSample> out;
  for (const auto& t : turns) {
    auto it = by_turn.find(t.index);
    if (it == by_turn.end()) continue;
    std::map<int, std::vector<const CreditedAddition*>> windows;
    for (const auto* c : it->second) {
      if (c->x < 0) throw StructureError("addition outside any window");
      windows[c->x / kChunkWidth].push_back(c);
    }
    for (const auto& [w, adds] : windows) {
      SmdpSample s;
      s.participant_id = log.participant_id;
      s.state = t.state_after_human.window(w * kChunkWidth, kChunkWidth);
      for (const auto* c : adds) s.actions.push_back({c->x - w * kChunkWidth, c->y, c->sprite, c->reward});
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Approximated co-creative data from finished levels: for every 40-column window
/// (stride 1) and every sprite type in it, the state lacks all sprites of that type and
/// the actions put them back with reward 1.
inline std::vector<SmdpSample> build_smb_samples(const std::vector<TileGrid>& levels,
                                                 const std::string& participant_id = "smb") {
  if (levels.empty()) throw ContractError("build_smb_samples: no levels");
  std::vector<SmdpSample> out;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const auto& level = levels[li];
    if (level.width() < kChunkWidth) {
      std::cerr << "warning: level " << li << " is narrower than " << kChunkWidth << " columns; skipped\n";
      continue;
    }
    for (int x0 = 0; x0 + kChunkWidth <= level.width(); ++x0) {
      TileGrid window = level.window(x0, kChunkWidth);
      std::set<SpriteId> types;
      for (int x = 0; x < kChunkWidth; ++x)
        for (int y = 0; y < kLevelHeight; ++y)
          if (auto s = window.at(x, y)) types.insert(*s);
      for (SpriteId type : types) {
        SmdpSample sample;
        sample.participant_id = participant_id;
        sample.state = window;
        for (int x = 0; x < kChunkWidth; ++x)
          for (int y = 0; y < kLevelHeight; ++y)
            if (window.at(x, y) == type) {
              sample.state.clear(x, y);
              sample.actions.push_back({x, y, type, 1.0});
            }
        out.push_back(std::move(sample));
      }
    }
  }
  return out;
}

struct DatasetSplit {
  std::vector<SmdpSample> train;
  std::vector<SmdpSample> test;
  std::set<std::string> test_participants;
};

/// Participant-level split. Participants are shuffled; the test set is the smallest
/// suffix holding ceil((1 - ratio) * N) participants, taking only participants none of
/// whose sessions is incomplete.
inline DatasetSplit split_by_participant(const std::vector<SmdpSample>& samples,
                                         const std::set<std::string>& incomplete_participants, double ratio,
                                         Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("split ratio must lie in (0, 1)");
  std::vector<std::string> participants;
  for (const auto& s : samples)
    if (std::find(participants.begin(), participants.end(), s.participant_id) == participants.end())
      participants.push_back(s.participant_id);
  if (participants.size() < 2) throw SplitError("need at least two participants to split");
  std::sort(participants.begin(), participants.end());
  std::shuffle(participants.begin(), participants.end(), rng);

  const double wanted = (1.0 - ratio) * static_cast<double>(participants.size());
  const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(wanted - 1e-9)));
  DatasetSplit split;
  for (auto it = participants.rbegin(); it != participants.rend() && split.test_participants.size() < n_test; ++it)
    if (!incomplete_participants.count(*it)) split.test_participants.insert(*it);
  if (split.test_participants.empty()) throw SplitError("no participant has only complete sessions");
  for (const auto& s : samples)
    (split.test_participants.count(s.participant_id) ? split.test : split.train).push_back(s);
  return split;
}

// ---------------------------------------------------------------------------
// Sample JSONL: {"pid":..,"state":[[x,y,s],...],"actions":[[x,y,s,r],...]}

inline std::string format_sample_line(const SmdpSample& s) {
  nlohmann::ordered_json j;
  j["pid"] = s.participant_id;
  auto state = nlohmann::ordered_json::array();
  for (int x = 0; x < kChunkWidth; ++x)
    for (int y = 0; y < kLevelHeight; ++y)
      if (auto v = s.state.at(x, y)) state.push_back({x, y, *v});
  j["state"] = std::move(state);
  auto actions = nlohmann::ordered_json::array();
  for (const auto& a : s.actions) actions.push_back({a.x, a.y, a.sprite, a.reward});
  j["actions"] = std::move(actions);
  return j.dump() + "\n";
}

inline SmdpSample parse_sample_line(std::string_view line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    SmdpSample s;
    s.participant_id = j.at("pid").get<std::string>();
    for (const auto& c : j.at("state")) {
      int sprite = c.at(2).get<int>();
      if (sprite < 0 || sprite >= kSpriteCount) throw ParseError(line_no, "sprite index out of range");
      s.state.set(c.at(0).get<int>(), c.at(1).get<int>(), static_cast<SpriteId>(sprite));
    }
    for (const auto& a : j.at("actions")) {
      int sprite = a.at(2).get<int>();
      if (sprite < 0 || sprite >= kSpriteCount) throw ParseError(line_no, "sprite index out of range");
      s.actions.push_back({a.at(0).get<int>(), a.at(1).get<int>(), static_cast<SpriteId>(sprite), a.at(3).get<double>()});
    }
    validate_sample(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, std::string("malformed sample: ") + e.what());
  } catch (const ContractError& e) {
    throw ParseError(line_no, e.what());
  }
}

inline void write_samples(const std::vector<SmdpSample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& s : samples) out << format_sample_line(s);
}

inline std::vector<SmdpSample> read_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<SmdpSample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    out.push_back(parse_sample_line(line, n));
  }
  return out;
}

}  // namespace morai
