#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "morai/agents/agent.hpp"
#include "morai/cnn.hpp"
#include "morai/smdp.hpp"

namespace morai {

enum class ActiveMode { None, Episodic, Continuous };

inline const char* to_string(ActiveMode m) {
  switch (m) {
    case ActiveMode::None: return "none";
    case ActiveMode::Episodic: return "episodic";
    case ActiveMode::Continuous: return "continuous";
  }
  return "?";
}

inline std::optional<ActiveMode> mode_from_string(std::string_view s) {
  if (s == "none") return ActiveMode::None;
  if (s == "episodic") return ActiveMode::Episodic;
  if (s == "continuous") return ActiveMode::Continuous;
  return std::nullopt;
}

/// Credited reward of every logged AI addition of one sample, keyed by (x, y, sprite).
struct RewardMap {
  std::map<std::tuple<int, int, int>, double> rewards;
  double max_positive = 0.0;

  static RewardMap from_sample(const SmdpSample& s) {
    RewardMap m;
    for (const auto& a : s.actions) {
      const auto [it, inserted] = m.rewards.emplace(std::make_tuple(a.x, a.y, static_cast<int>(a.sprite)), a.reward);
      if (!inserted) throw ContractError("reward map: duplicate key");
      if (a.reward > 0.0) m.max_positive += a.reward;
    }
    return m;
  }
};

/// Sum of the mapped rewards of the proposed additions; unknown additions score 0.
inline double score_actions(const Additions& proposed, const RewardMap& map) {
  double sum = 0.0;
  for (const auto& a : proposed) {
    auto it = map.rewards.find({a.x, a.y, static_cast<int>(a.sprite)});
    if (it != map.rewards.end()) sum += it->second;
  }
  return sum;
}

struct ParticipantResult {
  std::string participant_id;
  double summed_reward = 0.0;
  double max_reward = 0.0;
};

struct EvalReport {
  std::string agent;
  std::string mode = "none";
  std::string label;  // column heading
  std::vector<ParticipantResult> participants;
  double avg_percent = 0.0;

  bool operator==(const EvalReport& o) const {
    if (agent != o.agent || mode != o.mode || label != o.label || participants.size() != o.participants.size() ||
        avg_percent != o.avg_percent)
      return false;
    for (std::size_t i = 0; i < participants.size(); ++i) {
      const auto& a = participants[i];
      const auto& b = o.participants[i];
      if (a.participant_id != b.participant_id || a.summed_reward != b.summed_reward || a.max_reward != b.max_reward)
        return false;
    }
    return true;
  }
};

/// Mean of 100 * sum / max over participants with a positive maximum.
inline double average_percent(const std::vector<ParticipantResult>& rows) {
  double total = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.max_reward <= 0.0) continue;
    total += 100.0 * r.summed_reward / r.max_reward;
    ++n;
  }
  return n == 0 ? 0.0 : total / n;
}

using ParticipantGroups = std::vector<std::pair<std::string, std::vector<SmdpSample>>>;

/// Groups samples by participant, keeping first-appearance order.
inline ParticipantGroups group_by_participant(const std::vector<SmdpSample>& samples) {
  ParticipantGroups groups;
  for (const auto& s : samples) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == s.participant_id; });
    if (it == groups.end()) {
      groups.emplace_back(s.participant_id, std::vector<SmdpSample>{});
      it = std::prev(groups.end());
    }
    it->second.push_back(s);
  }
  return groups;
}

/// Replays the held-out samples against `agent`: each sample's state is offered as a
/// 40-column level, the proposal is scored against the logged rewards, and in the active
/// modes the agent then trains one step on that sample. Episodic mode restores the
/// pretrained weights before every participant; continuous mode only at the start.
inline EvalReport simulate(Agent& agent, const ParticipantGroups& groups, ActiveMode mode, std::uint64_t seed) {
  if (mode != ActiveMode::None && !agent.supports_active())
    throw ModeError(agent.name() + " cannot run in " + to_string(mode) + " mode");
  Rng rng(seed);
  EvalReport report;
  report.agent = agent.name();
  report.mode = to_string(mode);
  report.label = mode == ActiveMode::None ? report.agent : report.agent + "/" + report.mode;
  if (mode != ActiveMode::None) agent.reset_to_pristine();
  for (const auto& [pid, samples] : groups) {
    if (mode == ActiveMode::Episodic) agent.reset_to_pristine();
    ParticipantResult row{pid, 0.0, 0.0};
    for (const auto& s : samples) {
      const RewardMap map = RewardMap::from_sample(s);
      const Additions proposal = agent.propose(s.state, kChunkWidth / 2, rng);
      check_additions(s.state, proposal, kMaxAdditions);
      row.summed_reward += score_actions(proposal, map);
      row.max_reward += map.max_positive;
      if (mode != ActiveMode::None) agent.active_update(s);
    }
    report.participants.push_back(row);
  }
  if (mode != ActiveMode::None) agent.reset_to_pristine();
  report.avg_percent = average_percent(report.participants);
  return report;
}

// ---------------------------------------------------------------------------
// Tables

/// Two decimals below 10, one decimal below 100, none above.
inline std::string format_reward(double v) {
  char buf[64];
  const double a = std::abs(v);
  if (a < 9.995)
    std::snprintf(buf, sizeof buf, "%.2f", v);
  else if (a < 99.95)
    std::snprintf(buf, sizeof buf, "%.1f", v);
  else
    std::snprintf(buf, sizeof buf, "%.0f", v);
  return buf;
}

inline std::string format_percent(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

struct RenderedTable {
  std::string text;
  std::string csv;
};

/// One row per participant plus an "Avg %" footer; one column per report.
inline RenderedTable render_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw LayoutError("render_table: no reports");
  const auto& first = reports.front().participants;
  for (const auto& r : reports) {
    if (r.participants.size() != first.size()) throw LayoutError("render_table: participant sets differ");
    for (std::size_t i = 0; i < first.size(); ++i)
      if (r.participants[i].participant_id != first[i].participant_id)
        throw LayoutError("render_table: participant sets differ");
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"participant"};
  for (const auto& r : reports) header.push_back(r.label.empty() ? r.agent : r.label);
  rows.push_back(header);
  for (std::size_t i = 0; i < first.size(); ++i) {
    std::vector<std::string> row{first[i].participant_id};
    for (const auto& r : reports) row.push_back(format_reward(r.participants[i].summed_reward));
    rows.push_back(row);
  }
  std::vector<std::string> footer{"Avg %"};
  for (const auto& r : reports) footer.push_back(format_percent(r.avg_percent));
  rows.push_back(footer);

  RenderedTable out;
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  std::ostringstream text;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r == rows.size() - 1) {
      for (std::size_t c = 0; c < widths.size(); ++c) text << (c ? "-+-" : "") << std::string(widths[c], '-');
      text << "\n";
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const auto& cell = rows[r][c];
      text << (c ? " | " : "") << (c ? std::string(widths[c] - cell.size(), ' ') + cell : cell + std::string(widths[c] - cell.size(), ' '));
    }
    text << "\n";
    if (r == 0) {
      for (std::size_t c = 0; c < widths.size(); ++c) text << (c ? "-+-" : "") << std::string(widths[c], '-');
      text << "\n";
    }
  }
  out.text = text.str();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out.csv += (c ? "," : "") + row[c];
    out.csv += "\n";
  }
  return out;
}

}  // namespace morai
