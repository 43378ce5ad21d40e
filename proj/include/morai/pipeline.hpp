#pragma once

#include <algorithm>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "morai/agents/lstm_agent.hpp"
#include "morai/agents/markov.hpp"
#include "morai/agents/shape.hpp"
#include "morai/cnn.hpp"
#include "morai/config.hpp"
#include "morai/nn/weights_io.hpp"
#include "morai/session.hpp"
#include "morai/smdp.hpp"

namespace morai {

namespace detail {

inline std::vector<std::filesystem::path> files_with_extension(const std::string& dir, const std::string& ext) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

struct NamedLevel {
  std::string name;  // file stem
  TileGrid grid;
};

/// Every *.txt level in `dir`, in file-name order.
inline std::vector<NamedLevel> read_level_dir(const std::string& dir) {
  std::vector<NamedLevel> out;
  for (const auto& p : detail::files_with_extension(dir, ".txt")) {
    try {
      out.push_back({p.stem().string(), parse_level_text(nn::read_file(p.string()))});
    } catch (const FormatError& e) {
      throw FormatError(p.filename().string() + ": " + e.what());
    }
  }
  if (out.empty()) throw IoError("no .txt levels in " + dir);
  return out;
}

inline std::vector<TileGrid> load_levels(const std::string& dir) {
  std::vector<TileGrid> out;
  for (auto& l : read_level_dir(dir)) out.push_back(std::move(l.grid));
  return out;
}

struct LogCorpus {
  std::vector<SessionLog> logs;                   // complete and ranked
  std::set<std::string> incomplete_participants;  // own at least one unusable session
  std::vector<std::string> skipped;               // file: reason
};

/// Reads every *.jsonl session log in `dir`. Truncated or unranked sessions are left
/// out and mark their participant as incomplete.
inline LogCorpus read_log_dir(const std::string& dir) {
  LogCorpus c;
  ReadOptions opts;
  opts.tolerate_truncation = true;
  for (const auto& p : detail::files_with_extension(dir, ".jsonl")) {
    SessionLog log;
    try {
      log = read_jsonl(p.string(), opts);
    } catch (const Error& e) {
      c.skipped.push_back(p.filename().string() + ": " + e.what());
      const auto stem = p.stem().string();
      c.incomplete_participants.insert(stem.substr(0, stem.find('_')));
      continue;
    }
    if (!log.complete || !log.final_rank()) {
      c.skipped.push_back(p.filename().string() + ": " + (log.complete ? "no rank" : "truncated"));
      c.incomplete_participants.insert(log.participant_id);
      continue;
    }
    c.logs.push_back(std::move(log));
  }
  return c;
}

inline std::vector<SmdpSample> log_samples(const std::vector<SessionLog>& logs, const CreditConfig& cfg = {}) {
  std::vector<SmdpSample> out;
  for (const auto& log : logs) {
    auto s = build_samples(log, assign_credit(log, cfg));
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

inline const std::vector<std::string>& trainable_agents() {
  static const std::vector<std::string> names{"markov", "shape", "lstm", "cnn"};
  return names;
}

inline bool is_trainable_agent(const std::string& name) {
  const auto& n = trainable_agents();
  return std::find(n.begin(), n.end(), name) != n.end();
}

/// Loads a saved model of agent kind `kind` (markov, shape, lstm, cnn) and returns a
/// factory making independent agents from it. "random" needs no model.
inline AgentFactory load_agent_factory(const std::string& kind, const std::string& model_path, const AgentConfig& cfg = {}) {
  if (kind == "random") return [] { return std::make_unique<RandomAgent>(); };
  if (!is_trainable_agent(kind)) throw ContractError("unknown agent '" + kind + "'");
  const auto bytes = nn::read_file(model_path);
  if (kind == "markov" || kind == "shape") {
    auto j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw FormatError(model_path + " is not valid JSON");
    if (kind == "markov") {
      auto m = std::make_shared<const MarkovModel>(MarkovModel::from_json(j));
      return [m] { return std::make_unique<MarkovAgent>(m); };
    }
    auto m = std::make_shared<const ShapeModel>(ShapeModel::from_json(j));
    return [m] { return std::make_unique<ShapeAgent>(m); };
  }
  if (kind == "lstm") {
    auto m = std::make_shared<const LstmAgentModel>(decode_lstm_model(bytes));
    return [m] { return std::make_unique<LstmAgent>(m); };
  }
  auto m = std::make_shared<CnnModel>(decode_cnn_model(bytes));
  m->adam.lr = cfg.cnn_active_learning_rate;
  return [m] { return std::make_unique<CnnAgent>(*m); };
}

}  // namespace morai
