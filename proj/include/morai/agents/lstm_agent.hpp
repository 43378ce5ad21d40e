#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "morai/agents/agent.hpp"
#include "morai/level.hpp"
#include "morai/nn/adam.hpp"
#include "morai/nn/lstm.hpp"
#include "morai/nn/weights_io.hpp"

namespace morai {

inline constexpr int kLstmWindow = 65;
// Tokens 0..9 are the abstract alphabet; 10 separates columns.
inline constexpr int kColumnSeparator = static_cast<int>(kAlphabet.size());
inline constexpr int kLstmVocab = kColumnSeparator + 1;

struct LstmAgentModel {
  nn::BiLstm net;
  double threshold = 0.5;
  int cap = kMaxAdditions;
  int window = kLstmWindow;
};

/// Column-major, bottom-to-top serialization of columns [x0, x1), a separator after each column.
inline std::vector<int> serialize_columns(const AbstractGrid& g, int x0, int x1) {
  std::vector<int> tokens;
  tokens.reserve(static_cast<std::size_t>(x1 - x0) * (kLevelHeight + 1));
  for (int x = x0; x < x1; ++x) {
    for (int y = kLevelHeight - 1; y >= 0; --y) tokens.push_back(symbol_index(g.at(x, y)));
    tokens.push_back(kColumnSeparator);
  }
  return tokens;
}

/// Columns [first, last) of the window centred on `camera_x`, clipped to the level.
inline std::pair<int, int> lstm_window(int level_width, int camera_x, int window = kLstmWindow) {
  const int half = window / 2;
  const int x0 = std::clamp(camera_x - half, 0, level_width);
  const int x1 = std::clamp(camera_x - half + window, 0, level_width);
  return {x0, x1};
}

struct LstmTrainConfig {
  int hidden = 128;
  int epochs = 50;
  nn::AdamConfig adam{};
  std::uint64_t seed = 0;
};

struct LstmTrainResult {
  LstmAgentModel model;
  std::vector<double> loss_curve;  // mean loss per epoch, one entry per epoch
};

/// Cross-entropy training of the bidirectional predictor on whole-level sequences.
inline LstmTrainResult lstm_train(const std::vector<TileGrid>& levels, const LstmTrainConfig& cfg) {
  if (levels.empty()) throw ContractError("lstm_train: no levels");
  Rng rng(cfg.seed);
  LstmTrainResult r;
  r.model.net = nn::BiLstm(kLstmVocab, cfg.hidden, rng);
  std::vector<std::vector<int>> corpus;
  for (const auto& level : levels) corpus.push_back(serialize_columns(to_abstract(level), 0, level.width()));
  nn::OptimizerState opt;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& seq : corpus) {
      r.model.net.zero_grad();
      const double loss = nn::lstm_sequence_loss(r.model.net, seq, true);
      if (!std::isfinite(loss)) throw TrainingError("lstm training diverged at epoch " + std::to_string(epoch));
      total += loss;
      nn::adam_step(r.model.net.params(), r.model.net.grads(), opt, cfg.adam);
    }
    r.loss_curve.push_back(total / static_cast<double>(corpus.size()));
  }
  return r;
}

inline double lstm_corpus_loss(LstmAgentModel& model, const std::vector<TileGrid>& levels) {
  double total = 0.0;
  for (const auto& level : levels)
    total += nn::lstm_sequence_loss(model.net, serialize_columns(to_abstract(level), 0, level.width()), false);
  return total / static_cast<double>(levels.size());
}

/// Predicts every empty cell of the camera window from its bidirectional context and adds
/// the confident non-empty predictions, most probable first, up to the cap.
inline Additions lstm_propose(const LstmAgentModel& model, const TileGrid& level, int camera_x, Rng& rng) {
  const auto [x0, x1] = lstm_window(level.width(), camera_x, model.window);
  if (x1 <= x0) return {};
  const AbstractGrid g = to_abstract(level);
  const auto tokens = serialize_columns(g, x0, x1);
  const auto enc = nn::lstm_bidirectional_encode(model.net, tokens);
  struct Candidate {
    double p;
    std::size_t order;
    PlannedSymbol cell;
  };
  std::vector<Candidate> cands;
  for (int x = x0; x < x1; ++x)
    for (int y = kLevelHeight - 1; y >= 0; --y) {
      if (level.occupied(x, y)) continue;
      const std::size_t t = static_cast<std::size_t>(x - x0) * (kLevelHeight + 1) + static_cast<std::size_t>(kLevelHeight - 1 - y);
      const auto dist = nn::predict_token(model.net, enc, t);
      // Best symbol, ignoring the separator.
      int best = 0;
      for (int s = 1; s < kColumnSeparator; ++s)
        if (dist[static_cast<std::size_t>(s)] > dist[static_cast<std::size_t>(best)]) best = s;
      const Symbol sym = kAlphabet[static_cast<std::size_t>(best)];
      const double p = dist[static_cast<std::size_t>(best)];
      if (sym == Symbol::Empty || p < model.threshold) continue;
      cands.push_back({p, t, {x, y, sym}});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.p > b.p; });
  if (static_cast<int>(cands.size()) > model.cap) cands.resize(static_cast<std::size_t>(model.cap));
  std::vector<PlannedSymbol> planned;
  for (const auto& c : cands) planned.push_back(c.cell);
  return realize(planned, level, rng);
}

inline std::string encode_lstm_model(LstmAgentModel& m) {
  nlohmann::json h{{"kind", "lstm"},       {"vocab", m.net.vocab}, {"hidden", m.net.hidden},
                   {"threshold", m.threshold}, {"cap", m.cap},         {"window", m.window}};
  std::vector<const nn::Tensor*> ts;
  for (nn::Tensor* t : m.net.params()) ts.push_back(t);
  return nn::encode_weights(h, ts);
}

inline LstmAgentModel decode_lstm_model(const std::string& bytes) {
  auto d = nn::decode_weights(bytes);
  if (d.header.value("kind", "") != "lstm") throw FormatError("not an lstm model");
  LstmAgentModel m;
  Rng rng(0);
  m.net = nn::BiLstm(d.header.at("vocab").get<int>(), d.header.at("hidden").get<int>(), rng);
  if (m.net.vocab != kLstmVocab) throw FormatError("lstm model alphabet mismatch");
  m.threshold = d.header.value("threshold", 0.5);
  m.cap = d.header.value("cap", kMaxAdditions);
  m.window = d.header.value("window", kLstmWindow);
  d.assign_to(m.net.params());
  return m;
}

class LstmAgent final : public Agent {
 public:
  explicit LstmAgent(std::shared_ptr<const LstmAgentModel> model) : model_(std::move(model)) {}
  std::string name() const override { return "lstm"; }
  Additions propose(const TileGrid& level, int camera_x, Rng& rng) override {
    return lstm_propose(*model_, level, camera_x, rng);
  }

 private:
  std::shared_ptr<const LstmAgentModel> model_;
};

}  // namespace morai
