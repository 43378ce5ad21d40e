#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "morai/agents/agent.hpp"
#include "morai/level.hpp"
#include "morai/nn/adam.hpp"
#include "morai/nn/layers.hpp"
#include "morai/nn/weights_io.hpp"
#include "morai/smdp.hpp"

namespace morai {

struct ConvLayerSpec {
  int filters;
  int size;
};

struct CnnConfig {
  int width = kChunkWidth;
  int height = kLevelHeight;
  int channels = kSpriteCount;
  std::vector<ConvLayerSpec> convs = {{8, 4}, {16, 3}, {32, 3}};
  // Units in the linear bottleneck of the output layer; 0 means one full dense layer
  // from the last conv volume to the output volume.
  int dense_rank = 64;
  double leaky_slope = 0.01;
  // Decoding: cells whose best channel exceeds `threshold` become additions, at most `cap`.
  double threshold = 0.5;
  int cap = kMaxAdditions;

  nlohmann::json to_json() const {
    nlohmann::json convs_j = nlohmann::json::array();
    for (const auto& c : convs) convs_j.push_back({c.filters, c.size});
    return {{"width", width},         {"height", height},           {"channels", channels},
            {"convs", convs_j},       {"dense_rank", dense_rank},   {"leaky_slope", leaky_slope},
            {"threshold", threshold}, {"cap", cap}};
  }
  static CnnConfig from_json(const nlohmann::json& j) {
    CnnConfig c;
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.channels = j.at("channels").get<int>();
    c.convs.clear();
    for (const auto& cv : j.at("convs")) c.convs.push_back({cv.at(0).get<int>(), cv.at(1).get<int>()});
    c.dense_rank = j.at("dense_rank").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.threshold = j.value("threshold", 0.5);
    c.cap = j.value("cap", kMaxAdditions);
    return c;
  }
};

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 500;
  // Stop once the loss improved by less than `min_rel_improvement` (relative) over
  // the last `convergence_window` epochs.
  int convergence_window = 10;
  double min_rel_improvement = 1e-4;
  // Also stop once the epoch loss falls below this; 0 disables it.
  double target_loss = 0.0;
  nn::AdamConfig adam{};
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size <= 0 || max_epochs <= 0 || convergence_window <= 0 || min_rel_improvement <= 0.0 || target_loss < 0.0)
      throw ContractError("train config values must be positive");
  }
};

/// Conv stack with leaky ReLU, then a linear map to one value per (cell, sprite).
class CnnModel {
 public:
  CnnConfig config;
  nn::Sequential net;
  nn::AdamConfig adam{};
  nn::OptimizerState optimizer;

  CnnModel() : CnnModel(CnnConfig{}, 0) {}
  CnnModel(CnnConfig cfg, std::uint64_t seed) : config(std::move(cfg)) {
    Rng rng(seed);
    int ch = config.channels;
    for (const auto& c : config.convs) {
      net.layers.emplace_back(nn::Conv2d(ch, c.filters, c.size, rng));
      net.layers.emplace_back(nn::LeakyRelu{config.leaky_slope});
      ch = c.filters;
    }
    const int flat = config.width * config.height * ch;
    const int out = config.width * config.height * config.channels;
    if (config.dense_rank > 0) {
      net.layers.emplace_back(nn::Dense(flat, config.dense_rank, rng));
      net.layers.emplace_back(nn::Dense(config.dense_rank, out, rng));
    } else {
      net.layers.emplace_back(nn::Dense(flat, out, rng));
    }
    net.layers.emplace_back(nn::Reshape{{static_cast<std::size_t>(config.width), static_cast<std::size_t>(config.height),
                                         static_cast<std::size_t>(config.channels)}});
  }

  std::vector<std::size_t> input_shape() const {
    return {static_cast<std::size_t>(config.width), static_cast<std::size_t>(config.height),
            static_cast<std::size_t>(config.channels)};
  }

  nn::Tensor forward(const nn::Tensor& input) const { return net.predict(input); }
  nn::Tensor forward(const ChunkTensor& chunk) const { return net.predict(nn::Tensor(input_shape(), chunk.values())); }

  bool has_pristine() const { return pristine_.has_value(); }
  const std::vector<nn::Tensor>& pristine() const {
    if (!pristine_) throw StateError("cnn has no pristine snapshot");
    return *pristine_;
  }
  void snapshot_pristine() {
    std::vector<nn::Tensor> snap;
    for (nn::Tensor* p : net.params()) snap.push_back(*p);
    pristine_ = std::move(snap);
  }

  std::vector<nn::Tensor> params_copy() {
    std::vector<nn::Tensor> out;
    for (nn::Tensor* p : net.params()) out.push_back(*p);
    return out;
  }

 private:
  std::optional<std::vector<nn::Tensor>> pristine_;
};

/// Regression target: credited reward (clamped to [-1, 1]) at each action's
/// (cell, sprite), zero everywhere else.
inline ChunkTensor make_target(const SmdpSample& sample) {
  ChunkTensor t;
  std::set<std::pair<int, int>> seen;
  for (const auto& a : sample.actions) {
    if (!seen.insert({a.x, a.y}).second) throw ContractError("make_target: duplicate action cell");
    if (a.x < 0 || a.x >= kChunkWidth || a.y < 0 || a.y >= kLevelHeight) throw ContractError("make_target: action outside chunk");
    t.at(a.x, a.y, a.sprite) = std::clamp(a.reward, -1.0, 1.0);
  }
  return t;
}

namespace detail {

// Forward + backward for one sample; accumulates gradients scaled for a batch of `batch`.
inline double accumulate_sample(CnnModel& model, const SmdpSample& s, std::size_t batch) {
  const nn::Tensor input(model.input_shape(), s.state_tensor().values());
  const nn::Tensor target(model.input_shape(), make_target(s).values());
  const auto cache = model.net.forward(input);
  auto lg = nn::mse_loss(cache.output(), target);
  if (!std::isfinite(lg.loss)) throw TrainingError("non-finite loss");
  const double scale = 1.0 / static_cast<double>(batch);
  for (double& g : lg.grad.values) g *= scale;
  model.net.backward(cache, std::move(lg.grad));
  return lg.loss;
}

}  // namespace detail

/// Mean per-sample MSE over `samples` without touching the model.
inline double dataset_loss(const CnnModel& model, const std::vector<SmdpSample>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) {
    const auto out = model.forward(s.state_tensor());
    total += nn::mse_loss(out, nn::Tensor(model.input_shape(), make_target(s).values())).loss;
  }
  return total / static_cast<double>(samples.size());
}

struct TrainResult {
  std::vector<double> loss_curve;  // mean training loss of each epoch
  int epochs = 0;
  bool converged = false;
};

/// Mini-batch MSE/Adam training. Stops at `max_epochs` or when the epoch loss stops
/// improving; the final weights become the pristine snapshot.
inline TrainResult pretrain(CnnModel& model, const std::vector<SmdpSample>& samples, const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw TrainingError("pretrain: no samples");
  for (const auto& s : samples) validate_sample(s);
  model.adam = cfg.adam;
  model.optimizer = nn::make_optimizer_state(model.net.params());
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainResult r;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      model.net.zero_grad();
      for (std::size_t k = start; k < end; ++k) total += detail::accumulate_sample(model, samples[order[k]], end - start);
      nn::adam_step(model.net.params(), model.net.grads(), model.optimizer, model.adam);
    }
    const double mean = total / static_cast<double>(samples.size());
    if (!std::isfinite(mean)) throw TrainingError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
    r.loss_curve.push_back(mean);
    r.epochs = epoch + 1;
    if (mean < cfg.target_loss) {
      r.converged = true;
      break;
    }
    const auto w = static_cast<std::size_t>(cfg.convergence_window);
    if (r.loss_curve.size() > w) {
      const double before = r.loss_curve[r.loss_curve.size() - 1 - w];
      if (before <= 0.0 || (before - mean) / before < cfg.min_rel_improvement) {
        r.converged = true;
        break;
      }
    }
  }
  model.snapshot_pristine();
  model.optimizer = nn::make_optimizer_state(model.net.params());
  return r;
}

/// Leftmost column of the 40-column window shown around `camera_x`.
inline int window_anchor_for_camera(int level_width, int camera_x) {
  return std::clamp(camera_x - kChunkWidth / 2, 0, std::max(0, level_width - kChunkWidth));
}

/// Decodes the value volume over the window at `anchor`: empty cells whose best sprite
/// value exceeds the threshold, best first, capped.
inline Additions cnn_propose(const CnnModel& model, const TileGrid& level, int anchor) {
  if (model.config.width != kChunkWidth || model.config.height != kLevelHeight)
    throw ShapeError("cnn_propose needs a 40x15 model");
  const auto out = model.forward(encode_chunk(level, anchor));
  struct Candidate {
    double value;
    int x, y;
    SpriteId sprite;
  };
  std::vector<Candidate> cands;
  for (int x = 0; x < kChunkWidth; ++x) {
    const int gx = anchor + x;
    if (gx >= level.width()) break;
    for (int y = 0; y < kLevelHeight; ++y) {
      if (level.occupied(gx, y)) continue;
      const double* v = out.data() + ChunkTensor::offset(x, y, 0);
      const auto best = static_cast<int>(std::max_element(v, v + kSpriteCount) - v);
      if (v[best] > model.config.threshold) cands.push_back({v[best], gx, y, static_cast<SpriteId>(best)});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
  const auto& palette = SpritePalette::standard();
  TileGrid after = level;
  Additions adds;
  for (const auto& c : cands) {
    if (static_cast<int>(adds.size()) >= model.config.cap) break;
    // A flying enemy may not rest on anything, including another addition.
    if (palette.is_flying(c.sprite) && after.occupied_or_false(c.x, c.y + 1)) continue;
    if (c.y > 0 && after.occupied(c.x, c.y - 1) && palette.is_flying(*after.at(c.x, c.y - 1))) continue;
    after.set(c.x, c.y, c.sprite);
    adds.push_back({c.x, c.y, c.sprite});
  }
  return adds;
}

/// One gradient step on a single sample with the model's persistent optimizer state.
/// Returns the sample's loss before the step.
inline double active_update(CnnModel& model, const SmdpSample& sample) {
  model.net.zero_grad();
  const double loss = detail::accumulate_sample(model, sample, 1);
  nn::adam_step(model.net.params(), model.net.grads(), model.optimizer, model.adam);
  return loss;
}

/// Restores the post-pretraining weights and starts a fresh optimizer.
inline void reset_to_pristine(CnnModel& model) {
  const auto& snap = model.pristine();
  auto params = model.net.params();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = snap[i];
  model.optimizer = nn::make_optimizer_state(params);
}

inline std::string encode_cnn_model(CnnModel& model) {
  nlohmann::json h{{"kind", "cnn"}, {"config", model.config.to_json()}, {"layers", model.net.spec()}};
  std::vector<const nn::Tensor*> ts;
  for (nn::Tensor* p : model.net.params()) ts.push_back(p);
  return nn::encode_weights(h, ts);
}

/// Loaded weights are treated as the pristine snapshot.
inline CnnModel decode_cnn_model(const std::string& bytes) {
  const auto d = nn::decode_weights(bytes);
  if (d.header.value("kind", "") != "cnn") throw FormatError("not a cnn model");
  CnnModel m(CnnConfig::from_json(d.header.at("config")), 0);
  if (m.net.spec() != d.header.at("layers")) throw FormatError("cnn layer specs do not match the config");
  d.assign_to(m.net.params());
  m.snapshot_pristine();
  m.optimizer = nn::make_optimizer_state(m.net.params());
  return m;
}

class CnnAgent final : public Agent {
 public:
  explicit CnnAgent(CnnModel model, std::string name = "cnn") : model_(std::move(model)), name_(std::move(name)) {}

  std::string name() const override { return name_; }
  Additions propose(const TileGrid& level, int camera_x, Rng&) override {
    return cnn_propose(model_, level, window_anchor_for_camera(level.width(), camera_x));
  }
  bool supports_active() const override { return true; }
  void active_update(const SmdpSample& s) override { morai::active_update(model_, s); }
  void reset_to_pristine() override { morai::reset_to_pristine(model_); }

  CnnModel& model() { return model_; }
  const CnnModel& model() const { return model_; }

 private:
  CnnModel model_;
  std::string name_;
};

}  // namespace morai
