#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "morai/agents/lstm_agent.hpp"
#include "morai/cnn.hpp"
#include "morai/smdp.hpp"

namespace morai {

/// Agent hyperparameters, read from a JSON file. Every key is optional.
///
///   credit.gamma                  discount per later turn (0.1)
///   credit.deletion_penalty       reward for an addition the user deleted (-0.1)
///   split.train_ratio             share of complete participants used for training (0.8)
///   shape.threshold               minimum placement probability (0.1)
///   lstm.hidden                   hidden units per direction (128)
///   lstm.epochs                   passes over the corpus (50)
///   lstm.learning_rate            Adam step size (0.001)
///   lstm.threshold                minimum probability of a proposed symbol (0.5)
///   cnn.dense_rank                bottleneck width of the output layer, 0 = full dense (64)
///   cnn.leaky_slope               leaky ReLU slope (0.01)
///   cnn.threshold                 minimum output value of a proposed sprite (0.5)
///   cnn.batch_size                mini-batch size (32)
///   cnn.max_epochs                pretraining epoch limit (500)
///   cnn.learning_rate             Adam step size for pretraining (0.001)
///   cnn.active_learning_rate      Adam step size for active updates (0.001)
///   cnn.convergence_window        epochs compared by the stopping rule (10)
///   cnn.min_rel_improvement       relative loss drop below which training stops (1e-4)
///   cnn.target_loss               training also stops below this loss, 0 = off (0)
struct AgentConfig {
  CreditConfig credit{};
  double train_ratio = 0.8;
  double shape_threshold = 0.1;
  LstmTrainConfig lstm{};
  double lstm_threshold = 0.5;
  CnnConfig cnn{};
  TrainConfig cnn_train{};
  double cnn_active_learning_rate = 0.001;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where, const std::set<std::string>& known) {
  if (!j.is_object()) throw FormatError("config: '" + where + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw FormatError("config: unknown key '" + where + (where.empty() ? "" : ".") + k + "'");
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("config: bad value for '") + key + "'");
  }
}

}  // namespace detail

inline AgentConfig parse_config(const nlohmann::json& j) {
  AgentConfig c;
  detail::reject_unknown(j, "", {"credit", "split", "markov", "shape", "lstm", "cnn"});
  if (j.contains("credit")) {
    const auto& s = j.at("credit");
    detail::reject_unknown(s, "credit", {"gamma", "deletion_penalty"});
    detail::read_key(s, "gamma", c.credit.gamma);
    detail::read_key(s, "deletion_penalty", c.credit.deletion_penalty);
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    detail::reject_unknown(s, "split", {"train_ratio"});
    detail::read_key(s, "train_ratio", c.train_ratio);
  }
  if (j.contains("markov")) detail::reject_unknown(j.at("markov"), "markov", {});
  if (j.contains("shape")) {
    const auto& s = j.at("shape");
    detail::reject_unknown(s, "shape", {"threshold"});
    detail::read_key(s, "threshold", c.shape_threshold);
  }
  if (j.contains("lstm")) {
    const auto& s = j.at("lstm");
    detail::reject_unknown(s, "lstm", {"hidden", "epochs", "learning_rate", "threshold"});
    detail::read_key(s, "hidden", c.lstm.hidden);
    detail::read_key(s, "epochs", c.lstm.epochs);
    detail::read_key(s, "learning_rate", c.lstm.adam.lr);
    detail::read_key(s, "threshold", c.lstm_threshold);
  }
  if (j.contains("cnn")) {
    const auto& s = j.at("cnn");
    detail::reject_unknown(s, "cnn",
                           {"dense_rank", "leaky_slope", "threshold", "batch_size", "max_epochs", "learning_rate",
                            "active_learning_rate", "convergence_window", "min_rel_improvement", "target_loss"});
    detail::read_key(s, "dense_rank", c.cnn.dense_rank);
    detail::read_key(s, "leaky_slope", c.cnn.leaky_slope);
    detail::read_key(s, "threshold", c.cnn.threshold);
    detail::read_key(s, "batch_size", c.cnn_train.batch_size);
    detail::read_key(s, "max_epochs", c.cnn_train.max_epochs);
    detail::read_key(s, "learning_rate", c.cnn_train.adam.lr);
    detail::read_key(s, "active_learning_rate", c.cnn_active_learning_rate);
    detail::read_key(s, "convergence_window", c.cnn_train.convergence_window);
    detail::read_key(s, "min_rel_improvement", c.cnn_train.min_rel_improvement);
    detail::read_key(s, "target_loss", c.cnn_train.target_loss);
  }
  if (c.train_ratio <= 0.0 || c.train_ratio > 1.0) throw FormatError("config: split.train_ratio must be in (0, 1]");
  if (c.lstm.hidden <= 0 || c.lstm.epochs < 0) throw FormatError("config: lstm sizes must be positive");
  if (c.cnn.dense_rank < 0) throw FormatError("config: cnn.dense_rank must be >= 0");
  if (c.cnn.threshold < 0.0 || c.cnn.threshold > 1.0) throw FormatError("config: cnn.threshold must be in [0, 1]");
  try {
    c.cnn_train.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

inline AgentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  auto j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw FormatError("config: " + path + " is not valid JSON");
  return parse_config(j);
}

}  // namespace morai
