#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "morai/agents/agent.hpp"
#include "morai/level.hpp"

namespace morai {

/// Context of a cell: its left, below-left and below neighbours.
using MarkovContext = std::array<Symbol, 3>;

inline std::string context_key(const MarkovContext& c) {
  return {symbol_char(c[0]), symbol_char(c[1]), symbol_char(c[2])};
}

/// Counts of each symbol given the three-cell context of a 2x2 square.
struct MarkovModel {
  std::map<std::string, std::map<Symbol, long>> counts;

  long total(const std::string& key) const {
    auto it = counts.find(key);
    if (it == counts.end()) return 0;
    long t = 0;
    for (const auto& [s, n] : it->second) t += n;
    return t;
  }

  double probability(const MarkovContext& ctx, Symbol s) const {
    const auto key = context_key(ctx);
    const long t = total(key);
    if (t == 0) return 0.0;
    const auto& row = counts.at(key);
    auto it = row.find(s);
    return it == row.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(t);
  }

  bool has_context(const MarkovContext& ctx) const { return counts.count(context_key(ctx)) > 0; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = "markov";
    j["counts"] = nlohmann::json::object();
    for (const auto& [k, row] : counts)
      for (const auto& [s, n] : row) j["counts"][k][std::string(1, symbol_char(s))] = n;
    return j;
  }

  static MarkovModel from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "markov") throw FormatError("not a markov model");
    MarkovModel m;
    for (const auto& [k, row] : j.at("counts").items()) {
      if (k.size() != 3) throw FormatError("bad markov context key '" + k + "'");
      for (const auto& [s, n] : row.items()) {
        auto sym = s.size() == 1 ? symbol_from_char(s[0]) : std::nullopt;
        if (!sym) throw FormatError("bad markov symbol '" + s + "'");
        m.counts[k][*sym] = n.get<long>();
      }
    }
    return m;
  }
};

inline MarkovModel markov_train(const std::vector<AbstractGrid>& levels) {
  if (levels.empty()) throw ContractError("markov_train: no levels");
  MarkovModel m;
  for (const auto& g : levels)
    for (int x = 1; x < g.width(); ++x)
      for (int y = 0; y + 1 < kLevelHeight; ++y) {
        MarkovContext ctx{g.at(x - 1, y), g.at(x - 1, y + 1), g.at(x, y + 1)};
        ++m.counts[context_key(ctx)][g.at(x, y)];
      }
  return m;
}

/// Walks empty cells column by column (left to right, bottom to top), sampling each from
/// its context; unseen contexts yield E. Stops after `cap` non-empty samples.
inline Additions markov_propose(const MarkovModel& model, const TileGrid& level, Rng& rng, int cap = kMaxAdditions) {
  AbstractGrid work = to_abstract(level);
  std::vector<PlannedSymbol> planned;
  for (int x = 1; x < level.width() && static_cast<int>(planned.size()) < cap; ++x) {
    for (int y = kLevelHeight - 2; y >= 0 && static_cast<int>(planned.size()) < cap; --y) {
      if (level.occupied(x, y)) continue;
      MarkovContext ctx{work.at(x - 1, y), work.at(x - 1, y + 1), work.at(x, y + 1)};
      auto it = model.counts.find(context_key(ctx));
      if (it == model.counts.end()) continue;
      long total = 0;
      for (const auto& [s, n] : it->second) total += n;
      long pick = static_cast<long>(uniform_index(rng, static_cast<std::size_t>(total)));
      Symbol chosen = Symbol::Empty;
      for (const auto& [s, n] : it->second) {
        if (pick < n) {
          chosen = s;
          break;
        }
        pick -= n;
      }
      if (chosen == Symbol::Empty) continue;
      work.set(x, y, chosen);
      planned.push_back({x, y, chosen});
    }
  }
  return realize(planned, level, rng);
}

class MarkovAgent final : public Agent {
 public:
  explicit MarkovAgent(std::shared_ptr<const MarkovModel> model, int cap = kMaxAdditions)
      : model_(std::move(model)), cap_(cap) {}
  std::string name() const override { return "markov"; }
  Additions propose(const TileGrid& level, int, Rng& rng) override { return markov_propose(*model_, level, rng, cap_); }

 private:
  std::shared_ptr<const MarkovModel> model_;
  int cap_;
};

}  // namespace morai
