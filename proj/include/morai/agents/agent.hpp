#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "morai/errors.hpp"
#include "morai/level.hpp"
#include "morai/rng.hpp"
#include "morai/smdp.hpp"

namespace morai {

inline constexpr int kMaxAdditions = 30;

/// Throws ContractError unless `adds` is a valid proposal for `level`: at most `cap`
/// entries, every target in bounds and empty, no cell twice, and no flying enemy
/// resting on an occupied cell (counting the other additions).
inline void check_additions(const TileGrid& level, const Additions& adds, int cap = kMaxAdditions) {
  if (static_cast<int>(adds.size()) > cap)
    throw ContractError("proposal has " + std::to_string(adds.size()) + " additions, cap is " + std::to_string(cap));
  TileGrid after = level;
  std::set<std::pair<int, int>> seen;
  for (const auto& a : adds) {
    if (!level.in_bounds(a.x, a.y)) throw ContractError("addition outside the level");
    if (a.sprite >= kSpriteCount) throw ContractError("addition sprite out of range");
    if (level.occupied(a.x, a.y)) throw ContractError("addition targets an occupied cell");
    if (!seen.insert({a.x, a.y}).second) throw ContractError("duplicate addition cell");
    after.set(a.x, a.y, a.sprite);
  }
  const auto& palette = SpritePalette::standard();
  for (const auto& a : adds)
    if (palette.is_flying(a.sprite) && after.occupied_or_false(a.x, a.y + 1))
      throw ContractError("flying enemy placed on a supported cell");
}

/// A turn-based design partner. Agents only ever add sprites.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string name() const = 0;

  /// Ordered additions for `level`; `camera_x` is the column at the centre of the user's view.
  virtual Additions propose(const TileGrid& level, int camera_x, Rng& rng) = 0;

  virtual bool supports_active() const { return false; }
  virtual void active_update(const SmdpSample&) { throw ModeError(name() + " does not support active learning"); }
  virtual void reset_to_pristine() { throw ModeError(name() + " does not support active learning"); }
};

/// Uniformly random additions: 1..cap random empty cells, each with a random sprite.
class RandomAgent final : public Agent {
 public:
  explicit RandomAgent(int cap = kMaxAdditions) : cap_(cap) {}

  std::string name() const override { return "random"; }

  Additions propose(const TileGrid& level, int, Rng& rng) override {
    std::vector<std::pair<int, int>> empty;
    for (int x = 0; x < level.width(); ++x)
      for (int y = 0; y < kLevelHeight; ++y)
        if (!level.occupied(x, y)) empty.emplace_back(x, y);
    if (empty.empty()) return {};
    std::shuffle(empty.begin(), empty.end(), rng);
    const std::size_t n = std::min(empty.size(), 1 + uniform_index(rng, static_cast<std::size_t>(cap_)));
    empty.resize(n);
    // Draw bottom-up so a flying enemy never lands on a cell filled by this proposal.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return empty[a].second > empty[b].second; });
    TileGrid work = level;
    Additions out(n);
    const auto& palette = SpritePalette::standard();
    for (std::size_t i : order) {
      const auto [x, y] = empty[i];
      auto s = static_cast<SpriteId>(uniform_index(rng, kSpriteCount));
      while (palette.is_flying(s) && work.occupied_or_false(x, y + 1)) s = static_cast<SpriteId>(uniform_index(rng, kSpriteCount));
      work.set(x, y, s);
      out[i] = {x, y, s};
    }
    return out;
  }

 private:
  int cap_;
};

/// Replays a fixed list of proposals, one per call, in order. Used to push logged
/// additions through the evaluation loop.
class ScriptedAgent final : public Agent {
 public:
  explicit ScriptedAgent(std::vector<Additions> script, std::string name = "scripted")
      : script_(std::move(script)), name_(std::move(name)) {}

  std::string name() const override { return name_; }

  Additions propose(const TileGrid&, int, Rng&) override {
    if (next_ >= script_.size()) throw StateError("scripted agent ran out of proposals");
    return script_[next_++];
  }

 private:
  std::vector<Additions> script_;
  std::size_t next_ = 0;
  std::string name_;
};

}  // namespace morai
