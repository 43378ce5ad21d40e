#pragma once

#include <algorithm>
#include <climits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "morai/agents/agent.hpp"
#include "morai/level.hpp"

namespace morai {

/// A 4-connected group of same-class cells, with offsets relative to its bounding-box
/// corner (min x, min y), sorted.
struct Shape {
  Symbol symbol = Symbol::Empty;
  std::vector<std::pair<int, int>> cells;
  bool operator==(const Shape&) const = default;
};

/// A shape found in a level: the normalized shape plus where its anchor sits.
struct ShapeInstance {
  Shape shape;
  int anchor_x = 0;
  int anchor_y = 0;
};

/// Connected same-class components of `grid` restricted to columns [x0, x1).
inline std::vector<ShapeInstance> find_shapes(const AbstractGrid& grid, int x0, int x1) {
  x1 = std::min(x1, grid.width());
  const int w = x1 - x0;
  std::vector<char> seen(static_cast<std::size_t>(std::max(w, 0)) * kLevelHeight, 0);
  auto idx = [&](int x, int y) { return static_cast<std::size_t>(x - x0) * kLevelHeight + y; };
  std::vector<ShapeInstance> out;
  for (int x = x0; x < x1; ++x)
    for (int y = 0; y < kLevelHeight; ++y) {
      const Symbol s = grid.at(x, y);
      if (s == Symbol::Empty || seen[idx(x, y)]) continue;
      std::vector<std::pair<int, int>> cells, stack{{x, y}};
      seen[idx(x, y)] = 1;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        cells.emplace_back(cx, cy);
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k], ny = cy + dy[k];
          if (nx < x0 || nx >= x1 || ny < 0 || ny >= kLevelHeight) continue;
          if (seen[idx(nx, ny)] || grid.at(nx, ny) != s) continue;
          seen[idx(nx, ny)] = 1;
          stack.emplace_back(nx, ny);
        }
      }
      int mx = INT_MAX, my = INT_MAX;
      for (auto [cx, cy] : cells) {
        mx = std::min(mx, cx);
        my = std::min(my, cy);
      }
      ShapeInstance inst;
      inst.shape.symbol = s;
      for (auto [cx, cy] : cells) inst.shape.cells.emplace_back(cx - mx, cy - my);
      std::sort(inst.shape.cells.begin(), inst.shape.cells.end());
      inst.anchor_x = mx;
      inst.anchor_y = my;
      out.push_back(std::move(inst));
    }
  return out;
}

/// Shape inventory plus counts of (reference class, shape, offset from reference anchor).
struct ShapeModel {
  std::vector<Shape> shapes;
  std::vector<long> frequency;
  // (reference symbol, shape index, dx, dy) -> count
  std::map<std::tuple<char, int, int, int>, long> placements;
  std::map<char, long> reference_totals;
  double threshold = 0.1;

  int shape_index(const Shape& s) const {
    for (std::size_t i = 0; i < shapes.size(); ++i)
      if (shapes[i] == s) return static_cast<int>(i);
    return -1;
  }

  double placement_probability(char ref, int shape, int dx, int dy) const {
    auto it = placements.find({ref, shape, dx, dy});
    if (it == placements.end()) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(reference_totals.at(ref));
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = "shape";
    j["threshold"] = threshold;
    j["shapes"] = nlohmann::json::array();
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      nlohmann::json cells = nlohmann::json::array();
      for (auto [x, y] : shapes[i].cells) cells.push_back({x, y});
      j["shapes"].push_back({{"symbol", std::string(1, symbol_char(shapes[i].symbol))}, {"cells", cells}, {"frequency", frequency[i]}});
    }
    j["placements"] = nlohmann::json::array();
    for (const auto& [key, n] : placements) {
      const auto& [ref, shape, dx, dy] = key;
      j["placements"].push_back({{"ref", std::string(1, ref)}, {"shape", shape}, {"dx", dx}, {"dy", dy}, {"count", n}});
    }
    return j;
  }

  static ShapeModel from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "shape") throw FormatError("not a shape model");
    ShapeModel m;
    m.threshold = j.value("threshold", 0.1);
    for (const auto& s : j.at("shapes")) {
      Shape shape;
      const auto sym = symbol_from_char(s.at("symbol").get<std::string>().at(0));
      if (!sym) throw FormatError("bad shape symbol");
      shape.symbol = *sym;
      for (const auto& c : s.at("cells")) shape.cells.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
      m.shapes.push_back(std::move(shape));
      m.frequency.push_back(s.at("frequency").get<long>());
    }
    for (const auto& p : j.at("placements")) {
      const char ref = p.at("ref").get<std::string>().at(0);
      const int shape = p.at("shape").get<int>();
      if (shape < 0 || shape >= static_cast<int>(m.shapes.size())) throw FormatError("placement refers to unknown shape");
      const long n = p.at("count").get<long>();
      m.placements[{ref, shape, p.at("dx").get<int>(), p.at("dy").get<int>()}] = n;
      m.reference_totals[ref] += n;
    }
    return m;
  }
};

/// Splits each level into 40-column frames, collects every connected shape, and records
/// each shape's offset from the nearest other shape in its frame.
inline ShapeModel shape_train(const std::vector<TileGrid>& levels, double threshold = 0.1) {
  if (levels.empty()) throw ContractError("shape_train: no levels");
  ShapeModel m;
  m.threshold = threshold;
  for (const auto& level : levels) {
    const AbstractGrid g = to_abstract(level);
    for (int f0 = 0; f0 < g.width(); f0 += kChunkWidth) {
      const auto found = find_shapes(g, f0, f0 + kChunkWidth);
      std::vector<int> ids;
      for (const auto& inst : found) {
        int id = m.shape_index(inst.shape);
        if (id < 0) {
          id = static_cast<int>(m.shapes.size());
          m.shapes.push_back(inst.shape);
          m.frequency.push_back(0);
        }
        ++m.frequency[static_cast<std::size_t>(id)];
        ids.push_back(id);
      }
      for (std::size_t a = 0; a < found.size(); ++a) {
        int best = -1, best_d = INT_MAX;
        for (std::size_t b = 0; b < found.size(); ++b) {
          if (a == b) continue;
          const int d = std::abs(found[a].anchor_x - found[b].anchor_x) + std::abs(found[a].anchor_y - found[b].anchor_y);
          if (d < best_d) {
            best_d = d;
            best = static_cast<int>(b);
          }
        }
        if (best < 0) continue;
        const auto& ref = found[static_cast<std::size_t>(best)];
        const char rs = symbol_char(ref.shape.symbol);
        ++m.placements[{rs, ids[a], found[a].anchor_x - ref.anchor_x, found[a].anchor_y - ref.anchor_y}];
        ++m.reference_totals[rs];
      }
    }
  }
  return m;
}

/// For each 40-column frame, places the single most probable (shape, offset) relative to
/// a shape already in the frame, if its probability reaches the threshold and every
/// target cell is free. Deterministic: ties go to the leftmost, then lowest, placement.
inline Additions shape_propose(const ShapeModel& model, const TileGrid& level, Rng& rng, int cap = kMaxAdditions) {
  const AbstractGrid g = to_abstract(level);
  std::vector<PlannedSymbol> planned;
  for (int f0 = 0; f0 < level.width(); f0 += kChunkWidth) {
    const int f1 = std::min(level.width(), f0 + kChunkWidth);
    const auto refs = find_shapes(g, f0, f1);
    struct Candidate {
      double p;
      int ax, ay, shape;
    };
    std::optional<Candidate> best;
    for (const auto& ref : refs) {
      const char rs = symbol_char(ref.shape.symbol);
      auto lo = model.placements.lower_bound({rs, INT_MIN, INT_MIN, INT_MIN});
      for (auto it = lo; it != model.placements.end() && std::get<0>(it->first) == rs; ++it) {
        const auto& [r, shape, dx, dy] = it->first;
        const double p = static_cast<double>(it->second) / static_cast<double>(model.reference_totals.at(rs));
        const int ax = ref.anchor_x + dx, ay = ref.anchor_y + dy;
        bool ok = true;
        for (auto [cx, cy] : model.shapes[static_cast<std::size_t>(shape)].cells) {
          const int x = ax + cx, y = ay + cy;
          if (x < f0 || x >= f1 || y < 0 || y >= kLevelHeight || level.occupied(x, y)) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        const Candidate c{p, ax, ay, shape};
        const auto better = [](const Candidate& a, const Candidate& b) {
          if (a.p != b.p) return a.p > b.p;
          if (a.ax != b.ax) return a.ax < b.ax;
          if (a.ay != b.ay) return a.ay > b.ay;
          return a.shape < b.shape;
        };
        if (!best || better(c, *best)) best = c;
      }
    }
    if (!best || best->p < model.threshold) continue;
    const auto& shape = model.shapes[static_cast<std::size_t>(best->shape)];
    if (static_cast<int>(planned.size() + shape.cells.size()) > cap) continue;
    for (auto [cx, cy] : shape.cells) planned.push_back({best->ax + cx, best->ay + cy, shape.symbol});
  }
  return realize(planned, level, rng);
}

class ShapeAgent final : public Agent {
 public:
  explicit ShapeAgent(std::shared_ptr<const ShapeModel> model, int cap = kMaxAdditions)
      : model_(std::move(model)), cap_(cap) {}
  std::string name() const override { return "shape"; }
  Additions propose(const TileGrid& level, int, Rng& rng) override { return shape_propose(*model_, level, rng, cap_); }

 private:
  std::shared_ptr<const ShapeModel> model_;
  int cap_;
};

}  // namespace morai
