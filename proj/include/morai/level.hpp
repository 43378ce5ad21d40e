#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "morai/errors.hpp"
#include "morai/palette.hpp"
#include "morai/rng.hpp"

namespace morai {

inline constexpr int kLevelHeight = 15;
inline constexpr int kGroundRow = kLevelHeight - 1;
inline constexpr int kChunkWidth = 40;
inline constexpr int kChunkSize = kChunkWidth * kLevelHeight * kSpriteCount;

/// A concrete level: `width` columns by 15 rows. Row 0 is the top, row 14 the ground row.
class TileGrid {
 public:
  static constexpr std::uint8_t kEmpty = 0xff;

  TileGrid() : TileGrid(1) {}
  explicit TileGrid(int width) : width_(width) {
    if (width < 1) throw ContractError("grid width must be >= 1");
    cells_.assign(static_cast<std::size_t>(width) * kLevelHeight, kEmpty);
  }

  int width() const { return width_; }
  static constexpr int height() { return kLevelHeight; }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < kLevelHeight; }

  std::optional<SpriteId> at(int x, int y) const {
    check(x, y);
    std::uint8_t v = cells_[index(x, y)];
    if (v == kEmpty) return std::nullopt;
    return v;
  }
  bool occupied(int x, int y) const { return at(x, y).has_value(); }
  // Out-of-bounds cells count as empty.
  bool occupied_or_false(int x, int y) const { return in_bounds(x, y) && occupied(x, y); }

  void set(int x, int y, SpriteId s) {
    check(x, y);
    if (s >= kSpriteCount) throw ContractError("sprite index out of range");
    cells_[index(x, y)] = s;
  }
  void clear(int x, int y) {
    check(x, y);
    cells_[index(x, y)] = kEmpty;
  }

  int occupied_count() const {
    return static_cast<int>(std::count_if(cells_.begin(), cells_.end(), [](std::uint8_t v) { return v != kEmpty; }));
  }

  /// Columns [x0, x0+w) as a new grid; columns past the right edge are empty.
  TileGrid window(int x0, int w) const {
    TileGrid out(w);
    for (int x = 0; x < w; ++x) {
      if (x0 + x < 0 || x0 + x >= width_) continue;
      for (int y = 0; y < kLevelHeight; ++y) out.cells_[out.index(x, y)] = cells_[index(x0 + x, y)];
    }
    return out;
  }

  bool operator==(const TileGrid&) const = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(x) * kLevelHeight + y; }
  void check(int x, int y) const {
    if (!in_bounds(x, y))
      throw ContractError("cell (" + std::to_string(x) + "," + std::to_string(y) + ") outside " +
                          std::to_string(width_) + "x15 grid");
  }

  int width_;
  std::vector<std::uint8_t> cells_;
};

/// Same shape as a TileGrid, each cell holding one abstract symbol.
class AbstractGrid {
 public:
  explicit AbstractGrid(int width = 1) : width_(width), cells_(static_cast<std::size_t>(width) * kLevelHeight, Symbol::Empty) {
    if (width < 1) throw ContractError("grid width must be >= 1");
  }

  int width() const { return width_; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < kLevelHeight; }
  Symbol at(int x, int y) const { return cells_[static_cast<std::size_t>(x) * kLevelHeight + y]; }
  void set(int x, int y, Symbol s) { cells_[static_cast<std::size_t>(x) * kLevelHeight + y] = s; }

  bool operator==(const AbstractGrid&) const = default;

 private:
  int width_;
  std::vector<Symbol> cells_;
};

/// 40x15x32 array laid out [x][y][sprite].
class ChunkTensor {
 public:
  ChunkTensor() : values_(kChunkSize, 0.0) {}

  static constexpr std::size_t offset(int x, int y, int s) {
    return (static_cast<std::size_t>(x) * kLevelHeight + y) * kSpriteCount + s;
  }
  double at(int x, int y, int s) const { return values_[offset(x, y, s)]; }
  double& at(int x, int y, int s) { return values_[offset(x, y, s)]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool operator==(const ChunkTensor&) const = default;

 private:
  std::vector<double> values_;
};

struct Addition {
  int x = 0;
  int y = 0;
  SpriteId sprite = 0;
  bool operator==(const Addition&) const = default;
};

using Additions = std::vector<Addition>;

// ---------------------------------------------------------------------------
// Level text format: 15 rows, one glyph per tile, '-' for empty.

inline TileGrid parse_level_text(std::string_view text, const SpritePalette& palette = SpritePalette::standard()) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (lines.size() != static_cast<std::size_t>(kLevelHeight))
    throw FormatError("level text must have exactly 15 rows, got " + std::to_string(lines.size()));
  const std::size_t width = lines[0].size();
  if (width == 0) throw FormatError("level rows are empty");
  TileGrid grid(static_cast<int>(width));
  for (int y = 0; y < kLevelHeight; ++y) {
    const auto& line = lines[static_cast<std::size_t>(y)];
    if (line.size() != width)
      throw FormatError("ragged row " + std::to_string(y) + ": length " + std::to_string(line.size()) +
                        ", expected " + std::to_string(width));
    for (std::size_t x = 0; x < width; ++x) {
      char c = line[x];
      if (c == kEmptyChar) continue;
      auto s = palette.from_glyph(c);
      if (!s)
        throw FormatError(std::string("unknown character '") + c + "' at column " + std::to_string(x) + ", row " +
                          std::to_string(y));
      grid.set(static_cast<int>(x), y, *s);
    }
  }
  return grid;
}

inline std::string serialize_level_text(const TileGrid& grid, const SpritePalette& palette = SpritePalette::standard()) {
  std::string out;
  out.reserve(static_cast<std::size_t>(grid.width() + 1) * kLevelHeight);
  for (int y = 0; y < kLevelHeight; ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      auto s = grid.at(x, y);
      out.push_back(s ? palette.glyph(*s) : kEmptyChar);
    }
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// Abstract representation.

inline AbstractGrid to_abstract(const TileGrid& grid, const SpritePalette& palette = SpritePalette::standard()) {
  AbstractGrid out(grid.width());
  for (int x = 0; x < grid.width(); ++x)
    for (int y = 0; y < kLevelHeight; ++y)
      if (auto s = grid.at(x, y)) out.set(x, y, palette.symbol(*s));
  return out;
}

namespace detail {
inline bool holds(const TileGrid& g, int x, int y, std::initializer_list<SpriteId> ids) {
  if (!g.in_bounds(x, y)) return false;
  auto s = g.at(x, y);
  return s && std::find(ids.begin(), ids.end(), *s) != ids.end();
}
inline bool holds_symbol(const TileGrid& g, int x, int y, Symbol sym) {
  if (!g.in_bounds(x, y)) return false;
  auto s = g.at(x, y);
  return s && kSprites[*s].symbol == sym;
}
}  // namespace detail

/// Picks a concrete sprite for an abstract symbol placed at (x, y) of `grid`.
/// Solids become ground on the ground row or on top of ground, otherwise a hard block.
/// Enemies are drawn uniformly; flying enemies only when the cell below is empty.
inline SpriteId from_abstract(Symbol symbol, int x, int y, const TileGrid& grid, Rng& rng) {
  using namespace sprite;
  if (!grid.in_bounds(x, y)) throw ContractError("from_abstract: position outside grid");
  switch (symbol) {
    case Symbol::Empty:
      throw ContractError("from_abstract: the empty symbol has no sprite");
    case Symbol::Solid:
      return (y == kGroundRow || detail::holds(grid, x, y + 1, {kGround})) ? kGround : kHardBlock;
    case Symbol::Breakable:
      return kBrick;
    case Symbol::Question:
      return kQuestion;
    case Symbol::Coin:
      return kCoin;
    case Symbol::Pipe: {
      bool right = detail::holds(grid, x - 1, y, {kPipeTopLeft, kPipeBodyLeft});
      bool body = detail::holds_symbol(grid, x, y - 1, Symbol::Pipe);
      if (right) return body ? kPipeBodyRight : kPipeTopRight;
      return body ? kPipeBodyLeft : kPipeTopLeft;
    }
    case Symbol::Cannon:
      return detail::holds_symbol(grid, x, y - 1, Symbol::Cannon) ? kCannonBase : kCannonTop;
    case Symbol::Goal:
      return (detail::holds(grid, x, y + 1, {kFlagpole}) && !grid.occupied_or_false(x, y - 1)) ? kFlagTop : kFlagpole;
    case Symbol::Enemy: {
      const bool supported = grid.occupied_or_false(x, y + 1);
      std::vector<SpriteId> pool;
      for (const auto& info : kSprites)
        if (info.is_enemy && (!supported || !info.is_flying)) pool.push_back(info.index);
      return pool[uniform_index(rng, pool.size())];
    }
    case Symbol::Decoration: {
      std::vector<SpriteId> pool;
      for (const auto& info : kSprites)
        if (info.symbol == Symbol::Decoration) pool.push_back(info.index);
      return pool[uniform_index(rng, pool.size())];
    }
  }
  throw ContractError("from_abstract: unknown symbol");
}

struct PlannedSymbol {
  int x = 0;
  int y = 0;
  Symbol symbol = Symbol::Empty;
};

/// Converts a set of planned abstract placements into sprites. Cells are resolved
/// bottom-up so that support (and therefore the flying-enemy rule) sees the planned
/// cells beneath; the result keeps the input order.
inline Additions realize(const std::vector<PlannedSymbol>& planned, const TileGrid& grid, Rng& rng) {
  std::vector<std::size_t> order(planned.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return planned[a].y > planned[b].y; });
  TileGrid work = grid;
  Additions out(planned.size());
  for (std::size_t i : order) {
    const auto& p = planned[i];
    SpriteId s = from_abstract(p.symbol, p.x, p.y, work, rng);
    work.set(p.x, p.y, s);
    out[i] = {p.x, p.y, s};
  }
  return out;
}

// ---------------------------------------------------------------------------
// One-hot chunk encoding.

inline ChunkTensor encode_chunk(const TileGrid& grid, int x_offset) {
  if (x_offset < 0) throw ContractError("encode_chunk: negative offset");
  ChunkTensor t;
  for (int x = 0; x < kChunkWidth; ++x) {
    int gx = x_offset + x;
    if (gx >= grid.width()) break;
    for (int y = 0; y < kLevelHeight; ++y)
      if (auto s = grid.at(gx, y)) t.at(x, y, *s) = 1.0;
  }
  return t;
}

/// Inverse of encode_chunk for one-hot tensors: 40-wide grid holding each cell's hot channel.
inline TileGrid decode_chunk(const ChunkTensor& t) {
  TileGrid grid(kChunkWidth);
  for (int x = 0; x < kChunkWidth; ++x)
    for (int y = 0; y < kLevelHeight; ++y)
      for (int s = 0; s < kSpriteCount; ++s)
        if (t.at(x, y, s) > 0.5) {
          grid.set(x, y, static_cast<SpriteId>(s));
          break;
        }
  return grid;
}

}  // namespace morai
