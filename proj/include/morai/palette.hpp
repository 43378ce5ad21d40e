#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "morai/errors.hpp"

namespace morai {

/// Coarse tile categories shared by the learned baselines.
enum class Symbol : char {
  Empty = 'E',
  Solid = 'S',
  Breakable = 'B',
  Question = 'Q',
  Pipe = 'P',
  Coin = 'O',
  Enemy = 'X',
  Cannon = 'C',
  Goal = 'L',
  Decoration = 'D',
};

inline constexpr std::array<Symbol, 10> kAlphabet = {
    Symbol::Empty, Symbol::Solid,  Symbol::Breakable, Symbol::Question, Symbol::Pipe,
    Symbol::Coin,  Symbol::Enemy,  Symbol::Cannon,    Symbol::Goal,     Symbol::Decoration,
};

inline constexpr int symbol_index(Symbol s) {
  for (int i = 0; i < static_cast<int>(kAlphabet.size()); ++i)
    if (kAlphabet[i] == s) return i;
  return -1;
}

inline constexpr char symbol_char(Symbol s) { return static_cast<char>(s); }

inline std::optional<Symbol> symbol_from_char(char c) {
  for (Symbol s : kAlphabet)
    if (symbol_char(s) == c) return s;
  return std::nullopt;
}

inline constexpr int kSpriteCount = 32;
inline constexpr char kEmptyChar = '-';

/// Index into the 32-entry sprite palette. Stable: used as a one-hot channel.
using SpriteId = std::uint8_t;

struct SpriteInfo {
  SpriteId index;
  std::string_view name;
  char glyph;
  Symbol symbol;
  bool is_enemy;
  bool is_flying;
  bool is_solid;  // abstract class S
};

// Normative sprite table. Indices, glyphs and classes are part of the file formats.
inline constexpr std::array<SpriteInfo, kSpriteCount> kSprites = {{
    {0, "ground", 'X', Symbol::Solid, false, false, true},
    {1, "hard_block", '#', Symbol::Solid, false, false, true},
    {2, "brick", 'B', Symbol::Breakable, false, false, false},
    {3, "question_block", '?', Symbol::Question, false, false, false},
    {4, "used_block", 'U', Symbol::Solid, false, false, true},
    {5, "coin", 'o', Symbol::Coin, false, false, false},
    {6, "pipe_top_left", '<', Symbol::Pipe, false, false, false},
    {7, "pipe_top_right", '>', Symbol::Pipe, false, false, false},
    {8, "pipe_body_left", '[', Symbol::Pipe, false, false, false},
    {9, "pipe_body_right", ']', Symbol::Pipe, false, false, false},
    {10, "cannon_top", 'C', Symbol::Cannon, false, false, false},
    {11, "cannon_base", 'c', Symbol::Cannon, false, false, false},
    {12, "flagpole", '|', Symbol::Goal, false, false, false},
    {13, "flag_top", 'F', Symbol::Goal, false, false, false},
    {14, "castle_block", 'W', Symbol::Goal, false, false, false},
    {15, "platform", '=', Symbol::Solid, false, false, true},
    {16, "spring", 'J', Symbol::Decoration, false, false, false},
    {17, "goomba", 'g', Symbol::Enemy, true, false, false},
    {18, "koopa_green", 'k', Symbol::Enemy, true, false, false},
    {19, "koopa_red", 'r', Symbol::Enemy, true, false, false},
    {20, "buzzy_beetle", 'z', Symbol::Enemy, true, false, false},
    {21, "spiny", 's', Symbol::Enemy, true, false, false},
    {22, "hammer_bro", 'h', Symbol::Enemy, true, false, false},
    {23, "piranha_plant", 'p', Symbol::Enemy, true, false, false},
    {24, "bowser", 'w', Symbol::Enemy, true, false, false},
    {25, "koopa_paratroopa", 'K', Symbol::Enemy, true, true, false},
    {26, "lakitu", 'l', Symbol::Enemy, true, true, false},
    {27, "bush", '*', Symbol::Decoration, false, false, false},
    {28, "cloud", '~', Symbol::Decoration, false, false, false},
    {29, "hill", '^', Symbol::Decoration, false, false, false},
    {30, "tree", 'T', Symbol::Decoration, false, false, false},
    {31, "fence", '+', Symbol::Decoration, false, false, false},
}};

namespace sprite {
inline constexpr SpriteId kGround = 0;
inline constexpr SpriteId kHardBlock = 1;
inline constexpr SpriteId kBrick = 2;
inline constexpr SpriteId kQuestion = 3;
inline constexpr SpriteId kCoin = 5;
inline constexpr SpriteId kPipeTopLeft = 6;
inline constexpr SpriteId kPipeTopRight = 7;
inline constexpr SpriteId kPipeBodyLeft = 8;
inline constexpr SpriteId kPipeBodyRight = 9;
inline constexpr SpriteId kCannonTop = 10;
inline constexpr SpriteId kCannonBase = 11;
inline constexpr SpriteId kFlagpole = 12;
inline constexpr SpriteId kFlagTop = 13;
inline constexpr SpriteId kGoomba = 17;
inline constexpr SpriteId kKoopaGreen = 18;
inline constexpr SpriteId kParatroopa = 25;
inline constexpr SpriteId kLakitu = 26;
}  // namespace sprite

/// The fixed 32-sprite palette with its glyph map and abstract-class table.
class SpritePalette {
 public:
  SpritePalette() {
    glyph_to_sprite_.fill(-1);
    for (const SpriteInfo& info : kSprites) glyph_to_sprite_[static_cast<unsigned char>(info.glyph)] = info.index;
  }

  static const SpritePalette& standard() {
    static const SpritePalette palette;
    return palette;
  }

  static constexpr int size() { return kSpriteCount; }

  const SpriteInfo& at(SpriteId id) const {
    if (id >= kSpriteCount) throw ContractError("sprite index out of range: " + std::to_string(id));
    return kSprites[id];
  }

  std::optional<SpriteId> from_glyph(char c) const {
    int v = glyph_to_sprite_[static_cast<unsigned char>(c)];
    if (v < 0) return std::nullopt;
    return static_cast<SpriteId>(v);
  }

  std::optional<SpriteId> from_name(std::string_view name) const {
    for (const SpriteInfo& info : kSprites)
      if (info.name == name) return info.index;
    return std::nullopt;
  }

  char glyph(SpriteId id) const { return at(id).glyph; }
  Symbol symbol(SpriteId id) const { return at(id).symbol; }
  bool is_enemy(SpriteId id) const { return at(id).is_enemy; }
  bool is_flying(SpriteId id) const { return at(id).is_flying; }

 private:
  std::array<int, 256> glyph_to_sprite_{};
};

}  // namespace morai
