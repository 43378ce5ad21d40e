#include <gtest/gtest.h>

#include <numeric>
#include <string>

#include "fixtures.hpp"

using namespace morai;

namespace {

std::string rows(int width, const std::string& bottom = "") {
  std::string out;
  for (int y = 0; y < kLevelHeight; ++y) out += (y == kLevelHeight - 1 && !bottom.empty() ? bottom : std::string(width, '-')) + "\n";
  return out;
}

}  // namespace

TEST(ParseLevel, EmptyGrid) {
  const auto g = parse_level_text(rows(3));
  EXPECT_EQ(g.width(), 3);
  EXPECT_EQ(g.occupied_count(), 0);
}

TEST(ParseLevel, GroundRow) {
  const auto g = parse_level_text(rows(3, "XXX"));
  for (int x = 0; x < 3; ++x) EXPECT_EQ(g.at(x, 14), sprite::kGround);
  EXPECT_EQ(g.occupied_count(), 3);
}

TEST(ParseLevel, RaggedRowIsFormatError) {
  std::string t = rows(3);
  t.replace(0, 3, "--");
  EXPECT_THROW(parse_level_text(t), FormatError);
}

TEST(ParseLevel, UnknownCharacterNamesPosition) {
  std::string t = rows(3);
  t[4 * 2 + 1] = '@';
  try {
    parse_level_text(t);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('@'), std::string::npos);
    EXPECT_NE(msg.find("column 1"), std::string::npos);
    EXPECT_NE(msg.find("row 2"), std::string::npos);
  }
}

TEST(ParseLevel, WrongRowCount) {
  EXPECT_THROW(parse_level_text("---\n---\n"), FormatError);
}

TEST(SerializeLevel, EmptyGrid) { EXPECT_EQ(serialize_level_text(TileGrid(3)), rows(3)); }

TEST(SerializeLevel, AllSpritesAppearOnce) {
  TileGrid g(32);
  for (int s = 0; s < kSpriteCount; ++s) g.set(s, 5, static_cast<SpriteId>(s));
  const auto text = serialize_level_text(g);
  for (const auto& info : kSprites) EXPECT_EQ(std::count(text.begin(), text.end(), info.glyph), 1) << info.name;
  EXPECT_EQ(parse_level_text(text), g);
}

TEST(SerializeLevel, RoundTripOnGeneratedLevels) {
  for (const auto& g : fixtures::smb_like_corpus(5, 120, 7)) {
    const auto text = serialize_level_text(g);
    EXPECT_EQ(parse_level_text(text), g);
    EXPECT_EQ(serialize_level_text(parse_level_text(text)), text);
  }
}

TEST(SerializeLevel, RoundTripOnShippedLevels) {
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(fixtures::source_dir() / "data" / "levels")) {
    const auto text = fixtures::slurp(entry.path());
    EXPECT_EQ(serialize_level_text(parse_level_text(text)), text) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 3);
}

TEST(ToAbstract, Classes) {
  TileGrid g(4);
  g.set(0, 12, sprite::kGoomba);
  g.set(1, 12, sprite::kParatroopa);
  g.set(2, 14, sprite::kGround);
  g.set(3, 14, sprite::kHardBlock);
  const auto a = to_abstract(g);
  EXPECT_EQ(a.at(0, 12), Symbol::Enemy);
  EXPECT_EQ(a.at(1, 12), Symbol::Enemy);
  EXPECT_EQ(a.at(2, 14), Symbol::Solid);
  EXPECT_EQ(a.at(3, 14), Symbol::Solid);
  EXPECT_EQ(a.at(0, 0), Symbol::Empty);
  EXPECT_EQ(to_abstract(TileGrid(5)), AbstractGrid(5));
}

TEST(FromAbstract, SolidByPosition) {
  Rng rng(1);
  TileGrid g(3);
  EXPECT_EQ(from_abstract(Symbol::Solid, 0, 14, g, rng), sprite::kGround);
  EXPECT_EQ(from_abstract(Symbol::Solid, 0, 10, g, rng), sprite::kHardBlock);
  g.set(1, 14, sprite::kGround);
  EXPECT_EQ(from_abstract(Symbol::Solid, 1, 13, g, rng), sprite::kGround);
  g.set(2, 14, sprite::kBrick);
  EXPECT_EQ(from_abstract(Symbol::Solid, 2, 13, g, rng), sprite::kHardBlock);
}

TEST(FromAbstract, SingletonClassesAreDeterministic) {
  Rng rng(2);
  TileGrid g(3);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(from_abstract(Symbol::Question, 1, 5, g, rng), sprite::kQuestion);
    EXPECT_EQ(from_abstract(Symbol::Coin, 1, 5, g, rng), sprite::kCoin);
    EXPECT_EQ(from_abstract(Symbol::Breakable, 1, 5, g, rng), sprite::kBrick);
  }
}

TEST(FromAbstract, EmptyIsContractError) {
  Rng rng(3);
  EXPECT_THROW(from_abstract(Symbol::Empty, 0, 0, TileGrid(1), rng), ContractError);
}

TEST(FromAbstract, NoFlyingEnemyOnSupport) {
  Rng rng(4);
  TileGrid g(2);
  g.set(0, 14, sprite::kGround);
  bool saw_flying_in_air = false;
  for (int i = 0; i < 1000; ++i) {
    const auto s = from_abstract(Symbol::Enemy, 0, 13, g, rng);
    EXPECT_FALSE(SpritePalette::standard().is_flying(s));
    EXPECT_TRUE(SpritePalette::standard().is_enemy(s));
    saw_flying_in_air |= SpritePalette::standard().is_flying(from_abstract(Symbol::Enemy, 1, 5, g, rng));
  }
  EXPECT_TRUE(saw_flying_in_air);
}

TEST(FromAbstract, PreservesClassOfEverySprite) {
  Rng rng(5);
  const auto& p = SpritePalette::standard();
  for (const auto& level : fixtures::smb_like_corpus(3, 80, 11)) {
    for (int x = 0; x < level.width(); ++x)
      for (int y = 0; y < kLevelHeight; ++y) {
        auto s = level.at(x, y);
        if (!s) continue;
        TileGrid without = level;
        without.clear(x, y);
        const auto r = from_abstract(p.symbol(*s), x, y, without, rng);
        EXPECT_EQ(p.symbol(r), p.symbol(*s));
        if (p.is_flying(r)) {
          EXPECT_FALSE(without.occupied_or_false(x, y + 1));
        }
      }
  }
}

TEST(FromAbstract, PipesAndGoal) {
  Rng rng(6);
  TileGrid g(4);
  EXPECT_EQ(from_abstract(Symbol::Pipe, 1, 10, g, rng), sprite::kPipeTopLeft);
  g.set(1, 10, sprite::kPipeTopLeft);
  EXPECT_EQ(from_abstract(Symbol::Pipe, 2, 10, g, rng), sprite::kPipeTopRight);
  EXPECT_EQ(from_abstract(Symbol::Pipe, 1, 11, g, rng), sprite::kPipeBodyLeft);
  g.set(1, 11, sprite::kPipeBodyLeft);
  g.set(2, 10, sprite::kPipeTopRight);
  EXPECT_EQ(from_abstract(Symbol::Pipe, 2, 11, g, rng), sprite::kPipeBodyRight);
  g.set(3, 12, sprite::kFlagpole);
  EXPECT_EQ(from_abstract(Symbol::Goal, 3, 11, g, rng), sprite::kFlagTop);
  EXPECT_EQ(from_abstract(Symbol::Goal, 0, 11, g, rng), sprite::kFlagpole);
}

TEST(Realize, ResolvesBottomUpAndKeepsOrder) {
  Rng rng(7);
  TileGrid g(3);
  const std::vector<PlannedSymbol> plan{{0, 13, Symbol::Solid}, {0, 14, Symbol::Solid}, {1, 9, Symbol::Question}};
  const auto adds = realize(plan, g, rng);
  ASSERT_EQ(adds.size(), 3u);
  EXPECT_EQ(adds[0], (Addition{0, 13, sprite::kGround}));
  EXPECT_EQ(adds[1], (Addition{0, 14, sprite::kGround}));
  EXPECT_EQ(adds[2], (Addition{1, 9, sprite::kQuestion}));
}

TEST(EncodeChunk, EmptyGridIsZero) {
  const auto t = encode_chunk(TileGrid(50), 0);
  for (double v : t.values()) ASSERT_EQ(v, 0.0);
}

TEST(EncodeChunk, SingleSpriteAndShift) {
  TileGrid g(50);
  g.set(2, 14, 7);
  const auto t0 = encode_chunk(g, 0);
  EXPECT_EQ(t0.at(2, 14, 7), 1.0);
  EXPECT_EQ(std::accumulate(t0.values().begin(), t0.values().end(), 0.0), 1.0);
  const auto t1 = encode_chunk(g, 1);
  EXPECT_EQ(t1.at(1, 14, 7), 1.0);
  EXPECT_EQ(std::accumulate(t1.values().begin(), t1.values().end(), 0.0), 1.0);
  EXPECT_THROW(encode_chunk(g, -1), ContractError);
}

TEST(EncodeChunk, OneHotProperty) {
  for (const auto& level : fixtures::smb_like_corpus(3, 100, 3))
    for (int off : {0, 17, 60, 90}) {
      const auto t = encode_chunk(level, off);
      int ones = 0;
      for (int x = 0; x < kChunkWidth; ++x)
        for (int y = 0; y < kLevelHeight; ++y) {
          double sum = 0;
          for (int s = 0; s < kSpriteCount; ++s) sum += t.at(x, y, s);
          ASSERT_TRUE(sum == 0.0 || sum == 1.0);
          ones += static_cast<int>(sum);
        }
      EXPECT_EQ(ones, level.window(off, kChunkWidth).occupied_count());
      EXPECT_EQ(decode_chunk(t), level.window(off, kChunkWidth));
    }
}

TEST(TileGrid, BoundsAndWindow) {
  TileGrid g(5);
  EXPECT_THROW(g.set(5, 0, 0), ContractError);
  EXPECT_THROW(g.set(0, 15, 0), ContractError);
  EXPECT_THROW(g.set(0, 0, 32), ContractError);
  EXPECT_THROW(TileGrid(0), ContractError);
  g.set(4, 3, 2);
  const auto w = g.window(3, 4);
  EXPECT_EQ(w.width(), 4);
  EXPECT_EQ(w.at(1, 3), 2);
  EXPECT_EQ(w.occupied_count(), 1);
}
