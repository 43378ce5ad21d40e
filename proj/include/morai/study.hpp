#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "morai/eval.hpp"
#include "morai/pipeline.hpp"
#include "morai/session.hpp"

namespace morai {

enum class BotStyle { Builder, Collector, Fighter };

/// A scripted participant. Its level follows its style (ground with a gap, then blocks,
/// coins or enemies, one step per turn); it deletes AI additions of the classes it
/// dislikes and ranks the partner whose additions it likes more.
struct UserBot {
  std::string participant_id;
  BotStyle style = BotStyle::Builder;
  std::set<Symbol> liked;
  std::set<Symbol> disliked;
  int turns = 2;
  int camera_x = 20;
  int max_deletes_per_turn = 3;
  bool vary_layout = false;  // randomize gap and feature positions per session
};

struct BotSession {
  std::string session_id;
  std::string agent;
  double score = 0.0;  // mean opinion of the AI's additions, +1 liked, -1 disliked
};

namespace detail {

inline std::vector<std::vector<Addition>> bot_plan(const UserBot& bot, Rng& rng) {
  using namespace sprite;
  const int turns = std::max(1, bot.turns);
  std::vector<std::vector<Addition>> plan(static_cast<std::size_t>(turns));
  auto at = [&](int t) -> std::vector<Addition>& { return plan[static_cast<std::size_t>(std::min(t, turns - 1))]; };
  auto pick = [&](int lo, int n) { return lo + (bot.vary_layout ? static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n))) : n / 2); };
  const int gap = pick(14, 10);
  for (int x = 0; x < kChunkWidth; ++x) {
    if (x == gap || x == gap + 1) continue;
    at(0).push_back({x, kGroundRow, kGround});
    at(0).push_back({x, kGroundRow - 1, kGround});
  }
  const int a = pick(3, 7);
  const int b = pick(27, 6);
  switch (bot.style) {
    case BotStyle::Builder:
      for (int i = 0; i < 5; ++i) at(0).push_back({a + i, 9, i == 2 ? kQuestion : kBrick});
      for (int i = 0; i < 3; ++i)
        for (int y = kGroundRow - 2; y > kGroundRow - 3 - i; --y) at(1).push_back({b + i, y, kHardBlock});
      break;
    case BotStyle::Collector:
      for (int i = 0; i < 5; ++i) at(0).push_back({a + i, 8, kCoin});
      for (int i = 0; i < 3; ++i) at(1).push_back({b + i, 9, kQuestion});
      for (int i = 0; i < 3; ++i) at(1).push_back({b + i, 8, kCoin});
      break;
    case BotStyle::Fighter:
      at(0).push_back({a, kGroundRow - 2, kGoomba});
      at(0).push_back({a + 4, kGroundRow - 2, kKoopaGreen});
      at(1).push_back({b, 10, kPipeTopLeft});
      at(1).push_back({b + 1, 10, kPipeTopRight});
      at(1).push_back({b, 11, kPipeBodyLeft});
      at(1).push_back({b + 1, 11, kPipeBodyRight});
      at(1).push_back({b + 4, kGroundRow - 2, kGoomba});
      break;
  }
  return plan;
}

inline int bot_opinion(const UserBot& bot, SpriteId s) {
  const Symbol sym = SpritePalette::standard().at(s).symbol;
  if (bot.liked.count(sym)) return 1;
  if (bot.disliked.count(sym)) return -1;
  return 0;
}

}  // namespace detail

/// Plays one session against `agent` through the service and ends it (unranked).
inline BotSession play_bot_session(SessionService& service, const UserBot& bot, const std::string& agent, Rng& rng) {
  BotSession out{service.create_session(bot.participant_id, agent), agent, 0};
  const auto plan = detail::bot_plan(bot, rng);
  std::vector<Addition> ai;
  for (const auto& step : plan) {
    auto level = service.level(out.session_id);
    for (const auto& a : step) {
      if (level.occupied(a.x, a.y)) continue;
      service.place(out.session_id, a.x, a.y, a.sprite);
      level.set(a.x, a.y, a.sprite);
    }
    const auto adds = service.end_turn(out.session_id, bot.camera_x);
    int deletes = 0;
    for (const auto& a : adds) {
      if (detail::bot_opinion(bot, a.sprite) < 0 && deletes < bot.max_deletes_per_turn) {
        service.remove(out.session_id, a.x, a.y);
        ++deletes;
      }
    }
    ai.insert(ai.end(), adds.begin(), adds.end());
  }
  for (const auto& a : ai) out.score += detail::bot_opinion(bot, a.sprite);
  if (!ai.empty()) out.score /= static_cast<double>(ai.size());
  service.end_session(out.session_id);
  return out;
}

/// Two back-to-back sessions and the ranking between them. Ties favour the first.
inline std::pair<BotSession, BotSession> run_bot_pair(SessionService& service, const UserBot& bot,
                                                       const std::string& first_agent,
                                                       const std::string& second_agent, Rng& rng) {
  auto a = play_bot_session(service, bot, first_agent, rng);
  auto b = play_bot_session(service, bot, second_agent, rng);
  RankPayload ra, rb;
  ra.reuse_rank = a.score >= b.score ? 1 : 2;
  rb.reuse_rank = 3 - ra.reuse_rank;
  service.rank({bot.participant_id, a.session_id, b.session_id, ra, rb});
  return {a, b};
}

/// `count` bots cycling through `styles`. Builders want the AI to add blocks and rewards
/// but no terrain or enemies; collectors want coins and item blocks; fighters want
/// enemies and ground and no coins.
inline std::vector<UserBot> make_bots(int count, const std::vector<BotStyle>& styles = {BotStyle::Builder, BotStyle::Collector, BotStyle::Fighter}) {
  if (styles.empty()) throw ContractError("make_bots needs at least one style");
  std::vector<UserBot> bots;
  for (int i = 0; i < count; ++i) {
    UserBot b;
    b.participant_id = "bot" + std::to_string(i);
    b.style = styles[static_cast<std::size_t>(i) % styles.size()];
    switch (b.style) {
      case BotStyle::Builder:
        b.liked = {Symbol::Breakable, Symbol::Question, Symbol::Pipe, Symbol::Coin};
        b.disliked = {Symbol::Solid, Symbol::Enemy, Symbol::Cannon};
        break;
      case BotStyle::Collector:
        b.liked = {Symbol::Coin, Symbol::Question, Symbol::Breakable};
        b.disliked = {Symbol::Enemy, Symbol::Decoration};
        break;
      case BotStyle::Fighter:
        b.liked = {Symbol::Enemy, Symbol::Cannon, Symbol::Solid};
        b.disliked = {Symbol::Coin, Symbol::Decoration};
        break;
    }
    bots.push_back(std::move(b));
  }
  return bots;
}

/// Every bot plays two sessions and ranks them. The pair of agents depends on the bot's
/// style (style k meets agents k and k+1, cyclically); the order alternates between
/// successive bots of a style.
inline std::vector<BotSession> run_bot_study(SessionService& service, const std::vector<UserBot>& bots,
                                             const std::vector<std::string>& agents, Rng& rng) {
  if (agents.size() < 2) throw ContractError("bot study needs at least two agents");
  std::vector<BotSession> out;
  std::map<BotStyle, int> seen;
  for (const auto& bot : bots) {
    const auto k = static_cast<std::size_t>(bot.style);
    const auto& x = agents[k % agents.size()];
    const auto& y = agents[(k + 1) % agents.size()];
    auto [a, b] = seen[bot.style]++ % 2 ? run_bot_pair(service, bot, y, x, rng) : run_bot_pair(service, bot, x, y, rng);
    out.push_back(a);
    out.push_back(b);
  }
  return out;
}

/// The three baselines, trained once and shared by every study run.
struct StudyBaselines {
  std::shared_ptr<const MarkovModel> markov;
  std::shared_ptr<const ShapeModel> shape;
  std::shared_ptr<const LstmAgentModel> lstm;

  static StudyBaselines train(const std::vector<TileGrid>& levels, const LstmTrainConfig& lstm_cfg = {}) {
    std::vector<AbstractGrid> abstract;
    for (const auto& l : levels) abstract.push_back(to_abstract(l));
    return {std::make_shared<const MarkovModel>(markov_train(abstract)),
            std::make_shared<const ShapeModel>(shape_train(levels)),
            std::make_shared<const LstmAgentModel>(lstm_train(levels, lstm_cfg).model)};
  }

  std::shared_ptr<AgentRegistry> registry() const {
    auto reg = std::make_shared<AgentRegistry>();
    reg->add("markov", [m = markov] { return std::make_unique<MarkovAgent>(m); });
    reg->add("shape", [m = shape] { return std::make_unique<ShapeAgent>(m); });
    reg->add("lstm", [m = lstm] { return std::make_unique<LstmAgent>(m); });
    return reg;
  }
};

struct StudyOptions {
  int bots = 6;
  std::vector<BotStyle> styles{BotStyle::Builder, BotStyle::Fighter};
  int turns = 2;
  int level_width = kDefaultLevelWidth;
  double split_ratio = 0.8;
  CreditConfig credit{};
  CnnConfig cnn{};
  TrainConfig train = [] {
    TrainConfig t;
    t.max_epochs = 200;
    return t;
  }();
  // Session logs go to <data_dir>/logs and are read back from there; empty keeps them in memory.
  std::string data_dir;
};

struct StudyResult {
  std::vector<BotSession> sessions;
  DatasetSplit split;
  TrainResult training;
  std::shared_ptr<CnnModel> model;  // pretrained
  EvalReport cnn;
  EvalReport random;
};

/// One synthetic study: bots play the baselines through the service, their logs are
/// credited and cut into samples, a CNN is pretrained on the training participants and
/// compared against random additions on the held-out ones.
inline StudyResult run_synthetic_study(const StudyBaselines& baselines, std::uint64_t seed, const StudyOptions& opts = {}) {
  ServiceOptions so;
  so.seed = seed;
  so.level_width = opts.level_width;
  so.data_dir = opts.data_dir;
  SessionService service(baselines.registry(), so);
  Rng rng(seed);
  auto bots = make_bots(opts.bots, opts.styles);
  for (auto& b : bots) b.turns = opts.turns;

  StudyResult r;
  r.sessions = run_bot_study(service, bots, {"markov", "shape", "lstm"}, rng);
  LogCorpus corpus;
  if (opts.data_dir.empty()) {
    for (const auto& s : r.sessions) corpus.logs.push_back(service.log(s.session_id));
  } else {
    corpus = read_log_dir(opts.data_dir + "/logs");
  }
  r.split = split_by_participant(log_samples(corpus.logs, opts.credit), corpus.incomplete_participants, opts.split_ratio, rng);

  r.model = std::make_shared<CnnModel>(opts.cnn, seed);
  TrainConfig tc = opts.train;
  tc.seed = seed;
  r.training = pretrain(*r.model, r.split.train, tc);
  const auto groups = group_by_participant(r.split.test);
  CnnAgent cnn(*r.model);
  RandomAgent random;
  r.cnn = simulate(cnn, groups, ActiveMode::None, seed);
  r.random = simulate(random, groups, ActiveMode::None, seed);
  return r;
}

}  // namespace morai
