// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "fixtures.hpp"
#include "grad_scenarios.hpp"
#include "morai/morai.hpp"
#include "reference_tables.hpp"

using namespace morai;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

using CellSet = std::set<std::tuple<int, int, int>>;

CellSet action_set(const SmdpSample& s) {
  CellSet out;
  for (const auto& a : s.actions) out.insert({a.x, a.y, a.sprite});
  return out;
}

CellSet proposal_set(const Additions& adds) {
  CellSet out;
  for (const auto& a : adds) out.insert({a.x, a.y, a.sprite});
  return out;
}

// ---------------------------------------------------------------------------

constexpr int kCreditLogs = 200;

Outcome credit_oracle() {
  Rng rng(2024);
  int mismatches = 0, additions = 0;
  for (int i = 0; i < kCreditLogs; ++i) {
    const auto log = fixtures::random_session_log(rng, 5, 10);
    const auto credits = assign_credit(log);
    const auto oracle = fixtures::oracle_credit(log, 0.1, -0.1);
    if (credits.size() != oracle.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t k = 0; k < oracle.size(); ++k, ++additions)
      if (credits[k].event_index != oracle[k].event_index || credits[k].reward != oracle[k].reward) ++mismatches;
  }
  return {mismatches == 0, std::to_string(kCreditLogs) + " logs, " + std::to_string(additions) + " additions, " +
                               std::to_string(mismatches) + " mismatches"};
}

constexpr double kLinearGradTol = 1e-5;
constexpr double kGradTol = 1e-3;

Outcome gradient_checks() {
  const std::vector<std::tuple<const char*, double, std::function<double()>>> checks{
      {"conv3x3", kLinearGradTol, [] { return fixtures::conv_grad_error(3); }},
      {"conv1x1", kLinearGradTol, [] { return fixtures::conv_grad_error(1); }},
      {"dense", kLinearGradTol, fixtures::dense_grad_error},
      {"leaky_relu+mse", kGradTol, fixtures::leaky_relu_mse_grad_error},
      {"lstm", kGradTol, fixtures::lstm_grad_error},
      {"cnn", kGradTol, fixtures::shrunken_cnn_grad_error},
      {"low_rank_head", kGradTol, fixtures::low_rank_head_grad_error},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [name, tol, run] : checks) {
    const double err = run();
    ok = ok && err < tol;
    detail += std::string(detail.empty() ? "" : ", ") + name + " " + fmt("%.1e", err);
  }
  return {ok, detail};
}

constexpr double kOverfitLoss = 1e-3;
constexpr int kOverfitEpochs = 2000;

Outcome cnn_overfit() {
  std::vector<SmdpSample> decodable;
  for (auto& s : build_smb_samples(fixtures::smb_like_corpus(1, 60, 11)))
    if (static_cast<int>(s.actions.size()) <= kMaxAdditions) decodable.push_back(std::move(s));
  std::vector<SmdpSample> ten;
  for (std::size_t i = 0; i < 10; ++i) ten.push_back(decodable[i * decodable.size() / 10]);

  CnnModel model(CnnConfig{}, 7);
  TrainConfig cfg;
  cfg.max_epochs = kOverfitEpochs;
  cfg.convergence_window = kOverfitEpochs;
  cfg.min_rel_improvement = 1e-12;
  cfg.target_loss = 1e-6;
  cfg.seed = 7;
  const auto r = pretrain(model, ten, cfg);
  const double loss = dataset_loss(model, ten);
  int exact = 0;
  for (const auto& s : ten) exact += proposal_set(cnn_propose(model, s.state, 0)) == action_set(s);
  return {loss < kOverfitLoss && exact == 10 && r.epochs <= kOverfitEpochs,
          std::to_string(r.epochs) + " epochs, MSE " + fmt("%.2e", loss) + ", " + std::to_string(exact) + "/10 decoded exactly"};
}

Outcome markov_oracle() {
  Rng rng(3);
  std::vector<TileGrid> levels;
  for (int i = 0; i < 3; ++i) levels.push_back(fixtures::scattered_level(12 + 3 * i, rng, 0.35));
  std::vector<AbstractGrid> abstract;
  for (const auto& l : levels) abstract.push_back(to_abstract(l));
  const auto model = markov_train(abstract);

  // Count every cell with a left and a below neighbour, keyed by (left, below-left, below).
  const auto& pal = SpritePalette::standard();
  auto sym = [&](const TileGrid& g, int x, int y) { return g.at(x, y) ? pal.symbol(*g.at(x, y)) : Symbol::Empty; };
  std::map<std::tuple<Symbol, Symbol, Symbol>, std::map<Symbol, long>> counts;
  std::map<std::tuple<Symbol, Symbol, Symbol>, long> totals;
  for (const auto& g : levels)
    for (int x = 1; x < g.width(); ++x)
      for (int y = 0; y + 1 < kLevelHeight; ++y) {
        const auto key = std::make_tuple(sym(g, x - 1, y), sym(g, x - 1, y + 1), sym(g, x, y + 1));
        ++counts[key][sym(g, x, y)];
        ++totals[key];
      }
  double worst = 0.0;
  for (const auto& [key, row] : counts) {
    const MarkovContext ctx{std::get<0>(key), std::get<1>(key), std::get<2>(key)};
    for (Symbol s : kAlphabet) {
      const long n = row.count(s) ? row.at(s) : 0;
      worst = std::max(worst, std::abs(model.probability(ctx, s) - static_cast<double>(n) / static_cast<double>(totals.at(key))));
    }
  }
  const bool same_contexts = model.counts.size() == counts.size();
  return {same_contexts && worst <= 1e-12,
          std::to_string(counts.size()) + " contexts, max deviation " + fmt("%.1e", worst)};
}

// Per window: ground, brick and the four pipe sprites everywhere; the question block
// is in windows 0-2 and the goomba in windows 3-5. 6 windows x 7 types.
constexpr std::size_t kCraftedTypesPerWindow = 7;
constexpr std::size_t kCraftedSamples = 42;

TileGrid crafted_level() {
  TileGrid g(45);
  for (int x = 0; x < 45; ++x) g.set(x, kGroundRow, sprite::kGround);
  g.set(2, 9, sprite::kQuestion);
  g.set(39, 9, sprite::kBrick);
  g.set(20, 11, sprite::kPipeTopLeft);
  g.set(21, 11, sprite::kPipeTopRight);
  for (int y = 12; y < kGroundRow; ++y) {
    g.set(20, y, sprite::kPipeBodyLeft);
    g.set(21, y, sprite::kPipeBodyRight);
  }
  g.set(42, 13, sprite::kGoomba);
  return g;
}

Outcome smb_counting() {
  const TileGrid level = crafted_level();
  const auto samples = build_smb_samples({level});
  bool rebuilt = samples.size() == kCraftedSamples;
  for (std::size_t i = 0; i < samples.size() && rebuilt; ++i) {
    const auto& s = samples[i];
    TileGrid g = s.state;
    for (const auto& a : s.actions) {
      if (g.occupied(a.x, a.y)) rebuilt = false;
      g.set(a.x, a.y, a.sprite);
    }
    rebuilt = rebuilt && g == level.window(static_cast<int>(i / kCraftedTypesPerWindow), kChunkWidth);
  }
  return {rebuilt, std::to_string(samples.size()) + " samples (expected " + std::to_string(kCraftedSamples) + "), windows " +
                       (rebuilt ? "reconstructed" : "not reconstructed")};
}

constexpr double kReplayTol = 1e-9;

std::string last_csv_line(const std::string& csv) {
  const auto end = csv.find_last_not_of('\n');
  const auto start = csv.rfind('\n', end);
  return csv.substr(start + 1, end - start);
}

Outcome replay_fidelity() {
  Rng rng(31);
  const auto logs = fixtures::random_study(rng, 10, 2);
  std::vector<SmdpSample> samples;
  std::map<std::string, double> credited;
  for (const auto& log : logs) {
    auto more = build_samples(log, assign_credit(log));
    samples.insert(samples.end(), more.begin(), more.end());
    for (const auto& c : fixtures::oracle_credit(log)) credited[log.participant_id] += c.reward;
  }
  const auto split = split_by_participant(samples, {}, 0.8, rng);
  const auto groups = group_by_participant(split.test);
  auto agent = fixtures::logged_policy(groups);
  const auto report = simulate(agent, groups, ActiveMode::None, 0);
  double worst = 0.0;
  for (const auto& row : report.participants) worst = std::max(worst, std::abs(row.summed_reward - credited[row.participant_id]));

  const auto pretrained = last_csv_line(render_table(fixtures::pretrained_comparison_table()).csv);
  const auto active = last_csv_line(render_table(fixtures::active_comparison_table()).csv);
  const bool rows = pretrained == fixtures::kPretrainedAvgRow && active == fixtures::kActiveAvgRow;
  return {worst <= kReplayTol && rows && !report.participants.empty(),
          std::to_string(report.participants.size()) + " participants, max deviation " + fmt("%.1e", worst) + "; \"" +
              pretrained + "\" / \"" + active + "\""};
}

std::map<std::string, double> sums(const EvalReport& r) {
  std::map<std::string, double> out;
  for (const auto& p : r.participants) out[p.participant_id] = p.summed_reward;
  return out;
}

Outcome active_reductions() {
  auto frozen = fixtures::active_mode_fixture();
  frozen.model.adam.lr = 0.0;
  CnnAgent still(frozen.model);
  const auto none = simulate(still, frozen.groups, ActiveMode::None, 0);
  auto episodic = simulate(still, frozen.groups, ActiveMode::Episodic, 0);
  episodic.mode = none.mode;
  episodic.label = none.label;
  const bool reduces = episodic == none;

  auto f = fixtures::active_mode_fixture();
  CnnAgent agent(f.model);
  auto reordered = f.groups;
  std::rotate(reordered.begin(), reordered.begin() + 1, reordered.end());
  const bool episodic_stable = sums(simulate(agent, f.groups, ActiveMode::Episodic, 0)) ==
                               sums(simulate(agent, reordered, ActiveMode::Episodic, 0));
  const bool continuous_moves = sums(simulate(agent, f.groups, ActiveMode::Continuous, 0)) !=
                                sums(simulate(agent, reordered, ActiveMode::Continuous, 0));
  return {reduces && episodic_stable && continuous_moves,
          std::string("episodic(lr=0)==none ") + (reduces ? "yes" : "no") + ", episodic order-free " +
              (episodic_stable ? "yes" : "no") + ", continuous order-dependent " + (continuous_moves ? "yes" : "no")};
}

constexpr int kStudySeeds = 10;
constexpr int kStudyWinsNeeded = 9;

Outcome synthetic_study() {
  const auto levels = load_levels((fixtures::source_dir() / "data" / "levels").string());
  const auto baselines = StudyBaselines::train(levels);
  int wins = 0;
  std::string detail;
  for (int seed = 0; seed < kStudySeeds; ++seed) {
    StudyOptions opts;
    opts.data_dir = fixtures::scratch_dir("study_" + std::to_string(seed)).string();
    const auto r = run_synthetic_study(baselines, static_cast<std::uint64_t>(seed), opts);
    const bool win = r.cnn.avg_percent > r.random.avg_percent;
    wins += win;
    detail += (seed ? " " : "") + fmt("%.1f", r.cnn.avg_percent) + (win ? ">" : "<=") + fmt("%.1f", r.random.avg_percent);
    std::filesystem::remove_all(opts.data_dir);
  }
  return {wins >= kStudyWinsNeeded, std::to_string(wins) + "/" + std::to_string(kStudySeeds) + " seeds (cnn vs random Avg %: " + detail + ")"};
}

constexpr int kContractCalls = 1000;

Outcome agent_contracts() {
  const auto corpus = fixtures::smb_like_corpus(3, 100, 5);
  std::vector<AbstractGrid> abstract;
  for (const auto& l : corpus) abstract.push_back(to_abstract(l));
  LstmTrainConfig lcfg;
  lcfg.hidden = 16;
  lcfg.epochs = 20;
  lcfg.adam.lr = 0.01;
  auto lstm_model = lstm_train(corpus, lcfg).model;
  // A lightly trained CNN with a low threshold proposes plenty.
  CnnModel cnn_model(CnnConfig{}, 9);
  auto smb = build_smb_samples(corpus);
  smb.resize(64);
  TrainConfig tcfg;
  tcfg.max_epochs = 3;
  pretrain(cnn_model, smb, tcfg);
  cnn_model.config.threshold = 0.02;

  std::vector<std::unique_ptr<Agent>> agents;
  agents.push_back(std::make_unique<RandomAgent>());
  agents.push_back(std::make_unique<MarkovAgent>(std::make_shared<MarkovModel>(markov_train(abstract))));
  agents.push_back(std::make_unique<ShapeAgent>(std::make_shared<ShapeModel>(shape_train(corpus))));
  agents.push_back(std::make_unique<LstmAgent>(std::make_shared<LstmAgentModel>(lstm_model)));
  agents.push_back(std::make_unique<CnnAgent>(cnn_model));

  bool ok = true;
  std::string detail;
  for (auto& agent : agents) {
    Rng level_rng(99), rng(7);
    int violations = 0;
    std::size_t proposed = 0;
    std::string first;
    for (int i = 0; i < kContractCalls; ++i) {
      const int width = 20 + static_cast<int>(uniform_index(level_rng, 100));
      const auto level = fixtures::scattered_level(width, level_rng, uniform_real(level_rng, 0.0, 0.9));
      const int camera = static_cast<int>(uniform_index(level_rng, static_cast<std::size_t>(width)));
      const auto adds = agent->propose(level, camera, rng);
      proposed += adds.size();
      const auto why = fixtures::additions_violation(level, adds);
      if (!why.empty() && violations++ == 0) first = why;
    }
    ok = ok && violations == 0;
    detail += (detail.empty() ? "" : ", ") + agent->name() + " " + std::to_string(violations) + " bad/" +
              std::to_string(proposed) + " adds" + (first.empty() ? "" : " (" + first + ")");
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "credit assignment matches the event-walk oracle", 10, credit_oracle},
      {2, "gradient checks", 60, gradient_checks},
      {3, "CNN overfits 10 SMB samples and decodes them", 300, cnn_overfit},
      {4, "Markov probabilities match brute-force counts", 0, markov_oracle},
      {5, "SMB dataset counting law and window reconstruction", 0, smb_counting},
      {6, "replay fidelity and published Avg % rows", 0, replay_fidelity},
      {7, "active-mode reductions", 0, active_reductions},
      {8, "synthetic bot study: CNN beats random additions", 900, synthetic_study},
      {9, "agent proposal contracts", 0, agent_contracts},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
              << fmt("%.1f", secs) << " s)" << std::endl;
  }
  return failed ? 1 : 0;
}
