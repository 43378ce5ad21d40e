// End-to-end walk through the engine: scripted users co-create levels with the three
// baselines, their session logs become training data for the CNN, and the CNN is
// evaluated on the held-out users and then handed a fresh session of its own.
#include <chrono>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "morai/morai.hpp"

using namespace morai;
namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_window(const TileGrid& level, int x0) {
  const auto text = serialize_level_text(level.window(x0, std::min(kChunkWidth, level.width() - x0)));
  std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morai demo: bot study, CNN pretraining and evaluation"};
  std::string levels_dir = "data/levels";
  std::string out_dir = "demo_out";
  std::uint64_t seed = 0;
  int lstm_epochs = 50;
  app.add_option("--levels", levels_dir, "Directory of level .txt files")->check(CLI::ExistingDirectory);
  app.add_option("--out", out_dir, "Where logs, tables and the model go");
  app.add_option("--seed", seed, "Study seed");
  app.add_option("--lstm-epochs", lstm_epochs, "LSTM baseline training epochs")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto levels = load_levels(levels_dir);
    std::cout << "training baselines on " << levels.size() << " levels...\n";
    LstmTrainConfig lstm_cfg;
    lstm_cfg.epochs = lstm_epochs;
    const auto baselines = StudyBaselines::train(levels, lstm_cfg);
    std::cout << "  done in " << seconds_since(t0) << " s\n\n";

    fs::remove_all(out_dir);
    fs::create_directories(out_dir);
    StudyOptions opts;
    opts.data_dir = out_dir;
    std::cout << "bot study (seed " << seed << "), logs in " << out_dir << "/logs\n";
    const auto r = run_synthetic_study(baselines, seed, opts);
    for (std::size_t i = 0; i + 1 < r.sessions.size(); i += 2) {
      const auto& a = r.sessions[i];
      const auto& b = r.sessions[i + 1];
      std::cout << "  bot" << i / 2 << ": " << a.agent << " " << a.score << " vs " << b.agent << " " << b.score << " -> prefers "
                << (a.score >= b.score ? a.agent : b.agent) << "\n";
    }

    std::cout << "\n" << r.split.train.size() << " training samples, " << r.split.test.size() << " held-out samples from";
    for (const auto& p : r.split.test_participants) std::cout << " " << p;
    std::cout << "\nCNN pretrained for " << r.training.epochs << " epochs, final loss " << r.training.loss_curve.back() << "\n\n";

    // Active learning on the held-out users, next to the pretrained and random results.
    const auto groups = group_by_participant(r.split.test);
    CnnAgent active(*r.model);
    auto episodic = simulate(active, groups, ActiveMode::Episodic, seed);
    auto continuous = simulate(active, groups, ActiveMode::Continuous, seed);
    auto cnn = r.cnn;
    auto random = r.random;
    cnn.label = "CNN";
    random.label = "Random";
    episodic.label = "Episodic";
    continuous.label = "Continuous";
    const auto table = render_table({cnn, episodic, continuous, random});
    std::cout << table.text << "\n";
    std::ofstream(fs::path(out_dir) / "table.csv") << table.csv;
    nn::write_file((fs::path(out_dir) / "cnn.bin").string(), encode_cnn_model(*r.model));

    // A new user of the first style, now partnered with the trained CNN.
    auto reg = baselines.registry();
    reg->add("cnn", [m = *r.model] { return std::make_unique<CnnAgent>(m); });
    SessionService service(reg, ServiceOptions{});
    auto bot = make_bots(1, opts.styles)[0];
    bot.participant_id = "newcomer";
    Rng rng(seed + 1);
    const auto s = play_bot_session(service, bot, "cnn", rng);
    std::cout << "newcomer with the CNN: mean opinion " << s.score << "\n";
    print_window(service.level(s.session_id), 0);
    std::cout << "\nfinished in " << seconds_since(t0) << " s\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
