#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "morai/morai.hpp"
#include "morai/pipeline.hpp"
#include "morai/server.hpp"

namespace fs = std::filesystem;
using namespace morai;
using nlohmann::json;

namespace {

constexpr int kExitIo = 2;

std::string default_data_dir() {
  if (const char* d = std::getenv("MORAI_DATA_DIR"); d && *d) return d;
  return "data";
}

AgentConfig config_from(const std::string& path) { return path.empty() ? AgentConfig{} : load_config(path); }

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  nn::write_file(path, text);
}

std::string loss_csv(const std::vector<double>& curve) {
  std::ostringstream out;
  out << "epoch,loss\n";
  out.precision(10);
  for (std::size_t i = 0; i < curve.size(); ++i) out << i + 1 << "," << curve[i] << "\n";
  return out.str();
}

struct Common {
  std::uint64_t seed = 0;
  std::string config;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--config", c.config, "Agent hyperparameter file (JSON)");
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  Common common;
  std::string in;
  std::string out;
};

int ingest_levels(const IngestArgs& a) {
  const auto out = a.out.empty() ? (fs::path(default_data_dir()) / "levels").string() : a.out;
  const auto levels = read_level_dir(a.in);
  fs::create_directories(out);
  for (const auto& l : levels) {
    write_text((fs::path(out) / (l.name + ".txt")).string(), serialize_level_text(l.grid));
    std::cout << l.name << ": width " << l.grid.width() << ", " << l.grid.occupied_count() << " sprites\n";
  }
  std::cout << "ingested " << levels.size() << " levels into " << out << "\n";
  return 0;
}

struct SmbArgs {
  Common common;
  std::string levels;
  std::string out;
};

int build_smb_dataset(const SmbArgs& a) {
  const auto samples = build_smb_samples(load_levels(a.levels));
  ensure_parent(a.out);
  write_samples(samples, a.out);
  std::cout << "wrote " << samples.size() << " samples to " << a.out << "\n";
  return 0;
}

struct LogDatasetArgs {
  Common common;
  std::string logs;
  std::string out_dir;
};

int build_log_dataset(const LogDatasetArgs& a) {
  const auto cfg = config_from(a.common.config);
  const auto corpus = read_log_dir(a.logs);
  for (const auto& s : corpus.skipped) std::cerr << "skipped " << s << "\n";
  const auto samples = log_samples(corpus.logs, cfg.credit);
  Rng rng(a.common.seed);
  const auto split = split_by_participant(samples, corpus.incomplete_participants, cfg.train_ratio, rng);
  fs::create_directories(a.out_dir);
  const auto dir = fs::path(a.out_dir);
  write_samples(split.train, (dir / "train.jsonl").string());
  write_samples(split.test, (dir / "test.jsonl").string());
  json meta{{"seed", a.common.seed},
            {"train_ratio", cfg.train_ratio},
            {"gamma", cfg.credit.gamma},
            {"deletion_penalty", cfg.credit.deletion_penalty},
            {"sessions", corpus.logs.size()},
            {"skipped", corpus.skipped},
            {"train_samples", split.train.size()},
            {"test_samples", split.test.size()},
            {"test_participants", split.test_participants}};
  write_text((dir / "split.json").string(), meta.dump(2) + "\n");
  std::cout << "train " << split.train.size() << " samples, test " << split.test.size() << " samples ("
            << split.test_participants.size() << " participants)\n";
  return 0;
}

struct TrainArgs {
  Common common;
  std::string agent;
  std::string levels;
  std::string data;
  std::string out;
  std::string loss_out;
  std::string meta_out;
};

int train(const TrainArgs& a) {
  const auto cfg = config_from(a.common.config);
  ensure_parent(a.out);
  const auto loss_path = a.loss_out.empty() ? a.out + ".loss.csv" : a.loss_out;
  const auto meta_path = a.meta_out.empty() ? a.out + ".meta.json" : a.meta_out;
  if (a.agent == "cnn") {
    if (a.data.empty()) throw ContractError("train --agent cnn needs --data");
    const auto samples = read_samples(a.data);
    CnnModel model(cfg.cnn, a.common.seed);
    auto tc = cfg.cnn_train;
    tc.seed = a.common.seed;
    const auto r = pretrain(model, samples, tc);
    nn::write_file(a.out, encode_cnn_model(model));
    write_text(loss_path, loss_csv(r.loss_curve));
    json meta{{"agent", "cnn"},
              {"seed", a.common.seed},
              {"data", a.data},
              {"samples", samples.size()},
              {"config", model.config.to_json()},
              {"layers", model.net.spec()},
              {"train",
               {{"batch_size", tc.batch_size},
                {"max_epochs", tc.max_epochs},
                {"learning_rate", tc.adam.lr},
                {"convergence_window", tc.convergence_window},
                {"min_rel_improvement", tc.min_rel_improvement},
                {"target_loss", tc.target_loss}}},
              {"epochs", r.epochs},
              {"converged", r.converged},
              {"final_loss", r.loss_curve.empty() ? 0.0 : r.loss_curve.back()}};
    write_text(meta_path, meta.dump(2) + "\n");
    std::cout << "cnn: " << r.epochs << " epochs, loss " << meta["final_loss"].get<double>()
              << (r.converged ? " (converged)" : "") << "\n";
    return 0;
  }
  if (a.levels.empty()) throw ContractError("train --agent " + a.agent + " needs --levels");
  const auto levels = load_levels(a.levels);
  if (a.agent == "markov") {
    std::vector<AbstractGrid> abs;
    for (const auto& l : levels) abs.push_back(to_abstract(l));
    write_text(a.out, markov_train(abs).to_json().dump() + "\n");
  } else if (a.agent == "shape") {
    write_text(a.out, shape_train(levels, cfg.shape_threshold).to_json().dump() + "\n");
  } else if (a.agent == "lstm") {
    auto lc = cfg.lstm;
    lc.seed = a.common.seed;
    auto r = lstm_train(levels, lc);
    r.model.threshold = cfg.lstm_threshold;
    nn::write_file(a.out, encode_lstm_model(r.model));
    write_text(loss_path, loss_csv(r.loss_curve));
    json meta{{"agent", "lstm"},     {"seed", a.common.seed},   {"levels", levels.size()},
              {"hidden", lc.hidden}, {"epochs", lc.epochs},     {"learning_rate", lc.adam.lr},
              {"threshold", r.model.threshold},
              {"final_loss", r.loss_curve.empty() ? 0.0 : r.loss_curve.back()}};
    write_text(meta_path, meta.dump(2) + "\n");
  } else {
    throw ContractError("unknown agent '" + a.agent + "' (markov, shape, lstm, cnn)");
  }
  std::cout << a.agent << ": trained on " << levels.size() << " levels, saved " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  Common common;
  std::string agent;
  std::string model;
  std::string mode = "none";
  std::string data;
  std::string out;
  std::string label;
};

int eval(const EvalArgs& a) {
  const auto cfg = config_from(a.common.config);
  const auto mode = mode_from_string(a.mode);
  if (!mode) throw ContractError("unknown mode '" + a.mode + "' (none, episodic, continuous)");
  const auto groups = group_by_participant(read_samples(a.data));
  auto agent = load_agent_factory(a.agent, a.model, cfg)();
  auto report = simulate(*agent, groups, *mode, a.common.seed);
  report.label = a.label.empty() ? (*mode == ActiveMode::None ? a.agent : a.agent + " " + a.mode) : a.label;
  const auto table = render_table({report});
  std::cout << table.text;
  if (!a.out.empty()) write_text(a.out, table.csv);
  return 0;
}

struct ServeArgs {
  Common common;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  std::vector<std::string> models;
  int width = kDefaultLevelWidth;
  double minutes = 15.0;
};

Server* g_server = nullptr;

int serve(const ServeArgs& a) {
  const auto cfg = config_from(a.common.config);
  auto reg = std::make_shared<AgentRegistry>();
  reg->add("random", load_agent_factory("random", ""));
  for (const auto& spec : a.models) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ContractError("--model expects name=path or name=kind:path, got '" + spec + "'");
    const auto name = spec.substr(0, eq);
    auto rest = spec.substr(eq + 1);
    auto kind = name;
    if (const auto colon = rest.find(':'); colon != std::string::npos && is_trainable_agent(rest.substr(0, colon))) {
      kind = rest.substr(0, colon);
      rest = rest.substr(colon + 1);
    }
    reg->add(name, load_agent_factory(kind, rest, cfg));
  }
  ServiceOptions o;
  o.data_dir = a.data_dir.empty() ? default_data_dir() : a.data_dir;
  o.seed = a.common.seed;
  o.level_width = a.width;
  o.time_limit_ms = static_cast<std::int64_t>(a.minutes * 60000.0);
  SessionService service(reg, o);
  Server server(service);
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  int port = a.port;
  if (port == 0) {
    port = server.bind_any(a.host);
    if (port <= 0) throw IoError("cannot bind " + a.host);
    std::cout << "listening on http://" << a.host << ":" << port << std::endl;
    server.listen_after_bind();
  } else {
    std::cout << "listening on http://" << a.host << ":" << port << std::endl;
    if (!server.listen(a.host, port)) throw IoError("cannot listen on " + a.host + ":" + std::to_string(port));
  }
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-creative tile-level design engine"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest-levels", "Validate text levels and copy them into the corpus");
  add_common(c_ingest, ingest.common);
  c_ingest->add_option("--in", ingest.in, "Directory of .txt levels")->required();
  c_ingest->add_option("--out", ingest.out, "Corpus directory (default $MORAI_DATA_DIR/levels)");

  SmbArgs smb;
  auto* c_smb = app.add_subcommand("build-smb-dataset", "Approximate co-creative samples from finished levels");
  add_common(c_smb, smb.common);
  c_smb->add_option("--levels", smb.levels, "Directory of .txt levels")->required();
  c_smb->add_option("--out", smb.out, "Output samples (.jsonl)")->required();

  LogDatasetArgs logs;
  auto* c_logs = app.add_subcommand("build-log-dataset", "Credit session logs and split them by participant");
  add_common(c_logs, logs.common);
  c_logs->add_option("--logs", logs.logs, "Directory of session logs (.jsonl)")->required();
  c_logs->add_option("--out-dir", logs.out_dir, "Receives train.jsonl, test.jsonl and split.json")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train an agent");
  add_common(c_train, tr.common);
  c_train->add_option("--agent", tr.agent, "markov, shape, lstm or cnn")->required();
  c_train->add_option("--levels", tr.levels, "Level directory (markov, shape, lstm)");
  c_train->add_option("--data", tr.data, "Samples (.jsonl) for cnn");
  c_train->add_option("--out", tr.out, "Model file")->required();
  c_train->add_option("--loss-out", tr.loss_out, "Loss curve CSV (default <out>.loss.csv)");
  c_train->add_option("--meta-out", tr.meta_out, "Run metadata JSON (default <out>.meta.json)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Simulated replay evaluation on held-out samples");
  add_common(c_eval, ev.common);
  c_eval->add_option("--agent", ev.agent, "random, markov, shape, lstm or cnn")->required();
  c_eval->add_option("--model", ev.model, "Model file of the agent");
  c_eval->add_option("--mode", ev.mode, "none, episodic or continuous")->capture_default_str();
  c_eval->add_option("--data", ev.data, "Test samples (.jsonl)")->required();
  c_eval->add_option("--out", ev.out, "Report CSV");
  c_eval->add_option("--label", ev.label, "Column heading");

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("serve", "Run the session server");
  add_common(c_serve, sv.common);
  c_serve->add_option("--host", sv.host)->capture_default_str();
  c_serve->add_option("--port", sv.port, "0 picks a free port")->capture_default_str();
  c_serve->add_option("--data-dir", sv.data_dir, "Log directory root (default $MORAI_DATA_DIR or ./data)");
  c_serve->add_option("--model", sv.models, "Agent as name=path or name=kind:path; repeatable");
  c_serve->add_option("--width", sv.width, "Level width")->capture_default_str();
  c_serve->add_option("--minutes", sv.minutes, "Soft session time limit")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_ingest) return ingest_levels(ingest);
    if (*c_smb) return build_smb_dataset(smb);
    if (*c_logs) return build_log_dataset(logs);
    if (*c_train) return train(tr);
    if (*c_eval) return eval(ev);
    if (*c_serve) return serve(sv);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
