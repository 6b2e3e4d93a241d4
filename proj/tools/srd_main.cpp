#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "srd/config.hpp"
#include "srd/data.hpp"
#include "srd/eval.hpp"
#include "srd/model.hpp"
#include "srd/trainer.hpp"

namespace fs = std::filesystem;

namespace {

using srd::TrainConfig;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("short write: " + path.string());
}

std::uint64_t env_seed_or(std::uint64_t fallback) {
  const char* env = std::getenv("SRD_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  TrainConfig probe;
  try {
    srd::apply_config_entry(probe, "train.seed", env);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(std::string("SRD_SEED must be an unsigned integer, got '") +
                                env + "'");
  }
  return probe.seed;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ",";
    out += srd::format_double(values[i]);
  }
  return out;
}

struct TrainFlags {
  std::string config_path;
  std::string mode;
  std::string conv_windows;
  double lambda = 0.0;
  double tau = 0.0;
  double lr_max = 0.0;
  double lr_min = 0.0;
  double dropout = 0.0;
  std::size_t batch_size = 0;
  std::size_t epochs = 0;
  std::size_t folds = 0;
  std::size_t patience = 0;
  std::size_t d_graph = 0;
  std::size_t gcn_layers = 0;
  std::size_t d_model = 0;
  std::size_t heads = 0;
  std::size_t seq_len = 0;
  std::size_t conv_maps = 0;
  std::size_t d_proj = 0;
  std::size_t clusters = 0;
  std::uint64_t seed = 0;
};

void add_train_options(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config_path, "key=value configuration file");
  cmd->add_option("--mode", f.mode, "graph|text|concat|psid|pscd");
  cmd->add_option("--lambda", f.lambda, "auxiliary loss weight");
  cmd->add_option("--tau", f.tau, "contrastive temperature");
  cmd->add_option("--batch-size", f.batch_size, "events per batch");
  cmd->add_option("--epochs", f.epochs, "epochs per fold");
  cmd->add_option("--lr-max", f.lr_max, "peak learning rate");
  cmd->add_option("--lr-min", f.lr_min, "floor learning rate");
  cmd->add_option("--folds", f.folds, "cross-validation folds");
  cmd->add_option("--patience", f.patience, "early-stopping patience, 0 disables");
  cmd->add_option("--dropout", f.dropout, "dropout rate");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--d-graph", f.d_graph, "structure encoder width");
  cmd->add_option("--gcn-layers", f.gcn_layers, "structure encoder depth");
  cmd->add_option("--d-model", f.d_model, "token embedding width");
  cmd->add_option("--heads", f.heads, "attention heads");
  cmd->add_option("--seq-len", f.seq_len, "root token sequence length");
  cmd->add_option("--conv-windows", f.conv_windows, "comma list of convolution windows");
  cmd->add_option("--conv-maps", f.conv_maps, "feature maps per window");
  cmd->add_option("--d-proj", f.d_proj, "projection head width");
  cmd->add_option("--clusters", f.clusters, "cluster count");
}

// Precedence: flags beat the config file, which beats SRD_SEED, which beats
// the built-in defaults.
TrainConfig resolve_train_config(CLI::App* cmd, const TrainFlags& f) {
  TrainConfig config;
  config.seed = env_seed_or(config.seed);
  if (cmd->count("--config")) srd::apply_config(config, srd::parse_config_file(f.config_path));
  if (cmd->count("--mode")) config.mode = srd::parse_mode(f.mode);
  if (cmd->count("--lambda")) config.lambda = f.lambda;
  if (cmd->count("--tau")) config.tau = f.tau;
  if (cmd->count("--batch-size")) config.batch_size = f.batch_size;
  if (cmd->count("--epochs")) config.epochs = f.epochs;
  if (cmd->count("--lr-max")) config.lr_max = f.lr_max;
  if (cmd->count("--lr-min")) config.lr_min = f.lr_min;
  if (cmd->count("--folds")) config.folds = f.folds;
  if (cmd->count("--patience")) config.patience = f.patience;
  if (cmd->count("--dropout")) config.dropout = f.dropout;
  if (cmd->count("--seed")) config.seed = f.seed;
  if (cmd->count("--d-graph")) config.dims.d_graph = f.d_graph;
  if (cmd->count("--gcn-layers")) config.dims.gcn_layers = f.gcn_layers;
  if (cmd->count("--d-model")) config.dims.d_model = f.d_model;
  if (cmd->count("--heads")) config.dims.heads = f.heads;
  if (cmd->count("--seq-len")) config.dims.seq_len = f.seq_len;
  if (cmd->count("--conv-windows"))
    config.dims.conv_windows = srd::parse_size_list(f.conv_windows, "--conv-windows");
  if (cmd->count("--conv-maps")) config.dims.conv_maps = f.conv_maps;
  if (cmd->count("--d-proj")) config.dims.d_proj = f.d_proj;
  if (cmd->count("--clusters")) config.dims.clusters = f.clusters;
  // Vocabulary width and class count come from the data later; stand-ins let
  // every user-settable constraint fail fast here.
  TrainConfig probe = config;
  probe.dims.vocab_size = std::max<std::size_t>(probe.dims.vocab_size, 2);
  probe.dims.classes = std::max<std::size_t>(probe.dims.classes, 2);
  probe.validate();
  return config;
}

struct GenerateArgs {
  std::size_t events = 400;
  std::size_t classes = 4;
  double correlation = 0.8;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_generate(CLI::App* cmd, const GenerateArgs& args) {
  std::uint64_t seed = cmd->count("--seed") ? args.seed : env_seed_or(1);
  std::ostringstream echo;
  echo << "[generate]\n";
  echo << "events=" << args.events << "\n";
  echo << "classes=" << args.classes << "\n";
  echo << "correlation=" << srd::format_double(args.correlation) << "\n";
  echo << "seed=" << seed << "\n";
  std::cout << echo.str() << std::flush;

  std::vector<srd::EventRecord> events =
      srd::generate_synthetic(args.events, args.classes, args.correlation, seed);
  std::string stats = srd::stats_csv(srd::compute_stats(events));

  fs::path dir(args.out);
  fs::create_directories(dir);
  write_file(dir / "config.echo", echo.str());
  srd::write_events(events, (dir / "events.jsonl").string());
  write_file(dir / "stats.csv", stats);
  std::cout << "wrote " << (dir / "events.jsonl").string() << " (" << events.size()
            << " events)\n";
  return 0;
}

int cmd_stats(const std::string& data, const std::string& out) {
  std::vector<srd::EventRecord> events = srd::parse_events(data);
  std::string csv = srd::stats_csv(srd::compute_stats(events));
  std::cout << "[stats]\ndata=" << data << "\n";
  std::cout << csv;
  if (!out.empty()) {
    fs::path dir(out);
    fs::create_directories(dir);
    write_file(dir / "stats.csv", csv);
  }
  return 0;
}

int cmd_train(CLI::App* cmd, const TrainFlags& flags, const std::string& data,
              const std::string& out) {
  TrainConfig config = resolve_train_config(cmd, flags);
  std::string echo = srd::config_echo(config);
  std::cout << echo << std::flush;

  std::vector<srd::EventRecord> events = srd::parse_events(data);
  srd::KfoldResult result = srd::run_kfold(events, config);

  std::ostringstream log;
  for (std::size_t k = 0; k < result.folds.size(); ++k) {
    for (const srd::EpochLog& e : result.folds[k].result.log) {
      nlohmann::json line = {{"fold", k},         {"epoch", e.epoch}, {"loss", e.loss},
                             {"main", e.main},    {"ssl", e.ssl},     {"lr", e.lr},
                             {"val_accuracy", e.val_accuracy}};
      log << line.dump() << "\n";
    }
  }

  std::vector<srd::ReportRow> rows;
  for (const srd::FoldOutcome& fold : result.folds)
    rows.push_back({srd::mode_name(config.mode), config.lambda, config.tau, fold.test_report});
  std::string metrics = srd::reports_csv(rows);

  nlohmann::json summary;
  summary["mode"] = srd::mode_name(config.mode);
  summary["lambda"] = config.lambda;
  summary["tau"] = config.tau;
  summary["classes"] = result.classes;
  summary["mean_accuracy"] = result.mean_accuracy;
  nlohmann::json folds = nlohmann::json::array();
  for (std::size_t k = 0; k < result.folds.size(); ++k) {
    const srd::FoldOutcome& fold = result.folds[k];
    folds.push_back({{"fold", k},
                     {"accuracy", fold.test_report.accuracy},
                     {"best_epoch", fold.result.best_epoch},
                     {"best_val_accuracy", fold.result.best_val_accuracy},
                     {"test_events", fold.test_report.total}});
  }
  summary["folds"] = folds;

  fs::path dir(out);
  fs::create_directories(dir / "checkpoints");
  write_file(dir / "config.echo", echo);
  write_file(dir / "train_log.jsonl", log.str());
  write_file(dir / "metrics.csv", metrics);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  for (std::size_t k = 0; k < result.folds.size(); ++k) {
    srd::FoldOutcome& fold = result.folds[k];
    fs::path ckpt = dir / "checkpoints" / ("fold_" + std::to_string(k) + ".srd");
    srd::save_checkpoint(ckpt.string(), fold.result.model, fold.config, fold.result.adam,
                         fold.result.best_epoch, fold.vocab_tokens);
  }

  std::cout << "mean accuracy " << srd::format_double(result.mean_accuracy) << " over "
            << result.folds.size() << " folds\n";
  std::cout << "outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_eval(CLI::App* cmd, const std::string& checkpoint, const std::string& data,
             const std::string& deadlines_text, const std::string& out) {
  std::vector<double> deadlines;
  if (cmd->count("--deadlines"))
    deadlines = srd::parse_double_list(deadlines_text, "--deadlines");
  else
    deadlines = {std::numeric_limits<double>::infinity()};

  srd::Checkpoint cp = srd::load_checkpoint(checkpoint);
  std::vector<srd::EventRecord> events = srd::parse_events(data);
  srd::Vocabulary vocab(cp.vocab_tokens);

  std::ostringstream echo;
  echo << "[eval]\n";
  echo << "checkpoint=" << checkpoint << "\n";
  echo << "data=" << data << "\n";
  echo << "deadlines=" << join_doubles(deadlines) << "\n";
  echo << srd::config_echo(cp.config);
  std::cout << echo.str() << std::flush;

  std::vector<srd::EvalReport> curve =
      srd::early_detection_curve(cp.model, events, vocab, deadlines);

  std::vector<srd::ReportRow> rows;
  for (const srd::EvalReport& report : curve)
    rows.push_back({srd::mode_name(cp.config.mode), cp.config.lambda, cp.config.tau, report});
  std::string metrics = srd::reports_csv(rows);

  nlohmann::json summary;
  summary["checkpoint"] = checkpoint;
  summary["data"] = data;
  summary["mode"] = srd::mode_name(cp.config.mode);
  summary["epoch"] = cp.epoch;
  summary["events"] = events.size();
  nlohmann::json points = nlohmann::json::array();
  for (const srd::EvalReport& report : curve)
    points.push_back({{"deadline", srd::format_double(report.deadline)},
                      {"accuracy", report.accuracy}});
  summary["curve"] = points;

  fs::path dir(out);
  fs::create_directories(dir);
  write_file(dir / "config.echo", echo.str());
  write_file(dir / "metrics.csv", metrics);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << "wrote " << (dir / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_sweep(CLI::App* cmd, const TrainFlags& flags, const std::string& data,
              const std::string& lambdas_text, const std::string& taus_text,
              const std::string& out) {
  TrainConfig base = resolve_train_config(cmd, flags);
  std::vector<double> lambdas = srd::parse_double_list(lambdas_text, "--lambdas");
  std::vector<double> taus = srd::parse_double_list(taus_text, "--taus");

  std::ostringstream echo;
  echo << "[sweep]\n";
  echo << "lambdas=" << join_doubles(lambdas) << "\n";
  echo << "taus=" << join_doubles(taus) << "\n";
  echo << srd::config_echo(base);
  std::cout << echo.str() << std::flush;

  std::vector<srd::EventRecord> events = srd::parse_events(data);
  std::string csv = srd::sweep_csv(events, base, lambdas, taus);

  fs::path dir(out);
  fs::create_directories(dir);
  write_file(dir / "config.echo", echo.str());
  write_file(dir / "sweep.csv", csv);
  std::cout << "wrote " << (dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_gradcheck(CLI::App* cmd, std::uint64_t seed_flag, double tol) {
  std::uint64_t seed = cmd->count("--seed") ? seed_flag : env_seed_or(1);
  std::cout << "[gradcheck]\nseed=" << seed << "\ntol=" << srd::format_double(tol) << "\n";

  std::vector<srd::ModeGradCheck> results = srd::run_gradcheck_suite(seed, tol);
  bool all_pass = true;
  for (const srd::ModeGradCheck& r : results) {
    all_pass = all_pass && r.report.pass;
    std::cout << std::left << std::setw(8) << srd::mode_name(r.mode)
              << (r.report.pass ? "PASS" : "FAIL")
              << "  max_err=" << srd::format_double(r.report.max_err)
              << "  worst=" << r.report.worst_param << "\n";
  }
  if (all_pass) {
    std::cout << "all modes pass\n";
    return 0;
  }
  for (const srd::ModeGradCheck& r : results) {
    if (r.report.pass) continue;
    std::vector<srd::GradCheckEntry> entries = r.report.entries;
    std::sort(entries.begin(), entries.end(),
              [](const srd::GradCheckEntry& a, const srd::GradCheckEntry& b) {
                return a.max_err > b.max_err;
              });
    std::size_t shown = std::min<std::size_t>(3, entries.size());
    for (std::size_t i = 0; i < shown; ++i) {
      const srd::GradCheckEntry& e = entries[i];
      std::cout << "  " << srd::mode_name(r.mode) << " " << e.name << "[" << e.worst_index
                << "] err=" << srd::format_double(e.max_err)
                << " analytic=" << srd::format_double(e.analytic)
                << " numeric=" << srd::format_double(e.numeric) << "\n";
    }
  }
  std::cout << "gradient check failed\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rumor detection on propagation trees with self-supervised auxiliaries"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic labeled corpus");
  generate->add_option("--events", gen.events, "event count")->capture_default_str();
  generate->add_option("--classes", gen.classes, "label count")->capture_default_str();
  generate->add_option("--correlation", gen.correlation, "class signal strength in [0,1]")
      ->capture_default_str();
  generate->add_option("--seed", gen.seed, "generator seed");
  generate->add_option("--out", gen.out, "output directory")->required();

  std::string stats_data, stats_out;
  CLI::App* stats = app.add_subcommand("stats", "corpus statistics as csv");
  stats->add_option("--data", stats_data, "events jsonl")->required();
  stats->add_option("--out", stats_out, "optional output directory");

  TrainFlags train_flags;
  std::string train_data, train_out;
  CLI::App* train = app.add_subcommand("train", "k-fold cross-validated training");
  train->add_option("--data", train_data, "events jsonl")->required();
  train->add_option("--out", train_out, "output directory")->required();
  add_train_options(train, train_flags);

  std::string eval_ckpt, eval_data, eval_deadlines, eval_out;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "events jsonl")->required();
  eval->add_option("--deadlines", eval_deadlines,
                   "comma list of observation deadlines in minutes, ascending; inf allowed");
  eval->add_option("--out", eval_out, "output directory")->required();

  TrainFlags sweep_flags;
  std::string sweep_data, sweep_lambdas, sweep_taus, sweep_out;
  CLI::App* sweep = app.add_subcommand("sweep", "grid over lambda and tau");
  sweep->add_option("--data", sweep_data, "events jsonl")->required();
  sweep->add_option("--lambdas", sweep_lambdas, "comma list of lambda values")->required();
  sweep->add_option("--taus", sweep_taus, "comma list of tau values")->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();
  add_train_options(sweep, sweep_flags);

  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every mode");
  gradcheck->add_option("--seed", gc_seed, "event seed");
  gradcheck->add_option("--tol", gc_tol, "relative error tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (generate->parsed()) return cmd_generate(generate, gen);
    if (stats->parsed()) return cmd_stats(stats_data, stats_out);
    if (train->parsed()) return cmd_train(train, train_flags, train_data, train_out);
    if (eval->parsed()) return cmd_eval(eval, eval_ckpt, eval_data, eval_deadlines, eval_out);
    if (sweep->parsed())
      return cmd_sweep(sweep, sweep_flags, sweep_data, sweep_lambdas, sweep_taus, sweep_out);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck, gc_seed, gc_tol);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
