// End-to-end acceptance suite. Each criterion prints exactly one PASS/FAIL
// line; the process exits 0 only if every criterion passes. Tolerances and
// limits are pinned as constants below.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "srd/config.hpp"
#include "srd/data.hpp"
#include "srd/eval.hpp"
#include "srd/model.hpp"
#include "srd/ssl.hpp"
#include "srd/trainer.hpp"

namespace fs = std::filesystem;
using namespace srd;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradTimeLimit = 60.0;
constexpr double kAnalyticTol = 1e-10;
constexpr double kInvarianceTol = 1e-12;
constexpr double kOracleTol = 1e-12;
constexpr double kOrderingSlack = 0.02;
constexpr double kPsidFloor = 0.80;
constexpr double kSyntheticTimeLimit = 900.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), pattern, v);
  return buffer;
}

bool same_doubles(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// --- 1: finite-difference gradients for every mode ------------------------

Outcome criterion_gradients() {
  auto start = std::chrono::steady_clock::now();
  std::vector<ModeGradCheck> results = run_gradcheck_suite(1, kGradTol);
  double elapsed = seconds_since(start);

  bool all_pass = true;
  double worst = 0.0;
  std::string worst_mode;
  for (const ModeGradCheck& r : results) {
    all_pass = all_pass && r.report.pass;
    if (r.report.max_err > worst) {
      worst = r.report.max_err;
      worst_mode = mode_name(r.mode);
    }
  }
  Outcome out;
  out.pass = all_pass && results.size() == 5 && elapsed < kGradTimeLimit;
  out.detail = "5 modes, max rel err " + fmt("%.2e", worst) + " (" + worst_mode +
               ", tol 1e-4), " + fmt("%.1f", elapsed) + "s (limit 60s)";
  return out;
}

// --- 2: closed-form loss values -------------------------------------------

Outcome criterion_analytic() {
  Outcome out;
  std::ostringstream detail;

  Tape tape;
  Tensor z1 = Tensor::from_rows({{1.0, 0.0}, {1.0, 0.0}});
  Tensor z2 = Tensor::from_rows({{0.0, 1.0}, {0.0, 1.0}});
  double psid = psid_loss(tape, z1, z2, 0.5).value();
  double psid_want = 2.0 * std::log(2.0);
  bool psid_ok = std::abs(psid - psid_want) <= kAnalyticTol;

  ClusterClassifier f1{Tensor::filled(2, 3, 0.0), Tensor::filled(1, 3, 0.0)};
  ClusterClassifier f2{Tensor::filled(2, 3, 0.0), Tensor::filled(1, 3, 0.0)};
  double pscd =
      pscd_loss(tape, z1, z2, f1, f2, {0, 2}, {1, 0}, 3).value() / 4.0;
  double pscd_want = std::log(3.0);
  bool pscd_ok = std::abs(pscd - pscd_want) <= kAnalyticTol;

  Tensor probs = Tensor::filled(3, 4, 0.25);
  double main = main_loss(tape, probs, {0, 1, 2}).value();
  double main_want = 3.0 * std::log(4.0);
  bool main_ok = std::abs(main - main_want) <= kAnalyticTol;

  out.pass = psid_ok && pscd_ok && main_ok;
  detail << "uniform psid |err| " << fmt("%.1e", std::abs(psid - psid_want))
         << ", zero-logit pscd per term |err| " << fmt("%.1e", std::abs(pscd - pscd_want))
         << ", uniform main |err| " << fmt("%.1e", std::abs(main - main_want))
         << " (tol 1e-10)";
  out.detail = detail.str();
  return out;
}

// --- 3: alternating k-means never increases its objective -----------------

Outcome criterion_kmeans() {
  Rng rng = make_stream(11, "acceptance.kmeans");
  const std::size_t n = 200, d = 6, k = 8;
  Tensor points(n, d);
  for (double& v : points.values()) v = rng.uniform(-1.0, 1.0);

  Tensor centroids = kmeans_init_plusplus(points, k, rng);
  std::vector<int> assign = kmeans_assign(points, centroids);
  double objective = kmeans_objective(points, centroids, assign);
  double first = objective;

  bool monotone = true;
  for (int round = 0; round < 10; ++round) {
    centroids = kmeans_update(points, assign, centroids);
    double after_update = kmeans_objective(points, centroids, assign);
    monotone = monotone && after_update <= objective;
    assign = kmeans_assign(points, centroids);
    double after_assign = kmeans_objective(points, centroids, assign);
    monotone = monotone && after_assign <= after_update;
    objective = after_assign;
  }

  Outcome out;
  out.pass = monotone;
  out.detail = "10 rounds on 200 points, objective " + fmt("%.4f", first) + " -> " +
               fmt("%.4f", objective) + ", every half-step exact non-increase";
  return out;
}

// --- 4: readout is invariant under node relabeling ------------------------

Outcome criterion_permutation() {
  Rng rng = make_stream(13, "acceptance.permutation");
  const std::size_t d0 = 7, d1 = 9, d2 = 6;
  double worst = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    int n = rng.uniform_int(2, 12);
    std::vector<std::pair<int, int>> edges = oracle::random_tree(rng, n);
    Tensor features(n, d0);
    for (double& v : features.values()) v = rng.uniform(-1.0, 1.0);

    GcnParams params;
    params.weights.push_back(Tensor(d0, d1));
    params.weights.push_back(Tensor(d1, d2));
    for (Tensor& w : params.weights)
      for (double& v : w.values()) v = rng.uniform(-0.7, 0.7);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);

    std::vector<std::pair<int, int>> perm_edges;
    for (auto [c, p] : edges) perm_edges.push_back({perm[c], perm[p]});
    Tensor perm_features(n, d0);
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d0; ++j)
        perm_features.at(perm[i], j) = features.at(i, j);

    Tape tape;
    Tensor g = readout_mean(tape, gcn_forward(tape, make_propagation_graph(edges, features),
                                              params));
    Tensor g_perm = readout_mean(
        tape, gcn_forward(tape, make_propagation_graph(perm_edges, perm_features), params));
    for (std::size_t j = 0; j < d2; ++j)
      worst = std::max(worst, std::abs(g.at(0, j) - g_perm.at(0, j)));
  }

  Outcome out;
  out.pass = worst <= kInvarianceTol;
  out.detail = "100 relabelings up to 12 nodes, max |delta| " + fmt("%.1e", worst) +
               " (tol 1e-12)";
  return out;
}

// --- 5: encoders match straight-loop oracles ------------------------------

Outcome criterion_oracles() {
  Rng rng = make_stream(17, "acceptance.oracles");
  double worst_gcn = 0.0;

  for (int trial = 0; trial < 50; ++trial) {
    int n = rng.uniform_int(2, 10);
    std::size_t d0 = static_cast<std::size_t>(rng.uniform_int(3, 8));
    std::size_t d1 = static_cast<std::size_t>(rng.uniform_int(2, 6));
    std::size_t d2 = static_cast<std::size_t>(rng.uniform_int(2, 6));
    std::vector<std::pair<int, int>> edges = oracle::random_tree(rng, n);

    Tensor features(n, d0);
    oracle::Mat h0 = oracle::zeros(n, d0);
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d0; ++j) h0[i][j] = features.at(i, j) = rng.uniform(-1.0, 1.0);

    GcnParams params;
    params.weights.push_back(Tensor(d0, d1));
    params.weights.push_back(Tensor(d1, d2));
    std::vector<oracle::Mat> weights = {oracle::zeros(d0, d1), oracle::zeros(d1, d2)};
    for (int layer = 0; layer < 2; ++layer)
      for (std::size_t i = 0; i < params.weights[layer].rows(); ++i)
        for (std::size_t j = 0; j < params.weights[layer].cols(); ++j)
          weights[layer][i][j] = params.weights[layer].at(i, j) = rng.uniform(-0.8, 0.8);

    Tape tape;
    Tensor h = gcn_forward(tape, make_propagation_graph(edges, features), params);
    oracle::Mat want =
        oracle::gcn(oracle::normalized_adjacency(edges, n), h0, weights);
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d2; ++j)
        worst_gcn = std::max(worst_gcn, std::abs(h.at(i, j) - want[i][j]));
  }

  double worst_attn = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t L = static_cast<std::size_t>(rng.uniform_int(2, 8));
    std::size_t heads = static_cast<std::size_t>(rng.uniform_int(1, 3));
    std::size_t d_head = static_cast<std::size_t>(rng.uniform_int(2, 4));
    std::size_t d_model = static_cast<std::size_t>(rng.uniform_int(3, 8));

    Tensor x(L, d_model);
    oracle::Mat xo = oracle::zeros(L, d_model);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < d_model; ++j) xo[i][j] = x.at(i, j) = rng.uniform(-1.0, 1.0);

    AttentionParams params;
    std::vector<oracle::Mat> wq, wk, wv;
    for (std::size_t head = 0; head < heads; ++head) {
      Tensor q(d_model, d_head), k(d_model, d_head), v(d_model, d_head);
      oracle::Mat qo = oracle::zeros(d_model, d_head), ko = qo, vo = qo;
      for (std::size_t i = 0; i < d_model; ++i)
        for (std::size_t j = 0; j < d_head; ++j) {
          qo[i][j] = q.at(i, j) = rng.uniform(-1.0, 1.0);
          ko[i][j] = k.at(i, j) = rng.uniform(-1.0, 1.0);
          vo[i][j] = v.at(i, j) = rng.uniform(-1.0, 1.0);
        }
      params.w_query.push_back(q);
      params.w_key.push_back(k);
      params.w_value.push_back(v);
      wq.push_back(qo);
      wk.push_back(ko);
      wv.push_back(vo);
    }
    Tensor out_w(heads * d_head, d_model);
    oracle::Mat wo = oracle::zeros(heads * d_head, d_model);
    for (std::size_t i = 0; i < heads * d_head; ++i)
      for (std::size_t j = 0; j < d_model; ++j)
        wo[i][j] = out_w.at(i, j) = rng.uniform(-1.0, 1.0);
    params.w_out = out_w;

    Tape tape;
    Tensor z = self_attention(tape, x, params);
    oracle::Mat want = oracle::attention(xo, wq, wk, wv, wo);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < d_model; ++j)
        worst_attn = std::max(worst_attn, std::abs(z.at(i, j) - want[i][j]));
  }

  Outcome out;
  out.pass = worst_gcn <= kOracleTol && worst_attn <= kOracleTol;
  out.detail = "50 instances each, gcn max |delta| " + fmt("%.1e", worst_gcn) +
               ", attention max |delta| " + fmt("%.1e", worst_attn) + " (tol 1e-12)";
  return out;
}

// --- 6 and 7 share one training sweep -------------------------------------

TrainConfig synthetic_config() {
  TrainConfig config;
  config.dims.d_graph = 32;
  config.dims.gcn_layers = 2;
  config.dims.d_model = 32;
  config.dims.heads = 4;
  config.dims.seq_len = 16;
  config.dims.conv_windows = {2, 3, 4};
  config.dims.conv_maps = 24;
  config.dims.d_proj = 32;
  config.dims.clusters = 8;
  config.lambda = 0.2;
  config.tau = 0.5;
  config.batch_size = 32;
  config.epochs = 30;
  config.lr_max = 0.005;
  config.lr_min = 0.0001;
  config.folds = 5;
  config.patience = 8;
  config.dropout = 0.2;
  config.seed = 7;
  return config;
}

struct SyntheticState {
  bool ready = false;
  std::vector<EventRecord> events;
  TrainConfig config;
  std::map<Mode, KfoldResult> results;
  double elapsed = 0.0;
};

Outcome criterion_synthetic_ordering(SyntheticState& state) {
  auto start = std::chrono::steady_clock::now();
  state.events = generate_synthetic(400, 4, 0.8, 7);
  state.config = synthetic_config();
  for (Mode mode : {Mode::kPsid, Mode::kConcat, Mode::kGraphOnly, Mode::kTextOnly}) {
    TrainConfig config = state.config;
    config.mode = mode;
    state.results.emplace(mode, run_kfold(state.events, config));
  }
  state.elapsed = seconds_since(start);
  state.ready = true;

  double psid = state.results.at(Mode::kPsid).mean_accuracy;
  double concat = state.results.at(Mode::kConcat).mean_accuracy;
  double graph = state.results.at(Mode::kGraphOnly).mean_accuracy;
  double text = state.results.at(Mode::kTextOnly).mean_accuracy;

  bool ordering = psid >= concat && concat >= std::max(graph, text) - kOrderingSlack;
  bool floor = psid >= kPsidFloor;
  bool in_time = state.elapsed < kSyntheticTimeLimit;

  Outcome out;
  out.pass = ordering && floor && in_time;
  out.detail = "5-fold means: psid " + fmt("%.4f", psid) + ", concat " + fmt("%.4f", concat) +
               ", graph " + fmt("%.4f", graph) + ", text " + fmt("%.4f", text) + "; " +
               fmt("%.0f", state.elapsed) + "s (limit 900s)";
  return out;
}

bool reports_identical(const EvalReport& a, const EvalReport& b) {
  return a.accuracy == b.accuracy && a.total == b.total && a.confusion == b.confusion &&
         a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1 &&
         a.f1_defined == b.f1_defined;
}

Outcome criterion_early_detection(const SyntheticState& state) {
  Outcome out;
  if (!state.ready) {
    out.detail = "skipped: synthetic training unavailable";
    return out;
  }

  std::vector<FoldSplit> splits =
      kfold_split(state.events.size(), state.config.folds, state.config.seed);

  double graph_at_zero = 0.0, graph_at_inf = 0.0;
  const KfoldResult& graph_runs = state.results.at(Mode::kGraphOnly);
  for (std::size_t k = 0; k < splits.size(); ++k) {
    std::vector<EventRecord> test;
    for (std::size_t idx : splits[k].test) test.push_back(state.events[idx]);
    Vocabulary vocab(graph_runs.folds[k].vocab_tokens);
    std::vector<EvalReport> curve =
        early_detection_curve(graph_runs.folds[k].result.model, test, vocab,
                              {0.0, std::numeric_limits<double>::infinity()});
    graph_at_zero += curve[0].accuracy;
    graph_at_inf += curve[1].accuracy;
  }
  graph_at_zero /= static_cast<double>(splits.size());
  graph_at_inf /= static_cast<double>(splits.size());
  bool graph_gains = graph_at_inf > graph_at_zero;

  bool text_invariant = true;
  const KfoldResult& text_runs = state.results.at(Mode::kTextOnly);
  for (std::size_t k = 0; k < splits.size(); ++k) {
    std::vector<EventRecord> test;
    for (std::size_t idx : splits[k].test) test.push_back(state.events[idx]);
    Vocabulary vocab(text_runs.folds[k].vocab_tokens);
    std::vector<EvalReport> curve = early_detection_curve(
        text_runs.folds[k].result.model, test, vocab,
        {0.0, 30.0, 120.0, std::numeric_limits<double>::infinity()});
    for (std::size_t i = 0; i + 1 < curve.size(); ++i)
      text_invariant = text_invariant && reports_identical(curve[i], curve.back());
  }

  out.pass = graph_gains && text_invariant;
  out.detail = "graph acc " + fmt("%.4f", graph_at_zero) + " at deadline 0 -> " +
               fmt("%.4f", graph_at_inf) + " at inf; text reports " +
               (text_invariant ? "exactly deadline-invariant" : "NOT deadline-invariant");
  return out;
}

// --- 8: psid at lambda zero degenerates to graph-only ---------------------

Outcome criterion_lambda_degeneration() {
  std::vector<EventRecord> events = generate_synthetic(48, 2, 1.0, 21);
  Vocabulary vocab = build_vocabulary(events);

  TrainConfig base;
  base.dims.vocab_size = vocab.size();
  base.dims.classes = 2;
  base.dims.d_graph = 8;
  base.dims.d_model = 8;
  base.dims.heads = 2;
  base.dims.seq_len = 8;
  base.dims.conv_windows = {2, 3};
  base.dims.conv_maps = 3;
  base.dims.d_proj = 6;
  base.dims.clusters = 3;
  base.batch_size = 8;
  base.epochs = 4;
  base.patience = 0;
  base.lr_max = 0.005;
  base.lr_min = 0.0001;
  base.dropout = 0.2;
  base.seed = 21;

  std::vector<FeaturizedEvent> feats;
  for (const EventRecord& ev : events) feats.push_back(featurize(ev, vocab, base.dims.seq_len));
  std::vector<const FeaturizedEvent*> train, val;
  for (std::size_t i = 0; i < 40; ++i) train.push_back(&feats[i]);
  for (std::size_t i = 40; i < feats.size(); ++i) val.push_back(&feats[i]);

  TrainConfig graph_config = base;
  graph_config.mode = Mode::kGraphOnly;
  TrainConfig psid_config = base;
  psid_config.mode = Mode::kPsid;
  psid_config.lambda = 0.0;

  Trainer graph_trainer(graph_config, 777, train.size());
  Trainer psid_trainer(psid_config, 777, train.size());

  bool identical = true;
  for (std::size_t epoch = 0; epoch < base.epochs; ++epoch) {
    graph_trainer.train_epoch(train, val, epoch);
    psid_trainer.train_epoch(train, val, epoch);
    Model& g = graph_trainer.model();
    Model& p = psid_trainer.model();
    identical = identical && same_doubles(g.detector.w.values(), p.detector.w.values());
    identical = identical && same_doubles(g.detector.b.values(), p.detector.b.values());
    for (std::size_t layer = 0; layer < g.gcn.weights.size(); ++layer)
      identical = identical &&
                  same_doubles(g.gcn.weights[layer].values(), p.gcn.weights[layer].values());
  }

  // Direct zero-gradient proof on one fresh batch at lambda = 0.
  Model& model = psid_trainer.model();
  std::vector<NamedParam> params = psid_trainer.params();
  zero_grads(params);
  std::vector<const FeaturizedEvent*> batch(train.begin(), train.begin() + 8);
  std::vector<int> labels;
  for (const FeaturizedEvent* fe : batch) labels.push_back(fe->label);

  Tape tape;
  Rng unused(0);
  BatchViews views = batch_forward(tape, model, batch, Mode::kPsid, 0.0, unused, false);
  Tensor ssl = psid_loss(tape, project(tape, views.g, model.graph_proj),
                         project(tape, views.t, model.text_proj), psid_config.tau);
  Tensor probs = predict(tape, detector_input(tape, views, Mode::kPsid), model.detector);
  Tensor loss = total_loss(tape, main_loss(tape, probs, labels), ssl, 0.0);
  tape.backward(loss);

  bool text_grads_zero = true;
  std::size_t text_params = 0;
  for (const NamedParam& p : params) {
    bool graph_side = p.name.rfind("gcn.", 0) == 0 || p.name.rfind("detector.", 0) == 0;
    if (graph_side) continue;
    ++text_params;
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) text_grads_zero = text_grads_zero && g == 0.0;
  }

  Outcome out;
  out.pass = identical && text_grads_zero && text_params > 0;
  out.detail = std::to_string(base.epochs) +
               " epochs bit-identical detector and gcn trajectories; " +
               std::to_string(text_params) + " text-side tensors with exactly zero gradients";
  return out;
}

// --- 9: the train command is byte deterministic ---------------------------

std::string cli_binary() {
  const char* env = std::getenv("SRD_CLI_PATH");
  if (env != nullptr && *env != '\0') return env;
  return SRD_CLI_BIN;
}

int run_command(const std::string& command) {
  int status = std::system(command.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Outcome criterion_determinism() {
  fs::path dir = fs::temp_directory_path() / "srd_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::vector<EventRecord> events = generate_synthetic(400, 4, 0.8, 7);
  fs::path corpus = dir / "corpus.jsonl";
  write_events(events, corpus.string());

  std::string flags =
      " --mode psid --folds 5 --epochs 30 --patience 8 --batch-size 32 --d-graph 32"
      " --gcn-layers 2 --d-model 32 --heads 4 --seq-len 16 --conv-windows 2,3,4"
      " --conv-maps 24 --d-proj 32 --clusters 8 --lr-max 0.005 --lr-min 0.0001"
      " --dropout 0.2 --lambda 0.2 --tau 0.5 --seed 7";
  std::string base = cli_binary() + " train --data " + corpus.string() + flags;

  int first = run_command(base + " --out " + (dir / "run_a").string() + " > " +
                          (dir / "run_a.log").string() + " 2>&1");
  int second = run_command(base + " --out " + (dir / "run_b").string() + " > " +
                           (dir / "run_b.log").string() + " 2>&1");

  Outcome out;
  if (first != 0 || second != 0) {
    out.detail = "cmd_train exits " + std::to_string(first) + " and " + std::to_string(second);
    return out;
  }
  std::string metrics_a = slurp(dir / "run_a/metrics.csv");
  std::string metrics_b = slurp(dir / "run_b/metrics.csv");
  bool identical = !metrics_a.empty() && metrics_a == metrics_b;
  out.pass = identical;
  out.detail = "two cmd_train runs, metrics.csv " +
               std::string(identical ? "byte-identical" : "DIFFERS") + " (" +
               std::to_string(metrics_a.size()) + " bytes)";
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    Outcome outcome;
  };
  std::vector<Criterion> ledger;

  auto run = [&ledger](const std::string& name, auto&& body) {
    Outcome outcome;
    try {
      outcome = body();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    ledger.push_back({name, outcome});
    std::printf("[%zu/9] %-22s %s  %s\n", ledger.size(), name.c_str(),
                outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str());
    std::fflush(stdout);
  };

  SyntheticState synth;
  run("gradient correctness", criterion_gradients);
  run("analytic loss values", criterion_analytic);
  run("k-means monotonicity", criterion_kmeans);
  run("permutation invariance", criterion_permutation);
  run("oracle equivalence", criterion_oracles);
  run("synthetic ordering", [&synth] { return criterion_synthetic_ordering(synth); });
  run("early detection", [&synth] { return criterion_early_detection(synth); });
  run("lambda degeneration", criterion_lambda_degeneration);
  run("determinism", criterion_determinism);

  std::size_t passed = 0;
  for (const Criterion& c : ledger) passed += c.outcome.pass ? 1 : 0;
  std::printf("acceptance: %zu/9 criteria pass\n", passed);
  return passed == ledger.size() ? 0 : 1;
}
