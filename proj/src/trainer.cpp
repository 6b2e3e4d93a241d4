#include "srd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace srd {

void TrainConfig::validate() const {
  dims.validate();
  if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
  if (mode == Mode::kPscd && batch_size < dims.clusters)
    throw std::invalid_argument("pscd needs batch_size >= clusters to seed centroids");
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (!(lr_min > 0.0) || !(lr_max > 0.0) || lr_min > lr_max)
    throw std::invalid_argument("need 0 < lr_min <= lr_max");
  if (folds < 2) throw std::invalid_argument("folds must be at least 2");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
}

Tensor main_loss(Tape& tape, const Tensor& probs, const std::vector<int>& labels) {
  if (probs.rows() != labels.size())
    throw std::invalid_argument("main_loss: one label per batch row required");
  Tensor mask(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols())
      throw std::invalid_argument("main_loss: label out of range");
    mask.at(i, y) = 1.0;
  }
  Tensor ones = Tensor::filled(probs.cols(), 1, 1.0);
  Tensor picked = matmul(tape, mul(tape, probs, mask), ones);  // B x 1, true-class probabilities
  return scale(tape, sum_all(tape, log_elem(tape, picked)), -1.0);
}

Tensor total_loss(Tape& tape, const Tensor& main, const Tensor& ssl, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be non-negative");
  return add(tape, main, scale(tape, ssl, lambda));
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max, double lr_min) {
  if (total_steps == 0) throw std::invalid_argument("cosine_lr: zero horizon");
  if (step > total_steps) throw std::invalid_argument("cosine_lr: step beyond horizon");
  double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

void adam_step(const std::vector<NamedParam>& params, AdamState& state, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  state.t += 1;
  double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  for (const NamedParam& p : params) {
    Tensor tensor = p.tensor;
    std::vector<double>& g = tensor.grad();
    std::vector<double>& w = tensor.values();
    AdamMoments& mom = state.moments[p.name];
    if (mom.m.empty()) {
      mom.m.assign(g.size(), 0.0);
      mom.v.assign(g.size(), 0.0);
    }
    if (mom.m.size() != g.size())
      throw std::runtime_error("adam_step: parameter '" + p.name + "' changed shape");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adam_step: non-finite gradient in '" + p.name + "' at index " +
                                 std::to_string(i) + " (" + std::to_string(g[i]) + ")");
      mom.m[i] = kBeta1 * mom.m[i] + (1.0 - kBeta1) * g[i];
      mom.v[i] = kBeta2 * mom.v[i] + (1.0 - kBeta2) * g[i] * g[i];
      w[i] -= lr * (mom.m[i] / bc1) / (std::sqrt(mom.v[i] / bc2) + kEps);
    }
  }
}

void zero_grads(const std::vector<NamedParam>& params) {
  for (const NamedParam& p : params) {
    Tensor tensor = p.tensor;
    tensor.zero_grad();
  }
}

std::vector<FoldSplit> kfold_split(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("kfold_split: need at least 2 folds");
  if (n < folds) throw std::invalid_argument("kfold_split: dataset smaller than fold count");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, "kfold");
  rng.shuffle(order);

  std::vector<FoldSplit> splits;
  std::size_t base = n / folds;
  std::size_t extra = n % folds;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < folds; ++k) {
    std::size_t len = base + (k < extra ? 1 : 0);
    FoldSplit split;
    split.test.assign(order.begin() + pos, order.begin() + pos + len);
    split.train.reserve(n - len);
    for (std::size_t j = 0; j < n; ++j)
      if (j < pos || j >= pos + len) split.train.push_back(order[j]);
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    splits.push_back(std::move(split));
    pos += len;
  }
  return splits;
}

namespace {

TrainConfig checked(TrainConfig config) {
  config.validate();
  return config;
}

// A lone leftover event joins the final batch instead of forming a batch of
// one, which the contrastive loss could not use.
std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
  std::size_t full = n / batch_size;
  std::size_t rem = n % batch_size;
  if (rem == 0) return full;
  if (rem == 1) return full == 0 ? 1 : full;
  return full + 1;
}

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                              std::size_t batch_size) {
  std::size_t count = steps_per_epoch(n, batch_size);
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  ranges.reserve(count);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < count; ++b) {
    std::size_t end = b + 1 == count ? n : std::min(pos + batch_size, n);
    ranges.emplace_back(pos, end);
    pos = end;
  }
  return ranges;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, std::uint64_t fold_seed, std::size_t train_events)
    : config_(checked(config)),
      model_(init_model(config.dims, config.mode, fold_seed)),
      params_(trainable_params(model_, config.mode)),
      shuffle_rng_(make_stream(fold_seed, "train.shuffle")),
      dropout_rng_(make_stream(fold_seed, "train.dropout")),
      kmeans_rng_(make_stream(fold_seed, "train.kmeans")) {
  if (train_events == 0) throw std::invalid_argument("trainer: no training events");
  total_steps_ = steps_per_epoch(train_events, config_.batch_size) * config_.epochs;
}

EpochLog Trainer::train_epoch(const std::vector<const FeaturizedEvent*>& train,
                              const std::vector<const FeaturizedEvent*>& val,
                              std::size_t epoch_index) {
  if (train.empty()) throw std::invalid_argument("train_epoch: no training events");
  const Mode mode = config_.mode;
  const bool psid = mode == Mode::kPsid;
  const bool pscd = mode == Mode::kPscd;
  const std::size_t n = train.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng_.shuffle(order);

  std::vector<double> z1_epoch, z2_epoch;
  std::size_t z_rows = 0;
  double loss_sum = 0.0;
  double main_sum = 0.0;
  double ssl_sum = 0.0;
  double last_lr = 0.0;

  for (auto [begin, end] : batch_ranges(n, config_.batch_size)) {
    std::vector<const FeaturizedEvent*> batch;
    std::vector<int> labels;
    batch.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(train[order[i]]);
      labels.push_back(train[order[i]]->label);
    }

    double lr = cosine_lr(step_, total_steps_, config_.lr_max, config_.lr_min);
    last_lr = lr;
    zero_grads(params_);

    Tape tape;
    BatchViews views =
        batch_forward(tape, model_, batch, mode, config_.dropout, dropout_rng_, true);

    Tensor ssl;
    bool has_ssl = false;
    if (psid || pscd) {
      Tensor z1 = project(tape, views.g, model_.graph_proj);
      Tensor z2 = project(tape, views.t, model_.text_proj);
      if (psid) {
        ssl = psid_loss(tape, z1, z2, config_.tau);
      } else {
        Tensor z1_const = z1.detached();
        Tensor z2_const = z2.detached();
        if (!model_.centroids_ready) {
          if (z1_const.rows() < config_.dims.clusters)
            throw std::runtime_error("pscd: first batch smaller than the cluster count");
          model_.graph_centroids =
              kmeans_init_plusplus(z1_const, config_.dims.clusters, kmeans_rng_);
          model_.text_centroids =
              kmeans_init_plusplus(z2_const, config_.dims.clusters, kmeans_rng_);
          model_.centroids_ready = true;
        }
        std::vector<int> assign1 = kmeans_assign(z1_const, model_.graph_centroids);
        std::vector<int> assign2 = kmeans_assign(z2_const, model_.text_centroids);
        ssl = pscd_loss(tape, z1, z2, model_.graph_cluster, model_.text_cluster, assign1, assign2,
                        config_.dims.clusters);
        z1_epoch.insert(z1_epoch.end(), z1_const.values().begin(), z1_const.values().end());
        z2_epoch.insert(z2_epoch.end(), z2_const.values().begin(), z2_const.values().end());
        z_rows += z1_const.rows();
      }
      has_ssl = true;
    }

    Tensor probs = predict(tape, detector_input(tape, views, mode), model_.detector);
    Tensor main = main_loss(tape, probs, labels);
    Tensor loss = has_ssl ? total_loss(tape, main, ssl, config_.lambda) : main;
    if (!std::isfinite(loss.value()))
      throw std::runtime_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch_index) + ", step " + std::to_string(step_));
    tape.backward(loss);

    if (mode != Mode::kGraphOnly) {
      // Row 0 of the embedding is the pad vector; keep it pinned at zero.
      Tensor embedding = model_.embedding;
      std::vector<double>& g = embedding.grad();
      for (std::size_t j = 0; j < config_.dims.d_model; ++j) g[j] = 0.0;
    }

    adam_step(params_, adam_, lr);
    ++step_;

    loss_sum += loss.value();
    main_sum += main.value();
    if (has_ssl) ssl_sum += ssl.value();
  }

  // One alternating refinement per epoch over everything projected during it;
  // the refreshed centroids stay frozen until the next epoch ends.
  if (pscd && model_.centroids_ready && z_rows > 0) {
    Tensor pts1(z_rows, config_.dims.d_proj, std::move(z1_epoch));
    Tensor pts2(z_rows, config_.dims.d_proj, std::move(z2_epoch));
    std::vector<int> assign1 = kmeans_assign(pts1, model_.graph_centroids);
    model_.graph_centroids = kmeans_update(pts1, assign1, model_.graph_centroids);
    std::vector<int> assign2 = kmeans_assign(pts2, model_.text_centroids);
    model_.text_centroids = kmeans_update(pts2, assign2, model_.text_centroids);
  }

  EpochLog log;
  log.epoch = epoch_index;
  log.loss = loss_sum / static_cast<double>(n);
  log.main = main_sum / static_cast<double>(n);
  log.ssl = ssl_sum / static_cast<double>(n);
  log.lr = last_lr;
  if (!val.empty()) {
    std::vector<int> val_labels;
    val_labels.reserve(val.size());
    for (const FeaturizedEvent* ev : val) val_labels.push_back(ev->label);
    log.val_accuracy = accuracy(predict_labels(model_, val), val_labels);
  }
  return log;
}

TrainResult train_fold(const std::vector<const FeaturizedEvent*>& train_events,
                       const TrainConfig& config, std::uint64_t fold_seed) {
  const std::size_t n = train_events.size();
  if (n < 4) throw std::invalid_argument("train_fold: need at least 4 events");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng carve = make_stream(fold_seed, "train.valsplit");
  carve.shuffle(order);
  std::size_t n_val = std::max<std::size_t>(1, n / 10);
  std::vector<const FeaturizedEvent*> fit, val;
  fit.reserve(n - n_val);
  val.reserve(n_val);
  for (std::size_t i = 0; i < n - n_val; ++i) fit.push_back(train_events[order[i]]);
  for (std::size_t i = n - n_val; i < n; ++i) val.push_back(train_events[order[i]]);

  Trainer trainer(config, fold_seed, fit.size());

  std::vector<std::vector<double>> best_values;
  std::vector<double> best_graph_centroids, best_text_centroids;
  bool best_centroids_ready = false;
  auto snapshot = [&] {
    best_values.clear();
    for (const NamedParam& p : trainer.params()) best_values.push_back(p.tensor.values());
    best_graph_centroids = trainer.model().graph_centroids.values();
    best_text_centroids = trainer.model().text_centroids.values();
    best_centroids_ready = trainer.model().centroids_ready;
  };
  auto restore = [&] {
    for (std::size_t i = 0; i < best_values.size(); ++i) {
      Tensor tensor = trainer.params()[i].tensor;
      tensor.values() = best_values[i];
    }
    trainer.model().graph_centroids.values() = best_graph_centroids;
    trainer.model().text_centroids.values() = best_text_centroids;
    trainer.model().centroids_ready = best_centroids_ready;
  };

  TrainResult result;
  double best_val = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog log = trainer.train_epoch(fit, val, epoch);
    result.log.push_back(log);
    if (log.val_accuracy > best_val) {
      best_val = log.val_accuracy;
      result.best_epoch = epoch;
      since_best = 0;
      snapshot();
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  restore();
  result.best_val_accuracy = best_val;
  result.adam = trainer.adam();
  result.model = std::move(trainer.model());
  return result;
}

KfoldResult run_kfold(const std::vector<EventRecord>& events, const TrainConfig& config) {
  if (events.empty()) throw std::invalid_argument("run_kfold: no events");
  int max_label = 0;
  for (const EventRecord& ev : events) max_label = std::max(max_label, ev.label);
  std::size_t classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);

  std::vector<FoldSplit> splits = kfold_split(events.size(), config.folds, config.seed);
  KfoldResult out;
  out.classes = classes;
  double acc_sum = 0.0;
  for (std::size_t k = 0; k < splits.size(); ++k) {
    std::vector<EventRecord> train_records;
    train_records.reserve(splits[k].train.size());
    for (std::size_t idx : splits[k].train) train_records.push_back(events[idx]);
    Vocabulary vocab = build_vocabulary(train_records);

    TrainConfig fold_config = config;
    fold_config.dims.vocab_size = vocab.size();
    fold_config.dims.classes = classes;

    std::vector<FeaturizedEvent> train_feats, test_feats;
    train_feats.reserve(splits[k].train.size());
    test_feats.reserve(splits[k].test.size());
    for (std::size_t idx : splits[k].train)
      train_feats.push_back(featurize(events[idx], vocab, fold_config.dims.seq_len));
    for (std::size_t idx : splits[k].test)
      test_feats.push_back(featurize(events[idx], vocab, fold_config.dims.seq_len));
    std::vector<const FeaturizedEvent*> train_ptrs, test_ptrs;
    for (const FeaturizedEvent& fe : train_feats) train_ptrs.push_back(&fe);
    for (const FeaturizedEvent& fe : test_feats) test_ptrs.push_back(&fe);

    std::uint64_t fold_seed =
        splitmix64(config.seed ^ fnv1a64("fold." + std::to_string(k)));
    FoldOutcome outcome;
    outcome.result = train_fold(train_ptrs, fold_config, fold_seed);
    outcome.test_report = evaluate_events(outcome.result.model, test_ptrs, classes);
    outcome.test_report.fold_id = static_cast<int>(k);
    outcome.vocab_tokens = vocab.ranked_tokens();
    outcome.config = fold_config;
    acc_sum += outcome.test_report.accuracy;
    out.folds.push_back(std::move(outcome));
  }
  out.mean_accuracy = acc_sum / static_cast<double>(splits.size());
  return out;
}

std::string sweep_csv(const std::vector<EventRecord>& events, const TrainConfig& base,
                      const std::vector<double>& lambdas, const std::vector<double>& taus) {
  if (lambdas.empty() || taus.empty()) throw std::invalid_argument("sweep_csv: empty grid");
  std::vector<ReportRow> rows;
  for (double lambda : lambdas) {
    for (double tau : taus) {
      TrainConfig config = base;
      config.lambda = lambda;
      config.tau = tau;
      KfoldResult result = run_kfold(events, config);
      for (const FoldOutcome& fold : result.folds)
        rows.push_back({mode_name(config.mode), lambda, tau, fold.test_report});
    }
  }
  return reports_csv(rows);
}

// --- checkpointing -------------------------------------------------------

namespace {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
  return json{{"rows", t.rows()}, {"cols", t.cols()}, {"values", t.values()}};
}

void tensor_from_json(const json& j, Tensor tensor, const std::string& what) {
  if (j.at("rows").get<std::size_t>() != tensor.rows() ||
      j.at("cols").get<std::size_t>() != tensor.cols())
    throw std::runtime_error("incompatible checkpoint: shape mismatch for " + what);
  std::vector<double> values = j.at("values").get<std::vector<double>>();
  if (values.size() != tensor.size())
    throw std::runtime_error("incompatible checkpoint: value count mismatch for " + what);
  tensor.values() = std::move(values);
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const TrainConfig& config,
                     const AdamState& adam, std::size_t epoch,
                     const std::vector<std::string>& vocab_tokens) {
  json j;
  j["magic"] = "SRD1";
  j["mode"] = mode_name(config.mode);
  j["epoch"] = epoch;
  j["config"] = json{{"lambda", config.lambda},
                     {"tau", config.tau},
                     {"batch_size", config.batch_size},
                     {"epochs", config.epochs},
                     {"lr_max", config.lr_max},
                     {"lr_min", config.lr_min},
                     {"folds", config.folds},
                     {"patience", config.patience},
                     {"dropout", config.dropout},
                     {"seed", config.seed},
                     {"dims", json{{"vocab_size", config.dims.vocab_size},
                                   {"classes", config.dims.classes},
                                   {"d_graph", config.dims.d_graph},
                                   {"gcn_layers", config.dims.gcn_layers},
                                   {"d_model", config.dims.d_model},
                                   {"heads", config.dims.heads},
                                   {"seq_len", config.dims.seq_len},
                                   {"conv_windows", config.dims.conv_windows},
                                   {"conv_maps", config.dims.conv_maps},
                                   {"d_proj", config.dims.d_proj},
                                   {"clusters", config.dims.clusters}}}};
  j["vocab"] = vocab_tokens;

  json params = json::array();
  for (const NamedParam& p : trainable_params(model, config.mode)) {
    json pj = tensor_to_json(p.tensor);
    pj["name"] = p.name;
    params.push_back(std::move(pj));
  }
  j["params"] = std::move(params);

  json moments = json::array();
  for (const auto& [name, mom] : adam.moments)
    moments.push_back(json{{"name", name}, {"m", mom.m}, {"v", mom.v}});
  j["adam"] = json{{"t", adam.t}, {"moments", std::move(moments)}};

  j["centroids"] = json{{"ready", model.centroids_ready},
                        {"graph", tensor_to_json(model.graph_centroids)},
                        {"text", tensor_to_json(model.text_centroids)}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump() << '\n';
  if (!out.good()) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("magic", "") != "SRD1")
    throw std::runtime_error("incompatible checkpoint: " + path);

  try {
    Checkpoint cp;
    const json& jc = j.at("config");
    const json& jd = jc.at("dims");
    TrainConfig config;
    config.mode = parse_mode(j.at("mode").get<std::string>());
    config.lambda = jc.at("lambda").get<double>();
    config.tau = jc.at("tau").get<double>();
    config.batch_size = jc.at("batch_size").get<std::size_t>();
    config.epochs = jc.at("epochs").get<std::size_t>();
    config.lr_max = jc.at("lr_max").get<double>();
    config.lr_min = jc.at("lr_min").get<double>();
    config.folds = jc.at("folds").get<std::size_t>();
    config.patience = jc.at("patience").get<std::size_t>();
    config.dropout = jc.at("dropout").get<double>();
    config.seed = jc.at("seed").get<std::uint64_t>();
    config.dims.vocab_size = jd.at("vocab_size").get<std::size_t>();
    config.dims.classes = jd.at("classes").get<std::size_t>();
    config.dims.d_graph = jd.at("d_graph").get<std::size_t>();
    config.dims.gcn_layers = jd.at("gcn_layers").get<std::size_t>();
    config.dims.d_model = jd.at("d_model").get<std::size_t>();
    config.dims.heads = jd.at("heads").get<std::size_t>();
    config.dims.seq_len = jd.at("seq_len").get<std::size_t>();
    config.dims.conv_windows = jd.at("conv_windows").get<std::vector<std::size_t>>();
    config.dims.conv_maps = jd.at("conv_maps").get<std::size_t>();
    config.dims.d_proj = jd.at("d_proj").get<std::size_t>();
    config.dims.clusters = jd.at("clusters").get<std::size_t>();
    cp.config = config;
    cp.epoch = j.at("epoch").get<std::size_t>();
    cp.vocab_tokens = j.at("vocab").get<std::vector<std::string>>();

    cp.model = init_model(config.dims, config.mode, config.seed);
    std::map<std::string, Tensor> by_name;
    for (const NamedParam& p : trainable_params(cp.model, config.mode))
      by_name.emplace(p.name, p.tensor);
    std::set<std::string> seen;
    for (const json& pj : j.at("params")) {
      std::string name = pj.at("name").get<std::string>();
      auto it = by_name.find(name);
      if (it == by_name.end())
        throw std::runtime_error("incompatible checkpoint: unknown parameter " + name);
      tensor_from_json(pj, it->second, name);
      seen.insert(name);
    }
    if (seen.size() != by_name.size())
      throw std::runtime_error("incompatible checkpoint: parameters missing");

    const json& ja = j.at("adam");
    cp.adam.t = ja.at("t").get<std::size_t>();
    for (const json& mj : ja.at("moments")) {
      AdamMoments mom;
      mom.m = mj.at("m").get<std::vector<double>>();
      mom.v = mj.at("v").get<std::vector<double>>();
      cp.adam.moments[mj.at("name").get<std::string>()] = std::move(mom);
    }

    const json& jk = j.at("centroids");
    cp.model.centroids_ready = jk.at("ready").get<bool>();
    tensor_from_json(jk.at("graph"), cp.model.graph_centroids, "graph centroids");
    tensor_from_json(jk.at("text"), cp.model.text_centroids, "text centroids");
    return cp;
  } catch (const json::exception& e) {
    throw std::runtime_error("incompatible checkpoint: " + std::string(e.what()));
  }
}

// --- gradient checking over full forward passes --------------------------

std::vector<ModeGradCheck> run_gradcheck_suite(std::uint64_t seed, double tol) {
  ModelDims dims;
  dims.vocab_size = 20;
  dims.classes = 3;
  dims.d_graph = 10;
  dims.gcn_layers = 2;
  dims.d_model = 12;
  dims.heads = 2;
  dims.seq_len = 8;
  dims.conv_windows = {2, 3};
  dims.conv_maps = 4;
  dims.d_proj = 8;
  dims.clusters = 3;
  const std::size_t batch = 4;
  const double tau = 0.7;
  const double lambda = 0.05;

  Rng rng = make_stream(seed, "gradcheck.events");
  std::vector<FeaturizedEvent> events;
  for (std::size_t i = 0; i < batch; ++i) {
    std::size_t n = 3 + i % 3;
    std::vector<std::pair<int, int>> edges;
    for (std::size_t v = 1; v < n; ++v)
      edges.emplace_back(static_cast<int>(v), rng.uniform_int(0, static_cast<int>(v) - 1));
    Tensor features(n, dims.vocab_size);
    for (std::size_t r = 0; r < n; ++r)
      for (int k = 0; k < 4; ++k)
        features.at(r, rng.uniform_int(0, static_cast<int>(dims.vocab_size) - 1)) = 1.0;
    FeaturizedEvent fe;
    fe.event_id = "toy" + std::to_string(i);
    fe.label = rng.uniform_int(0, static_cast<int>(dims.classes) - 1);
    fe.graph = make_propagation_graph(edges, features);
    std::vector<int> ids;
    for (std::size_t s = 0; s < dims.seq_len; ++s)
      ids.push_back(rng.uniform_int(0, static_cast<int>(dims.vocab_size) - 1));
    fe.seq = pad_or_truncate(ids, dims.seq_len);
    events.push_back(std::move(fe));
  }
  std::vector<const FeaturizedEvent*> batch_ptrs;
  std::vector<int> labels;
  for (const FeaturizedEvent& fe : events) {
    batch_ptrs.push_back(&fe);
    labels.push_back(fe.label);
  }
  std::vector<int> assign1, assign2;
  for (std::size_t i = 0; i < batch; ++i) {
    assign1.push_back(rng.uniform_int(0, static_cast<int>(dims.clusters) - 1));
    assign2.push_back(rng.uniform_int(0, static_cast<int>(dims.clusters) - 1));
  }

  std::vector<ModeGradCheck> out;
  for (Mode mode :
       {Mode::kGraphOnly, Mode::kTextOnly, Mode::kConcat, Mode::kPsid, Mode::kPscd}) {
    Model model = init_model(dims, mode, seed);
    std::vector<NamedParam> params = trainable_params(model, mode);
    Rng unused(0);
    auto build = [&, mode](Tape& tape) {
      BatchViews views = batch_forward(tape, model, batch_ptrs, mode, 0.0, unused, false);
      Tensor probs = predict(tape, detector_input(tape, views, mode), model.detector);
      Tensor main = main_loss(tape, probs, labels);
      if (mode == Mode::kPsid) {
        Tensor z1 = project(tape, views.g, model.graph_proj);
        Tensor z2 = project(tape, views.t, model.text_proj);
        return total_loss(tape, main, psid_loss(tape, z1, z2, tau), lambda);
      }
      if (mode == Mode::kPscd) {
        Tensor z1 = project(tape, views.g, model.graph_proj);
        Tensor z2 = project(tape, views.t, model.text_proj);
        Tensor ssl = pscd_loss(tape, z1, z2, model.graph_cluster, model.text_cluster, assign1,
                               assign2, dims.clusters);
        return total_loss(tape, main, ssl, lambda);
      }
      return main;
    };
    out.push_back({mode, grad_check(build, params, 1e-5, tol)});
  }
  return out;
}

}  // namespace srd
