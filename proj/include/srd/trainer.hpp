#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "srd/eval.hpp"
#include "srd/model.hpp"

namespace srd {

struct TrainConfig {
  ModelDims dims;
  Mode mode = Mode::kPsid;
  double lambda = 0.01;
  double tau = 0.5;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  double lr_max = 0.001;
  double lr_min = 0.00001;
  std::size_t folds = 5;
  // Epochs without validation improvement before stopping; 0 disables.
  std::size_t patience = 20;
  double dropout = 0.2;
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument
};

// -sum_i log probs[i, labels[i]] over the batch.
Tensor main_loss(Tape& tape, const Tensor& probs, const std::vector<int>& labels);

// main + lambda * ssl; exact identity with main at lambda = 0.
Tensor total_loss(Tape& tape, const Tensor& main, const Tensor& ssl, double lambda);

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max, double lr_min);

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamState {
  std::map<std::string, AdamMoments> moments;
  std::size_t t = 0;
};

// In-place bias-corrected update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
// Rejects non-finite gradients with the offending parameter named.
void adam_step(const std::vector<NamedParam>& params, AdamState& state, double lr);

void zero_grads(const std::vector<NamedParam>& params);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Disjoint near-equal test folds covering every index exactly once.
std::vector<FoldSplit> kfold_split(std::size_t n, std::size_t folds, std::uint64_t seed);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;  // per-event means
  double main = 0.0;
  double ssl = 0.0;
  double lr = 0.0;  // rate applied at the epoch's last step
  double val_accuracy = 0.0;
};

// One fold's training state: model, optimizer, and the named random streams.
// The shuffle, dropout, and clustering streams are independent, so modes that
// skip a stream leave the others unperturbed.
class Trainer {
 public:
  Trainer(const TrainConfig& config, std::uint64_t fold_seed, std::size_t train_events);

  EpochLog train_epoch(const std::vector<const FeaturizedEvent*>& train,
                       const std::vector<const FeaturizedEvent*>& val, std::size_t epoch_index);

  Model& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  std::vector<NamedParam>& params() { return params_; }
  AdamState& adam() { return adam_; }
  std::size_t step() const { return step_; }
  std::size_t total_steps() const { return total_steps_; }

 private:
  TrainConfig config_;
  Model model_;
  std::vector<NamedParam> params_;
  AdamState adam_;
  Rng shuffle_rng_;
  Rng dropout_rng_;
  Rng kmeans_rng_;
  std::size_t step_ = 0;
  std::size_t total_steps_ = 0;
};

struct TrainResult {
  Model model;  // restored to the best validation snapshot
  AdamState adam;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

// Carves a validation split (one tenth, at least one event) off the training
// events, trains with early stopping, restores the best snapshot.
TrainResult train_fold(const std::vector<const FeaturizedEvent*>& train_events,
                       const TrainConfig& config, std::uint64_t fold_seed);

struct FoldOutcome {
  TrainResult result;
  EvalReport test_report;
  std::vector<std::string> vocab_tokens;
  TrainConfig config;  // fold-resolved: vocab_size and classes filled in
};

struct KfoldResult {
  std::vector<FoldOutcome> folds;
  double mean_accuracy = 0.0;
  std::size_t classes = 0;
};

// Full protocol: per fold, build the vocabulary from that fold's training
// events only, featurize, train, evaluate on the held-out fold.
KfoldResult run_kfold(const std::vector<EventRecord>& events, const TrainConfig& config);

// One row per (lambda, tau) pair per fold, deterministic ordering.
std::string sweep_csv(const std::vector<EventRecord>& events, const TrainConfig& base,
                      const std::vector<double>& lambdas, const std::vector<double>& taus);

// --- checkpointing -------------------------------------------------------

struct Checkpoint {
  Model model;
  TrainConfig config;
  AdamState adam;
  std::size_t epoch = 0;
  std::vector<std::string> vocab_tokens;
};

void save_checkpoint(const std::string& path, Model& model, const TrainConfig& config,
                     const AdamState& adam, std::size_t epoch,
                     const std::vector<std::string>& vocab_tokens);

// Rejects anything without the "SRD1" magic or with mismatched shapes.
Checkpoint load_checkpoint(const std::string& path);

// --- gradient checking over full forward passes --------------------------

struct ModeGradCheck {
  Mode mode;
  GradCheckReport report;
};

// Finite-difference validation of every mode's complete loss at small
// dimensions; batch of 4 toy events, dropout off, cluster assignments frozen.
std::vector<ModeGradCheck> run_gradcheck_suite(std::uint64_t seed, double tol);

}  // namespace srd
