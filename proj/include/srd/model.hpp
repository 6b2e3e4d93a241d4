#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "srd/data.hpp"
#include "srd/graph_encoder.hpp"
#include "srd/rng.hpp"
#include "srd/ssl.hpp"
#include "srd/tensor.hpp"
#include "srd/text_encoder.hpp"

namespace srd {

enum class Mode { kGraphOnly, kTextOnly, kConcat, kPsid, kPscd };

// CLI tokens: graph, text, concat, psid, pscd.
Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);

struct ModelDims {
  std::size_t vocab_size = 0;  // node feature width and embedding rows
  std::size_t classes = 2;
  std::size_t d_graph = 32;
  std::size_t gcn_layers = 2;
  std::size_t d_model = 32;
  std::size_t heads = 4;
  std::size_t seq_len = 16;
  std::vector<std::size_t> conv_windows = {2, 3, 4};
  std::size_t conv_maps = 24;
  std::size_t d_proj = 32;
  std::size_t clusters = 8;

  std::size_t d_text() const { return conv_windows.size() * conv_maps; }

  // The detector reads g, t, or their concatenation depending on the mode.
  std::size_t detector_width(Mode mode) const;

  void validate() const;  // throws std::invalid_argument
};

struct DetectorHead {
  Tensor w;  // detector_width x classes
  Tensor b;  // 1 x classes
};

struct Model {
  ModelDims dims;
  Mode mode = Mode::kPsid;

  GcnParams gcn;
  Tensor embedding;  // vocab_size x d_model, row 0 pinned to zero
  AttentionParams attention;
  ConvParams conv;
  ProjectionHead graph_proj;
  ProjectionHead text_proj;
  ClusterClassifier graph_cluster;
  ClusterClassifier text_cluster;
  DetectorHead detector;

  // k-means state for PSCD, d_proj x K. Not parameters: no gradients.
  Tensor graph_centroids;
  Tensor text_centroids;
  bool centroids_ready = false;
};

// Each tensor draws from its own stream keyed by parameter name, so any two
// modes initialize their shared parameters to identical values.
Model init_model(const ModelDims& dims, Mode mode, std::uint64_t seed);

// Flat parameter list in a fixed order: gcn.w<l>, embedding, attn.q<h>,
// attn.k<h>, attn.v<h>, attn.out, conv.w<i>, conv.b<i>, proj.graph.{w,b},
// proj.text.{w,b}, cluster.graph.{w,b}, cluster.text.{w,b}, detector.{w,b}.
// Modes include only the tensors their losses reach.
std::vector<NamedParam> trainable_params(Model& model, Mode mode);

Tensor graph_representation(Tape& tape, const Model& model, const PropagationGraph& graph);

Tensor text_representation(Tape& tape, const Model& model, const TokenSequence& seq,
                           double dropout_rate, Rng& dropout_rng, bool training);

// Per-event representations stacked into batch matrices. Only the views the
// mode consumes are materialized; the other tensor stays empty.
struct BatchViews {
  Tensor g;  // B x d_graph
  Tensor t;  // B x d_text
};

BatchViews batch_forward(Tape& tape, const Model& model,
                         const std::vector<const FeaturizedEvent*>& batch, Mode mode,
                         double dropout_rate, Rng& dropout_rng, bool training);

Tensor detector_input(Tape& tape, const BatchViews& views, Mode mode);

// Class probabilities, one row per event: softmax(features * W + b).
Tensor predict(Tape& tape, const Tensor& features, const DetectorHead& head);

}  // namespace srd
