#include "srd/model.hpp"

#include <cmath>
#include <stdexcept>

namespace srd {

Mode parse_mode(const std::string& name) {
  if (name == "graph") return Mode::kGraphOnly;
  if (name == "text") return Mode::kTextOnly;
  if (name == "concat") return Mode::kConcat;
  if (name == "psid") return Mode::kPsid;
  if (name == "pscd") return Mode::kPscd;
  throw std::invalid_argument("unknown mode '" + name +
                              "' (expected graph|text|concat|psid|pscd)");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kGraphOnly: return "graph";
    case Mode::kTextOnly: return "text";
    case Mode::kConcat: return "concat";
    case Mode::kPsid: return "psid";
    case Mode::kPscd: return "pscd";
  }
  throw std::logic_error("unreachable mode");
}

std::size_t ModelDims::detector_width(Mode mode) const {
  switch (mode) {
    case Mode::kTextOnly: return d_text();
    case Mode::kConcat: return d_graph + d_text();
    default: return d_graph;
  }
}

void ModelDims::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be at least 2");
  if (classes < 2) throw std::invalid_argument("classes must be at least 2");
  if (d_graph == 0 || d_model == 0 || d_proj == 0 || conv_maps == 0)
    throw std::invalid_argument("model widths must be positive");
  if (gcn_layers == 0) throw std::invalid_argument("gcn_layers must be positive");
  if (heads == 0 || d_model % heads != 0)
    throw std::invalid_argument("heads must divide d_model");
  if (conv_windows.empty()) throw std::invalid_argument("conv_windows must be non-empty");
  for (std::size_t w : conv_windows)
    if (w == 0 || w > seq_len)
      throw std::invalid_argument("conv window sizes must lie in [1, seq_len]");
  if (clusters < 2) throw std::invalid_argument("clusters must be at least 2");
}

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, std::uint64_t seed, const std::string& name) {
  Rng rng = make_stream(seed, "init." + name);
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  t.set_requires_grad(true);
  return t;
}

Tensor zeros_param(std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

Model init_model(const ModelDims& dims, Mode mode, std::uint64_t seed) {
  dims.validate();
  Model m;
  m.dims = dims;
  m.mode = mode;

  std::size_t in = dims.vocab_size;
  for (std::size_t l = 0; l < dims.gcn_layers; ++l) {
    m.gcn.weights.push_back(xavier(in, dims.d_graph, seed, "gcn.w" + std::to_string(l)));
    in = dims.d_graph;
  }

  {
    Rng rng = make_stream(seed, "init.embedding");
    Tensor e(dims.vocab_size, dims.d_model);
    for (double& v : e.values()) v = rng.uniform(-0.1, 0.1);
    for (std::size_t j = 0; j < dims.d_model; ++j) e.at(0, j) = 0.0;
    e.set_requires_grad(true);
    m.embedding = e;
  }

  std::size_t d_head = dims.d_model / dims.heads;
  for (std::size_t h = 0; h < dims.heads; ++h) {
    std::string suffix = std::to_string(h);
    m.attention.w_query.push_back(xavier(dims.d_model, d_head, seed, "attn.q" + suffix));
    m.attention.w_key.push_back(xavier(dims.d_model, d_head, seed, "attn.k" + suffix));
    m.attention.w_value.push_back(xavier(dims.d_model, d_head, seed, "attn.v" + suffix));
  }
  m.attention.w_out = xavier(dims.heads * d_head, dims.d_model, seed, "attn.out");

  m.conv.windows = dims.conv_windows;
  for (std::size_t i = 0; i < dims.conv_windows.size(); ++i) {
    m.conv.filters.push_back(xavier(dims.conv_windows[i] * dims.d_model, dims.conv_maps, seed,
                                    "conv.w" + std::to_string(i)));
    m.conv.bias.push_back(zeros_param(1, dims.conv_maps));
  }

  m.graph_proj = {xavier(dims.d_graph, dims.d_proj, seed, "proj.graph.w"),
                  zeros_param(1, dims.d_proj)};
  m.text_proj = {xavier(dims.d_text(), dims.d_proj, seed, "proj.text.w"),
                 zeros_param(1, dims.d_proj)};
  m.graph_cluster = {xavier(dims.d_proj, dims.clusters, seed, "cluster.graph.w"),
                     zeros_param(1, dims.clusters)};
  m.text_cluster = {xavier(dims.d_proj, dims.clusters, seed, "cluster.text.w"),
                    zeros_param(1, dims.clusters)};

  m.detector = {xavier(dims.detector_width(mode), dims.classes, seed, "detector.w"),
                zeros_param(1, dims.classes)};

  m.graph_centroids = Tensor(dims.d_proj, dims.clusters);
  m.text_centroids = Tensor(dims.d_proj, dims.clusters);
  return m;
}

std::vector<NamedParam> trainable_params(Model& model, Mode mode) {
  bool graph = mode != Mode::kTextOnly;
  bool text = mode != Mode::kGraphOnly;
  bool ssl = mode == Mode::kPsid || mode == Mode::kPscd;

  std::vector<NamedParam> params;
  if (graph) {
    for (std::size_t l = 0; l < model.gcn.weights.size(); ++l)
      params.push_back({"gcn.w" + std::to_string(l), model.gcn.weights[l]});
  }
  if (text) {
    params.push_back({"embedding", model.embedding});
    for (std::size_t h = 0; h < model.attention.heads(); ++h) {
      std::string suffix = std::to_string(h);
      params.push_back({"attn.q" + suffix, model.attention.w_query[h]});
      params.push_back({"attn.k" + suffix, model.attention.w_key[h]});
      params.push_back({"attn.v" + suffix, model.attention.w_value[h]});
    }
    params.push_back({"attn.out", model.attention.w_out});
    for (std::size_t i = 0; i < model.conv.filters.size(); ++i) {
      params.push_back({"conv.w" + std::to_string(i), model.conv.filters[i]});
      params.push_back({"conv.b" + std::to_string(i), model.conv.bias[i]});
    }
  }
  if (ssl) {
    params.push_back({"proj.graph.w", model.graph_proj.w});
    params.push_back({"proj.graph.b", model.graph_proj.b});
    params.push_back({"proj.text.w", model.text_proj.w});
    params.push_back({"proj.text.b", model.text_proj.b});
  }
  if (mode == Mode::kPscd) {
    params.push_back({"cluster.graph.w", model.graph_cluster.w});
    params.push_back({"cluster.graph.b", model.graph_cluster.b});
    params.push_back({"cluster.text.w", model.text_cluster.w});
    params.push_back({"cluster.text.b", model.text_cluster.b});
  }
  params.push_back({"detector.w", model.detector.w});
  params.push_back({"detector.b", model.detector.b});
  return params;
}

Tensor graph_representation(Tape& tape, const Model& model, const PropagationGraph& graph) {
  return readout_mean(tape, gcn_forward(tape, graph, model.gcn));
}

Tensor text_representation(Tape& tape, const Model& model, const TokenSequence& seq,
                           double dropout_rate, Rng& dropout_rng, bool training) {
  return text_forward(tape, seq, model.embedding, model.attention, model.conv, dropout_rate,
                      dropout_rng, training);
}

BatchViews batch_forward(Tape& tape, const Model& model,
                         const std::vector<const FeaturizedEvent*>& batch, Mode mode,
                         double dropout_rate, Rng& dropout_rng, bool training) {
  if (batch.empty()) throw std::invalid_argument("batch_forward: empty batch");
  BatchViews views;
  if (mode != Mode::kTextOnly) {
    std::vector<Tensor> rows;
    rows.reserve(batch.size());
    for (const FeaturizedEvent* ev : batch)
      rows.push_back(graph_representation(tape, model, ev->graph));
    views.g = concat_rows(tape, rows);
  }
  if (mode != Mode::kGraphOnly) {
    std::vector<Tensor> rows;
    rows.reserve(batch.size());
    for (const FeaturizedEvent* ev : batch)
      rows.push_back(text_representation(tape, model, ev->seq, dropout_rate, dropout_rng, training));
    views.t = concat_rows(tape, rows);
  }
  return views;
}

Tensor detector_input(Tape& tape, const BatchViews& views, Mode mode) {
  switch (mode) {
    case Mode::kTextOnly: return views.t;
    case Mode::kConcat: return concat_cols(tape, {views.g, views.t});
    default: return views.g;
  }
}

Tensor predict(Tape& tape, const Tensor& features, const DetectorHead& head) {
  return softmax_rows(tape, add_bias(tape, matmul(tape, features, head.w), head.b));
}

}  // namespace srd
