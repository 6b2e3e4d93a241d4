#include "srd/graph_encoder.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace srd {

Tensor build_adjacency(const std::vector<std::pair<int, int>>& edges, std::size_t n) {
  Tensor a(n, n);
  std::set<std::pair<int, int>> seen;
  for (auto [child, parent] : edges) {
    if (child < 0 || parent < 0 || static_cast<std::size_t>(child) >= n ||
        static_cast<std::size_t>(parent) >= n)
      throw std::invalid_argument("build_adjacency: edge (" + std::to_string(child) + ", " +
                                  std::to_string(parent) + ") out of range for n=" +
                                  std::to_string(n));
    if (child == parent)
      throw std::invalid_argument("build_adjacency: self-edge at node " +
                                  std::to_string(child));
    if (!seen.insert({child, parent}).second)
      throw std::invalid_argument("build_adjacency: duplicate edge (" +
                                  std::to_string(child) + ", " + std::to_string(parent) + ")");
    a.at(child, parent) = 1.0;
  }
  return a;
}

Tensor normalize_adjacency(const Tensor& a) {
  std::size_t n = a.rows();
  if (a.cols() != n)
    throw std::invalid_argument("normalize_adjacency: non-square input " + a.shape_str());
  for (double v : a.values())
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("normalize_adjacency: entries must be 0 or 1");

  Tensor a_hat(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a_hat.at(i, i) = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (a.at(i, j) == 1.0 || a.at(j, i) == 1.0) {
        a_hat.at(i, j) = 1.0;
        a_hat.at(j, i) = 1.0;
      }
  }

  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a_hat.at(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Tensor out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.at(i, j) = a_hat.at(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return out;
}

PropagationGraph make_propagation_graph(const std::vector<std::pair<int, int>>& edges,
                                        const Tensor& node_features) {
  std::size_t n = node_features.rows();
  if (n == 0) throw std::invalid_argument("make_propagation_graph: no nodes");
  PropagationGraph g;
  g.n = n;
  g.edges = edges;
  g.a_hat_norm = normalize_adjacency(build_adjacency(edges, n));
  g.node_features = node_features;
  return g;
}

Tensor gcn_forward(Tape& tape, const PropagationGraph& graph, const GcnParams& params) {
  if (params.weights.empty()) throw std::invalid_argument("gcn_forward: no layers");
  Tensor h = graph.node_features;
  for (const Tensor& w : params.weights) {
    if (h.cols() != w.rows())
      throw std::invalid_argument("gcn_forward: features " + h.shape_str() +
                                  " do not match layer weight " + w.shape_str());
    h = relu(tape, matmul(tape, matmul(tape, graph.a_hat_norm, h), w));
  }
  return h;
}

Tensor readout_mean(Tape& tape, const Tensor& h) {
  if (h.rows() == 0) throw std::invalid_argument("readout_mean: empty graph");
  return mean_rows(tape, h);
}

}  // namespace srd
