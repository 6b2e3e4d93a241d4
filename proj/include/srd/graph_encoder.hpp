#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "srd/tensor.hpp"

namespace srd {

// One event's reply tree, ready for message passing: symmetrized, self-looped,
// degree-normalized adjacency plus multi-hot node features.
struct PropagationGraph {
  std::size_t n = 0;
  std::vector<std::pair<int, int>> edges;  // (child, parent), directed as replied-to
  Tensor a_hat_norm;                       // n x n, symmetric
  Tensor node_features;                    // n x d0
};

// A[child][parent] = 1 for each reply edge. Rejects out-of-range indices,
// self-edges, and duplicates.
Tensor build_adjacency(const std::vector<std::pair<int, int>>& edges, std::size_t n);

// Symmetrize, add self-loops, then D^(-1/2) * A_hat * D^(-1/2). Input must be
// square with entries in {0, 1}.
Tensor normalize_adjacency(const Tensor& a);

PropagationGraph make_propagation_graph(const std::vector<std::pair<int, int>>& edges,
                                        const Tensor& node_features);

struct GcnParams {
  std::vector<Tensor> weights;  // layer l maps d_{l-1} -> d_l
};

// H^(l) = ReLU(a_hat_norm * H^(l-1) * W^(l)), H^(0) = node features.
Tensor gcn_forward(Tape& tape, const PropagationGraph& graph, const GcnParams& params);

// Column-wise mean over nodes; the propagation representation g.
Tensor readout_mean(Tape& tape, const Tensor& h);

}  // namespace srd
