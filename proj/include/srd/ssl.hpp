#pragma once

#include <cstddef>
#include <vector>

#include "srd/rng.hpp"
#include "srd/tensor.hpp"

namespace srd {

// Affine map followed by ReLU; both views project into the same width.
struct ProjectionHead {
  Tensor w;  // d_in x d_proj
  Tensor b;  // 1 x d_proj
};

Tensor project(Tape& tape, const Tensor& view, const ProjectionHead& head);

// Instance-discrimination loss over aligned projected views. Row i of z1 and
// z2 describe the same event; every other row of z2 serves as a negative.
// loss = sum_i -log( exp(<z1_i, z2_i>/tau) / sum_j exp(<z1_i, z2_j>/tau) )
Tensor psid_loss(Tape& tape, const Tensor& z1, const Tensor& z2, double tau,
                 bool cosine = false);

// Nearest centroid per point in squared Euclidean distance, ties to the
// lowest cluster index. centroids is d x K.
std::vector<int> kmeans_assign(const Tensor& points, const Tensor& centroids);

// Mean of assigned points per cluster; an empty cluster is re-seeded with the
// point farthest from that cluster's current centroid.
Tensor kmeans_update(const Tensor& points, const std::vector<int>& assignments,
                     const Tensor& current_centroids);

double kmeans_objective(const Tensor& points, const Tensor& centroids,
                        const std::vector<int>& assignments);

// k-means++ seeding: first centroid uniform over points, each next drawn with
// probability proportional to squared distance from the nearest chosen one.
Tensor kmeans_init_plusplus(const Tensor& points, std::size_t k, Rng& rng);

// Affine classifier from projection space onto cluster logits.
struct ClusterClassifier {
  Tensor w;  // d_proj x K
  Tensor b;  // 1 x K
};

// Swapped cluster discrimination: each view's classifier must predict the
// OTHER view's cluster assignment. Assignments are constants; no gradient
// flows through them.
Tensor pscd_loss(Tape& tape, const Tensor& z1, const Tensor& z2, const ClusterClassifier& f1,
                 const ClusterClassifier& f2, const std::vector<int>& assign1,
                 const std::vector<int>& assign2, std::size_t k);

}  // namespace srd
