#include "srd/ssl.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace srd {

namespace {

double sq_dist_point_centroid(const Tensor& points, std::size_t i, const Tensor& centroids,
                              std::size_t c) {
  double s = 0.0;
  for (std::size_t d = 0; d < points.cols(); ++d) {
    double diff = points.at(i, d) - centroids.at(d, c);
    s += diff * diff;
  }
  return s;
}

// -sum of log-softmax entries picked by `targets`, one per row.
Tensor picked_nll(Tape& tape, const Tensor& logits, const std::vector<int>& targets) {
  Tensor mask(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < targets.size(); ++i)
    mask.at(i, static_cast<std::size_t>(targets[i])) = 1.0;
  Tensor lp = log_softmax_rows(tape, logits);
  return scale(tape, sum_all(tape, mul(tape, lp, mask)), -1.0);
}

}  // namespace

Tensor project(Tape& tape, const Tensor& view, const ProjectionHead& head) {
  if (view.cols() != head.w.rows())
    throw std::invalid_argument("project: view " + view.shape_str() +
                                " does not match head weight " + head.w.shape_str());
  return relu(tape, add_bias(tape, matmul(tape, view, head.w), head.b));
}

Tensor psid_loss(Tape& tape, const Tensor& z1, const Tensor& z2, double tau, bool cosine) {
  if (tau <= 0.0)
    throw std::invalid_argument("psid_loss: tau must be positive, got " + std::to_string(tau));
  std::size_t b = z1.rows();
  if (b < 2) throw std::invalid_argument("psid_loss: batch of " + std::to_string(b) +
                                         " has no negatives");
  if (z2.rows() != b || z1.cols() != z2.cols())
    throw std::invalid_argument("psid_loss: mismatched views " + z1.shape_str() + " and " +
                                z2.shape_str());
  Tensor a = cosine ? l2_normalize_rows(tape, z1) : z1;
  Tensor c = cosine ? l2_normalize_rows(tape, z2) : z2;
  Tensor sims = scale(tape, matmul(tape, a, transpose(tape, c)), 1.0 / tau);
  std::vector<int> diag(b);
  for (std::size_t i = 0; i < b; ++i) diag[i] = static_cast<int>(i);
  return picked_nll(tape, sims, diag);
}

std::vector<int> kmeans_assign(const Tensor& points, const Tensor& centroids) {
  if (points.cols() != centroids.rows())
    throw std::invalid_argument("kmeans_assign: points " + points.shape_str() +
                                " vs centroids " + centroids.shape_str());
  std::size_t k = centroids.cols();
  std::vector<int> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = sq_dist_point_centroid(points, i, centroids, 0);
    std::size_t best_c = 0;
    for (std::size_t c = 1; c < k; ++c) {
      double d = sq_dist_point_centroid(points, i, centroids, c);
      if (d < best) {  // strict: lowest index wins ties
        best = d;
        best_c = c;
      }
    }
    out[i] = static_cast<int>(best_c);
  }
  return out;
}

Tensor kmeans_update(const Tensor& points, const std::vector<int>& assignments,
                     const Tensor& current_centroids) {
  std::size_t k = current_centroids.cols();
  std::size_t d = points.cols();
  if (assignments.size() != points.rows())
    throw std::invalid_argument("kmeans_update: one assignment per point required");
  Tensor next(d, k);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    std::size_t c = static_cast<std::size_t>(assignments[i]);
    if (c >= k) throw std::invalid_argument("kmeans_update: assignment out of range");
    ++counts[c];
    for (std::size_t j = 0; j < d; ++j) next.at(j, c) += points.at(i, j);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      for (std::size_t j = 0; j < d; ++j) next.at(j, c) /= static_cast<double>(counts[c]);
    } else {
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.rows(); ++i) {
        double dist = sq_dist_point_centroid(points, i, current_centroids, c);
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      for (std::size_t j = 0; j < d; ++j) next.at(j, c) = points.at(far, j);
    }
  }
  return next;
}

double kmeans_objective(const Tensor& points, const Tensor& centroids,
                        const std::vector<int>& assignments) {
  double obj = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i)
    obj += sq_dist_point_centroid(points, i, centroids,
                                  static_cast<std::size_t>(assignments[i]));
  return obj;
}

Tensor kmeans_init_plusplus(const Tensor& points, std::size_t k, Rng& rng) {
  std::size_t n = points.rows(), d = points.cols();
  if (k < 2) throw std::invalid_argument("kmeans_init_plusplus: need at least 2 clusters");
  if (n == 0) throw std::invalid_argument("kmeans_init_plusplus: no points");
  Tensor centroids(d, k);
  auto copy_point = [&](std::size_t i, std::size_t c) {
    for (std::size_t j = 0; j < d; ++j) centroids.at(j, c) = points.at(i, j);
  };
  copy_point(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n) - 1)), 0);
  std::vector<double> best_d(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double dist = sq_dist_point_centroid(points, i, centroids, c - 1);
      if (dist < best_d[i]) best_d[i] = dist;
      total += best_d[i];
    }
    std::size_t chosen;
    if (total <= 0.0) {
      chosen = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n) - 1));
    } else {
      double r = rng.uniform() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best_d[i];
        if (r < acc) {
          chosen = i;
          break;
        }
      }
    }
    copy_point(chosen, c);
  }
  return centroids;
}

Tensor pscd_loss(Tape& tape, const Tensor& z1, const Tensor& z2, const ClusterClassifier& f1,
                 const ClusterClassifier& f2, const std::vector<int>& assign1,
                 const std::vector<int>& assign2, std::size_t k) {
  if (f1.w.cols() != k || f2.w.cols() != k)
    throw std::invalid_argument("pscd_loss: classifier width " + f1.w.shape_str() + "/" +
                                f2.w.shape_str() + " does not match K=" + std::to_string(k));
  if (assign1.size() != z1.rows() || assign2.size() != z2.rows())
    throw std::invalid_argument("pscd_loss: one assignment per row required");
  for (int a : assign1)
    if (a < 0 || static_cast<std::size_t>(a) >= k)
      throw std::invalid_argument("pscd_loss: assignment out of range");
  for (int a : assign2)
    if (a < 0 || static_cast<std::size_t>(a) >= k)
      throw std::invalid_argument("pscd_loss: assignment out of range");

  Tensor logits1 = add_bias(tape, matmul(tape, z1, f1.w), f1.b);
  Tensor logits2 = add_bias(tape, matmul(tape, z2, f2.w), f2.b);
  // each view predicts the other view's assignment
  Tensor l1 = picked_nll(tape, logits1, assign2);
  Tensor l2 = picked_nll(tape, logits2, assign1);
  return add(tape, l1, l2);
}

}  // namespace srd
