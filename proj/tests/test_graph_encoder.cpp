#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "srd/graph_encoder.hpp"
#include "srd/rng.hpp"
#include "srd/tensor.hpp"

using namespace srd;

namespace {

Tensor random_features(Rng& rng, std::size_t n, std::size_t d) {
  Tensor x(n, d);
  for (double& v : x.values()) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
  return x;
}

Tensor identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("build_adjacency") {
  Tensor empty = build_adjacency({}, 1);
  CHECK(empty.rows() == 1);
  CHECK(empty.at(0, 0) == 0.0);

  Tensor pair = build_adjacency({{1, 0}}, 2);
  CHECK(pair.at(0, 0) == 0.0);
  CHECK(pair.at(0, 1) == 0.0);
  CHECK(pair.at(1, 0) == 1.0);
  CHECK(pair.at(1, 1) == 0.0);

  Tensor star = build_adjacency({{1, 0}, {2, 0}}, 3);
  CHECK(star.at(1, 0) == 1.0);
  CHECK(star.at(2, 0) == 1.0);
  double total = std::accumulate(star.values().begin(), star.values().end(), 0.0);
  CHECK(total == 2.0);

  CHECK_THROWS_AS(build_adjacency({{2, 0}}, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_adjacency({{0, -1}}, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_adjacency({{1, 1}}, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_adjacency({{1, 0}, {1, 0}}, 2), std::invalid_argument);
}

TEST_CASE("normalize_adjacency") {
  Tensor single = normalize_adjacency(Tensor(1, 1));
  CHECK(single.at(0, 0) == 1.0);

  Tensor chain = normalize_adjacency(build_adjacency({{1, 0}}, 2));
  for (double v : chain.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  SUBCASE("three-node star") {
    Tensor m = normalize_adjacency(build_adjacency({{1, 0}, {2, 0}}, 3));
    double off = 1.0 / std::sqrt(6.0);
    CHECK(m.at(0, 1) == doctest::Approx(off).epsilon(1e-15));
    CHECK(m.at(1, 0) == doctest::Approx(off).epsilon(1e-15));
    CHECK(m.at(0, 2) == doctest::Approx(off).epsilon(1e-15));
    CHECK(m.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(m.at(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.at(2, 2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.at(1, 2) == 0.0);
  }

  CHECK_THROWS_AS(normalize_adjacency(Tensor(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(normalize_adjacency(Tensor(2, 2, {0.0, 0.5, 0.0, 0.0})),
                  std::invalid_argument);

  SUBCASE("symmetric and permutation-equivariant on random trees") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
      int n = rng.uniform_int(2, 9);
      auto edges = oracle::random_tree(rng, n);
      Tensor m = normalize_adjacency(build_adjacency(edges, n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) CHECK(std::abs(m.at(i, j) - m.at(j, i)) < 1e-15);

      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      std::vector<std::pair<int, int>> relabeled;
      for (auto [c, p] : edges) relabeled.push_back({perm[c], perm[p]});
      Tensor mp = normalize_adjacency(build_adjacency(relabeled, n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          CHECK(std::abs(mp.at(perm[i], perm[j]) - m.at(i, j)) < 1e-15);
    }
  }
}

TEST_CASE("gcn_forward") {
  SUBCASE("one node with identity weights passes features through") {
    Tensor x = Tensor::from_rows({{0.5, 2.0, 0.0}});
    PropagationGraph g = make_propagation_graph({}, x);
    GcnParams params{{identity(3)}};
    Tape t;
    Tensor h = gcn_forward(t, g, params);
    for (std::size_t j = 0; j < 3; ++j) CHECK(h.at(0, j) == x.at(0, j));
  }

  SUBCASE("two-node chain with equal features is a fixed point") {
    Tensor x = Tensor::from_rows({{1.0, 2.0}, {1.0, 2.0}});
    PropagationGraph g = make_propagation_graph({{1, 0}}, x);
    GcnParams params{{identity(2), identity(2)}};
    Tape t;
    Tensor h = gcn_forward(t, g, params);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(h.at(i, 0) == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(h.at(i, 1) == doctest::Approx(2.0).epsilon(1e-15));
    }
  }

  SUBCASE("equal features and identity weights scale each row by its adjacency row sum") {
    // Symmetric normalization is row-stochastic only when all degrees match,
    // so the all-equal fixed point holds exactly on degree-regular graphs and
    // rows pick up their normalized-adjacency row sum otherwise.
    Rng rng(101);
    for (int trial = 0; trial < 10; ++trial) {
      int n = rng.uniform_int(2, 8);
      Tensor x(n, 4);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < 4; ++j) x.at(i, j) = 0.25 * (j + 1);
      PropagationGraph g = make_propagation_graph(oracle::random_tree(rng, n), x);
      GcnParams params{{identity(4)}};
      Tape t;
      Tensor h = gcn_forward(t, g, params);
      for (int i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < n; ++j) row_sum += g.a_hat_norm.at(i, j);
        for (int j = 0; j < 4; ++j)
          CHECK(h.at(i, j) == doctest::Approx(row_sum * x.at(i, j)).epsilon(1e-13));
      }
    }
  }

  SUBCASE("matches the direct-loop reference on random trees") {
    Rng rng(202);
    for (int trial = 0; trial < 50; ++trial) {
      int n = rng.uniform_int(2, 6);
      std::size_t d0 = 5, d1 = 4, d2 = 3;
      auto edges = oracle::random_tree(rng, n);
      Tensor x(n, d0);
      for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
      Tensor w1(d0, d1), w2(d1, d2);
      for (double& v : w1.values()) v = rng.uniform(-1.0, 1.0);
      for (double& v : w2.values()) v = rng.uniform(-1.0, 1.0);

      PropagationGraph g = make_propagation_graph(edges, x);
      Tape t;
      Tensor h = gcn_forward(t, g, GcnParams{{w1, w2}});

      oracle::Mat ox(n, std::vector<double>(d0));
      for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d0; ++j) ox[i][j] = x.at(i, j);
      oracle::Mat ow1(d0, std::vector<double>(d1)), ow2(d1, std::vector<double>(d2));
      for (std::size_t i = 0; i < d0; ++i)
        for (std::size_t j = 0; j < d1; ++j) ow1[i][j] = w1.at(i, j);
      for (std::size_t i = 0; i < d1; ++i)
        for (std::size_t j = 0; j < d2; ++j) ow2[i][j] = w2.at(i, j);
      oracle::Mat oh =
          oracle::gcn(oracle::normalized_adjacency(edges, n), ox, {ow1, ow2});

      for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d2; ++j)
          CHECK(std::abs(h.at(i, j) - oh[i][j]) < 1e-12);
    }
  }

  SUBCASE("dimension mismatch is rejected") {
    Tensor x = Tensor::from_rows({{1.0, 0.0}});
    PropagationGraph g = make_propagation_graph({}, x);
    Tape t;
    CHECK_THROWS_AS(gcn_forward(t, g, GcnParams{{identity(3)}}), std::invalid_argument);
    CHECK_THROWS_AS(gcn_forward(t, g, GcnParams{}), std::invalid_argument);
  }
}

TEST_CASE("readout_mean") {
  Tape t;
  Tensor one = Tensor::from_rows({{4.0, -1.0}});
  Tensor r1 = readout_mean(t, one);
  CHECK(r1.at(0, 0) == 4.0);
  CHECK(r1.at(0, 1) == -1.0);

  Tensor two = Tensor::from_rows({{1.0, 3.0}, {3.0, 1.0}});
  Tensor r2 = readout_mean(t, two);
  CHECK(r2.at(0, 0) == 2.0);
  CHECK(r2.at(0, 1) == 2.0);

  SUBCASE("gradient of sum(readout) is 1/n everywhere") {
    Tensor h = Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}}).set_requires_grad(true);
    Tape tape;
    tape.backward(sum_all(tape, readout_mean(tape, h)));
    for (double g : h.grad()) CHECK(g == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  CHECK_THROWS_AS(readout_mean(t, Tensor(0, 3)), std::invalid_argument);
}

TEST_CASE("readout of gcn output is invariant to node relabeling") {
  Rng rng(303);
  for (int trial = 0; trial < 25; ++trial) {
    int n = rng.uniform_int(2, 12);
    auto edges = oracle::random_tree(rng, n);
    Tensor x = random_features(rng, n, 6);
    Tensor w1(6, 5), w2(5, 4);
    for (double& v : w1.values()) v = rng.uniform(-1.0, 1.0);
    for (double& v : w2.values()) v = rng.uniform(-1.0, 1.0);
    GcnParams params{{w1, w2}};

    Tape t;
    Tensor g_base =
        readout_mean(t, gcn_forward(t, make_propagation_graph(edges, x), params));

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::pair<int, int>> relabeled;
    for (auto [c, p] : edges) relabeled.push_back({perm[c], perm[p]});
    Tensor px(n, 6);
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 6; ++j) px.at(perm[i], j) = x.at(i, j);

    Tape t2;
    Tensor g_perm =
        readout_mean(t2, gcn_forward(t2, make_propagation_graph(relabeled, px), params));
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(std::abs(g_base.at(0, j) - g_perm.at(0, j)) < 1e-12);
  }
}

TEST_CASE("gradients through the graph path match finite differences") {
  Rng rng(404);
  auto edges = oracle::random_tree(rng, 5);
  Tensor x = random_features(rng, 5, 4);
  Tensor w1(4, 3), w2(3, 3);
  for (double& v : w1.values()) v = rng.uniform(-0.8, 0.8);
  for (double& v : w2.values()) v = rng.uniform(-0.8, 0.8);
  w1.set_requires_grad(true);
  w2.set_requires_grad(true);
  PropagationGraph g = make_propagation_graph(edges, x);

  auto build = [&](Tape& t) {
    Tensor h = gcn_forward(t, g, GcnParams{{w1, w2}});
    Tensor out = readout_mean(t, h);
    return sum_all(t, mul(t, out, out));
  };
  GradCheckReport rep = grad_check(build, {{"w1", w1}, {"w2", w2}});
  CHECK(rep.pass);
  CHECK(rep.max_err < 1e-4);
}
