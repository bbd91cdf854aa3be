#include <numeric>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

#include "dnewton/graph.hpp"

using namespace dnewton;

namespace {

// Union-find reachability, independent of Topology::connected().
bool connected_by_union_find(const Topology& t) {
  std::vector<int> parent(static_cast<std::size_t>(t.n));
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) v = parent[static_cast<std::size_t>(v)];
    return v;
  };
  for (auto [a, b] : t.edges) parent[static_cast<std::size_t>(root(a))] = root(b);
  for (int v = 1; v < t.n; ++v)
    if (root(v) != root(0)) return false;
  return true;
}

double power_iteration_sigma(const Matrix<double>& W) {
  const Index n = W.rows();
  const Matrix<double> D = W - Matrix<double>::Constant(n, n, 1.0 / static_cast<double>(n));
  const Matrix<double> G = D.transpose() * D;
  std::mt19937_64 rng(99);
  Vector<double> v = testing::gaussian(n, 1, rng).col(0).normalized();
  double lambda = 0;
  for (int it = 0; it < 200000; ++it) {
    Vector<double> w = G * v;
    const double next = v.dot(w);
    v = w.normalized();
    if (std::abs(next - lambda) < 1e-16) break;
    lambda = next;
  }
  return std::sqrt(lambda);
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("edge count follows the connectivity ratio") {
    CHECK(generate_topology(10, 0.2, 1).edges.size() == 9);
    const Topology full = generate_topology(10, 1.0, 1);
    CHECK(full.edges.size() == 45);
    for (int a = 0; a < 10; ++a)
      for (int b = a + 1; b < 10; ++b)
        CHECK(std::find(full.edges.begin(), full.edges.end(), Edge{a, b}) != full.edges.end());
  }

  TEST_CASE("generated graphs are connected and simple") {
    const Topology t = generate_topology(30, 0.2, 7);
    CHECK(connected_by_union_find(t));
    CHECK(t.connected());
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Topology r = generate_topology(12, 0.2, seed);
      CHECK(connected_by_union_find(r));
      CHECK(static_cast<long long>(r.edges.size()) == target_edge_count(12, 0.2));
      for (std::size_t i = 0; i < r.edges.size(); ++i) {
        CHECK(r.edges[i].first < r.edges[i].second);
        if (i > 0) CHECK(r.edges[i - 1] < r.edges[i]);
      }
    }
  }

  TEST_CASE("topology is deterministic per seed") {
    CHECK(generate_topology(20, 0.3, 5).edges == generate_topology(20, 0.3, 5).edges);
    CHECK(generate_topology(20, 0.3, 5).edges != generate_topology(20, 0.3, 6).edges);
  }

  TEST_CASE("invalid topology requests are rejected") {
    CHECK_THROWS_AS(generate_topology(1, 1.0, 0), Error);
    CHECK_THROWS_AS(generate_topology(10, 0.1, 0), Error);
    CHECK_THROWS_AS(generate_topology(10, 0.0, 0), Error);
    CHECK_THROWS_AS(generate_topology(10, 1.5, 0), Error);
  }

  TEST_CASE("Metropolis weights on small graphs") {
    Topology path;
    path.n = 2;
    path.edges = {{0, 1}};
    const auto w2 = metropolis_weights(path);
    CHECK(w2.W.isApprox(Matrix<double>::Constant(2, 2, 0.5)));
    CHECK(w2.sigma == doctest::Approx(0.0).epsilon(1e-12));

    Topology tri;
    tri.n = 3;
    tri.edges = {{0, 1}, {0, 2}, {1, 2}};
    const auto w3 = metropolis_weights(tri);
    CHECK((w3.W - Matrix<double>::Constant(3, 3, 1.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(w3.sigma < 1e-12);

    Topology split;
    split.n = 4;
    split.edges = {{0, 1}, {2, 3}};
    CHECK_THROWS_AS(metropolis_weights(split), Error);
  }

  TEST_CASE("Metropolis matrices are symmetric, stochastic and follow the topology") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Topology t = generate_topology(15, 0.25, seed);
      const auto mix = metropolis_weights(t);
      const auto adj = t.adjacency();
      CHECK(mix.W.minCoeff() >= 0.0);
      CHECK((mix.W - mix.W.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK((mix.W.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      for (int i = 0; i < t.n; ++i)
        for (int j = 0; j < t.n; ++j) {
          if (i == j) continue;
          const auto& nb = adj[static_cast<std::size_t>(i)];
          const bool edge = std::find(nb.begin(), nb.end(), j) != nb.end();
          CHECK((mix.W(i, j) != 0.0) == edge);
        }
      CHECK(mix.sigma > 0.0);
      CHECK(mix.sigma < 1.0);
    }
  }

  TEST_CASE("second singular value") {
    const int n = 6;
    CHECK(second_singular_value<double>(Matrix<double>::Constant(n, n, 1.0 / n)) < 1e-14);
    CHECK(second_singular_value<double>(Matrix<double>::Identity(n, n)) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto mix = metropolis_weights(generate_topology(20, 0.2, seed));
      CHECK(std::abs(mix.sigma - power_iteration_sigma(mix.W)) < 1e-10);
    }
  }

  TEST_CASE("consensus keeps identical blocks and the average") {
    const auto mix = metropolis_weights(generate_topology(10, 0.2, 3));
    std::mt19937_64 rng(4);
    const Vector<double> v = testing::gaussian(5, 1, rng).col(0);
    const NodeVectors<double> same = v.replicate(1, 10);
    CHECK((consensus_apply(mix, 7, same) - same).cwiseAbs().maxCoeff() < 1e-14);

    const NodeVectors<double> x = testing::gaussian(5, 10, rng);
    for (int m : {1, 3, 10}) {
      const NodeVectors<double> y = consensus_apply(mix, m, x);
      CHECK((y.rowwise().mean() - x.rowwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(column_deviation(y) <= std::pow(mix.sigma, m) * column_deviation(x) + 1e-10);
    }

    NodeMatrices<double> blocks;
    for (int i = 0; i < 10; ++i) blocks.push_back(testing::gaussian(4, 4, rng));
    const NodeMatrices<double> out = consensus_apply(mix, 2, blocks);
    CHECK((block_mean(out) - block_mean(blocks)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(block_deviation(out) <= std::pow(mix.sigma, 2) * block_deviation(blocks) + 1e-10);
  }

  TEST_CASE("consensus contraction over random inputs") {
    const auto mix = metropolis_weights(generate_topology(10, 0.2, 11));
    std::mt19937_64 rng(12);
    double worst = -1;
    for (int trial = 0; trial < 1000; ++trial) {
      const int m = 1 + trial % 20;
      const NodeVectors<double> x = testing::gaussian(3, 10, rng);
      const double ratio = column_deviation(consensus_apply(mix, m, x)) - std::pow(mix.sigma, m) * column_deviation(x);
      worst = std::max(worst, ratio);
    }
    CHECK(worst <= 1e-10);
  }

  TEST_CASE("consensus shape errors") {
    const auto mix = metropolis_weights(generate_topology(4, 1.0, 0));
    NodeMatrices<double> ragged(4, Matrix<double>::Zero(2, 2));
    ragged[2] = Matrix<double>::Zero(3, 3);
    CHECK_THROWS_AS(consensus_apply(mix, 1, ragged), Error);
    CHECK_THROWS_AS(consensus_apply(mix, 1, NodeMatrices<double>(3, Matrix<double>::Zero(2, 2))), Error);
    CHECK_THROWS_AS(consensus_apply(mix, 1, NodeVectors<double>(NodeVectors<double>::Zero(2, 5))), Error);
    CHECK_THROWS_AS(consensus_apply(mix, 0, NodeVectors<double>(NodeVectors<double>::Zero(2, 4))), Error);
  }

  TEST_CASE("mixing powers") {
    const auto mix = metropolis_weights(generate_topology(8, 0.4, 2));
    MixingPowers<double> powers(mix.W);
    Matrix<double> expected = mix.W;
    for (int m = 1; m <= 6; ++m) {
      CHECK((powers.power(m) - expected).cwiseAbs().maxCoeff() < 1e-15);
      expected = expected * mix.W;
    }
  }

  TEST_CASE("topology text round trip") {
    const Topology t = generate_topology(9, 0.4, 8);
    std::stringstream ss;
    write_topology(ss, t);
    const Topology back = read_topology(ss, t.tau);
    CHECK(back.n == t.n);
    CHECK(back.edges == t.edges);
  }
}
