#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dnewton/matrix_io.hpp"
#include "dnewton/types.hpp"

namespace dnewton {

using Edge = std::pair<int, int>;

/// Undirected simple graph on nodes 0..n-1. Edges are stored with first < second,
/// sorted lexicographically.
struct Topology {
  int n = 0;
  std::vector<Edge> edges;
  double tau = 1.0;

  std::vector<int> degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(n), 0);
    for (auto [a, b] : edges) {
      ++deg[static_cast<std::size_t>(a)];
      ++deg[static_cast<std::size_t>(b)];
    }
    return deg;
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [a, b] : edges) {
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    return adj;
  }

  bool connected() const {
    if (n == 0) return false;
    const auto adj = adjacency();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[static_cast<std::size_t>(u)])
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          q.push(v);
        }
    }
    return count == n;
  }
};

inline long long target_edge_count(int n, double tau) {
  return std::llround(tau * static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

/// Random connected graph with round(tau*n(n-1)/2) edges: a uniform random
/// spanning tree (decoded from a random Pruefer sequence) plus uniformly drawn
/// extra edges.
inline Topology generate_topology(int n, double tau, std::uint64_t seed) {
  if (n < 2) throw Error("generate_topology: need n >= 2, got " + std::to_string(n));
  if (!(tau > 0.0 && tau <= 1.0)) throw Error("generate_topology: tau must lie in (0,1]");
  const long long target = target_edge_count(n, tau);
  if (target < n - 1)
    throw Error("generate_topology: tau=" + std::to_string(tau) + " gives " +
                std::to_string(target) + " edges, fewer than the n-1=" + std::to_string(n - 1) +
                " needed for connectivity");

  std::mt19937_64 rng(seed);
  std::vector<char> used(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
  auto mark = [&](int a, int b) {
    used[static_cast<std::size_t>(a) * static_cast<std::size_t>(n) + static_cast<std::size_t>(b)] = 1;
    used[static_cast<std::size_t>(b) * static_cast<std::size_t>(n) + static_cast<std::size_t>(a)] = 1;
  };

  Topology topo;
  topo.n = n;
  topo.tau = tau;

  if (n == 2) {
    topo.edges.emplace_back(0, 1);
    mark(0, 1);
  } else {
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<int> pruefer(static_cast<std::size_t>(n - 2));
    for (auto& p : pruefer) p = pick(rng);
    std::vector<int> degree(static_cast<std::size_t>(n), 1);
    for (int p : pruefer) ++degree[static_cast<std::size_t>(p)];
    for (int p : pruefer) {
      int leaf = 0;
      while (degree[static_cast<std::size_t>(leaf)] != 1) ++leaf;
      topo.edges.emplace_back(std::min(leaf, p), std::max(leaf, p));
      mark(leaf, p);
      --degree[static_cast<std::size_t>(leaf)];
      --degree[static_cast<std::size_t>(p)];
    }
    int u = -1;
    for (int i = 0; i < n; ++i)
      if (degree[static_cast<std::size_t>(i)] == 1) {
        if (u < 0) {
          u = i;
        } else {
          topo.edges.emplace_back(u, i);
          mark(u, i);
          break;
        }
      }
  }

  std::vector<Edge> remaining;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (!used[static_cast<std::size_t>(a) * static_cast<std::size_t>(n) + static_cast<std::size_t>(b)])
        remaining.emplace_back(a, b);
  std::shuffle(remaining.begin(), remaining.end(), rng);
  const auto extra = static_cast<std::size_t>(target - (n - 1));
  topo.edges.insert(topo.edges.end(), remaining.begin(), remaining.begin() + static_cast<std::ptrdiff_t>(extra));
  std::sort(topo.edges.begin(), topo.edges.end());
  return topo;
}

template <typename Scalar>
struct MixingMatrix {
  Matrix<Scalar> W;
  Scalar sigma = Scalar(0);

  Index n() const { return W.rows(); }
};

/// sigma = ||W - (1/n) 11^T||_2. Full SVD up to n = 200, power iteration above.
template <typename Scalar>
Scalar second_singular_value(const Matrix<Scalar>& W) {
  const Index n = W.rows();
  if (n == 0 || W.cols() != n) throw Error("second_singular_value: W must be square and non-empty");
  const Matrix<Scalar> dev = W - Matrix<Scalar>::Constant(n, n, Scalar(1) / static_cast<Scalar>(n));
  if (n <= 200) {
    Eigen::JacobiSVD<Matrix<Scalar>> svd(dev);
    return svd.singularValues()(0);
  }
  const Matrix<Scalar> gram = dev.transpose() * dev;
  Vector<Scalar> v = Vector<Scalar>::LinSpaced(n, Scalar(1), Scalar(2)).normalized();
  Scalar lambda(0);
  for (int it = 0; it < 100000; ++it) {
    Vector<Scalar> w = gram * v;
    const Scalar norm = w.norm();
    if (norm == Scalar(0)) return Scalar(0);
    w /= norm;
    const Scalar next = w.dot(gram * w);
    v = std::move(w);
    if (std::abs(next - lambda) <= Scalar(1e-15) * std::max(Scalar(1), next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  using std::sqrt;
  return sqrt(std::max(lambda, Scalar(0)));
}

/// Metropolis-Hastings weights: w_ij = 1/(1 + max(deg_i, deg_j)) on edges,
/// w_ii = 1 - sum_{j != i} w_ij.
template <typename Scalar = double>
MixingMatrix<Scalar> metropolis_weights(const Topology& topo) {
  if (!topo.connected()) throw Error("metropolis_weights: topology is not connected");
  const auto deg = topo.degrees();
  MixingMatrix<Scalar> mix;
  mix.W = Matrix<Scalar>::Zero(topo.n, topo.n);
  for (auto [a, b] : topo.edges) {
    const Scalar w = Scalar(1) / static_cast<Scalar>(1 + std::max(deg[static_cast<std::size_t>(a)], deg[static_cast<std::size_t>(b)]));
    mix.W(a, b) = w;
    mix.W(b, a) = w;
  }
  for (Index i = 0; i < topo.n; ++i) {
    Scalar off(0);
    for (Index j = 0; j < topo.n; ++j)
      if (j != i) off += mix.W(i, j);
    mix.W(i, i) = Scalar(1) - off;
  }
  mix.sigma = second_singular_value<Scalar>(mix.W);
  return mix;
}

/// Lazily computed powers W^1, W^2, ... of a mixing matrix.
template <typename Scalar>
class MixingPowers {
 public:
  explicit MixingPowers(const Matrix<Scalar>& W) : powers_{W} {}

  const Matrix<Scalar>& power(int m) {
    if (m < 1) throw Error("MixingPowers: m must be >= 1");
    while (static_cast<int>(powers_.size()) < m) powers_.push_back(powers_.back() * powers_.front());
    return powers_[static_cast<std::size_t>(m - 1)];
  }

  const Matrix<Scalar>& base() const { return powers_.front(); }

 private:
  std::vector<Matrix<Scalar>> powers_;
};

/// out_i = sum_j (Wm)_ij x_j for column-stacked node vectors (Wm symmetric).
template <typename Scalar>
NodeVectors<Scalar> mix(const Matrix<Scalar>& Wm, const NodeVectors<Scalar>& x) {
  if (x.cols() != Wm.rows()) throw Error("mix: expected one column per node");
  return x * Wm;
}

template <typename Scalar>
NodeMatrices<Scalar> mix(const Matrix<Scalar>& Wm, const NodeMatrices<Scalar>& blocks) {
  const Index n = Wm.rows();
  if (static_cast<Index>(blocks.size()) != n) throw Error("mix: expected one block per node");
  const Index r = blocks.front().rows(), c = blocks.front().cols();
  for (const auto& b : blocks)
    if (b.rows() != r || b.cols() != c) throw Error("mix: block shape mismatch across nodes");
  NodeMatrices<Scalar> out(blocks.size(), Matrix<Scalar>::Zero(r, c));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Scalar w = Wm(i, j);
      if (w != Scalar(0)) out[static_cast<std::size_t>(i)].noalias() += w * blocks[static_cast<std::size_t>(j)];
    }
  return out;
}

/// m rounds of consensus: W^m applied blockwise.
template <typename Scalar, typename Blocks>
Blocks consensus_apply(const MixingMatrix<Scalar>& mixing, int m, const Blocks& blocks) {
  if (m < 1) throw Error("consensus_apply: m must be >= 1");
  MixingPowers<Scalar> powers(mixing.W);
  return mix(powers.power(m), blocks);
}

inline void write_topology(std::ostream& os, const Topology& topo) {
  Matrix<double> adj = Matrix<double>::Zero(topo.n, topo.n);
  for (auto [a, b] : topo.edges) adj(a, b) = adj(b, a) = 1.0;
  write_matrix(os, adj);
}

inline Topology read_topology(std::istream& is, double tau = 1.0) {
  const Matrix<double> adj = read_matrix(is);
  if (adj.rows() != adj.cols()) throw Error("read_topology: adjacency must be square");
  Topology topo;
  topo.n = static_cast<int>(adj.rows());
  topo.tau = tau;
  for (int a = 0; a < topo.n; ++a)
    for (int b = a + 1; b < topo.n; ++b)
      if (adj(a, b) != 0.0) topo.edges.emplace_back(a, b);
  return topo;
}

}  // namespace dnewton
