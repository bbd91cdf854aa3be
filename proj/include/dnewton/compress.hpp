#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dnewton/types.hpp"

namespace dnewton {

enum class CompressorKind { identity, rank_k, top_k };

inline std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::identity: return "identity";
    case CompressorKind::rank_k: return "rank_k";
    case CompressorKind::top_k: return "top_k";
  }
  return "?";
}

inline CompressorKind parse_compressor_kind(const std::string& s) {
  if (s == "identity" || s == "none") return CompressorKind::identity;
  if (s == "rank_k" || s == "rank") return CompressorKind::rank_k;
  if (s == "top_k" || s == "top") return CompressorKind::top_k;
  throw Error("unknown compressor kind '" + s + "' (expected identity, rank_k or top_k)");
}

/// Deterministic contractive operator Q on d x d matrices.
struct CompressorSpec {
  CompressorKind kind = CompressorKind::identity;
  int K = 0;
  int d = 0;

  void validate() const {
    if (d < 1) throw Error("CompressorSpec: d must be >= 1");
    if (kind == CompressorKind::rank_k && (K < 1 || K > d))
      throw Error("CompressorSpec: rank_k requires 1 <= K <= d (K=" + std::to_string(K) + ", d=" + std::to_string(d) + ")");
    if (kind == CompressorKind::top_k && (K < 1 || K > d * d))
      throw Error("CompressorSpec: top_k requires 1 <= K <= d^2 (K=" + std::to_string(K) + ", d=" + std::to_string(d) + ")");
  }

  static CompressorSpec identity(int d) { return {CompressorKind::identity, d, d}; }
  static CompressorSpec rank(int K, int d) { return {CompressorKind::rank_k, K, d}; }
  static CompressorSpec top(int K, int d) { return {CompressorKind::top_k, K, d}; }
};

template <typename Scalar>
struct CompressedPayload {
  Matrix<Scalar> dense;
  std::int64_t bits = 0;
};

/// Contraction constant: ||Q(A) - A||_F <= (1 - delta) ||A||_F.
inline double delta_bound(const CompressorSpec& spec) {
  spec.validate();
  const double d = spec.d;
  switch (spec.kind) {
    case CompressorKind::rank_k: return spec.K / (2.0 * d);
    case CompressorKind::top_k: return spec.K / (2.0 * d * d);
    case CompressorKind::identity: return 1.0;
  }
  return 1.0;
}

/// Size of one transmitted payload, assuming 64-bit reals and packed indices.
/// top_k: value + flat index per entry; rank_k: (u, v, sigma) per component.
inline std::int64_t payload_bits(const CompressorSpec& spec) {
  spec.validate();
  const std::int64_t d = spec.d, K = spec.K;
  switch (spec.kind) {
    case CompressorKind::top_k: {
      std::int64_t index_bits = 0;
      while ((std::int64_t{1} << index_bits) < d * d) ++index_bits;
      return K * (64 + index_bits);
    }
    case CompressorKind::rank_k: return K * (2 * d + 1) * 64;
    case CompressorKind::identity: return d * d * 64;
  }
  return 0;
}

namespace detail {

// Keeps the K largest |entries|; ties go to the lowest row-major index.
template <typename Scalar>
Matrix<Scalar> top_k(const Matrix<Scalar>& A, int K) {
  const Index rows = A.rows(), cols = A.cols();
  const Index total = rows * cols;
  auto at = [&](Index flat) { return A(flat / cols, flat % cols); };
  std::vector<Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Index(0));
  const auto keep = static_cast<std::ptrdiff_t>(std::min<Index>(K, total));
  if (keep <= 0) return Matrix<Scalar>::Zero(rows, cols);
  // Strict total order, so the selected set is unique.
  std::nth_element(order.begin(), order.begin() + (keep - 1), order.end(), [&](Index a, Index b) {
    using std::abs;
    const Scalar fa = abs(at(a)), fb = abs(at(b));
    if (fa != fb) return fa > fb;
    return a < b;
  });
  Matrix<Scalar> out = Matrix<Scalar>::Zero(rows, cols);
  for (std::ptrdiff_t t = 0; t < keep; ++t) {
    const Index flat = order[static_cast<std::size_t>(t)];
    out(flat / cols, flat % cols) = at(flat);
  }
  return out;
}

// For an exactly symmetric A the singular triplets follow from A = V diag(lambda) V^T:
// sigma = |lambda|, u = sign(lambda) v. The output is symmetrized so that
// symmetric inputs map to exactly symmetric outputs.
template <typename Scalar>
Matrix<Scalar> rank_k_symmetric(const Matrix<Scalar>& A, int K) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(A);
  const Vector<Scalar>& lambda = es.eigenvalues();
  std::vector<Index> order(static_cast<std::size_t>(lambda.size()));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    using std::abs;
    return abs(lambda(a)) > abs(lambda(b));
  });
  Matrix<Scalar> V(A.rows(), K);
  Vector<Scalar> s(K);
  for (int c = 0; c < K; ++c) {
    const Index j = order[static_cast<std::size_t>(c)];
    V.col(c) = es.eigenvectors().col(j);
    s(c) = lambda(j);
  }
  const Matrix<Scalar> P = V * s.asDiagonal() * V.transpose();
  return Scalar(0.5) * (P + P.transpose());
}

// General case: with V the top-K eigenvectors of A^T A, A V V^T is the best
// rank-K approximation, and as a projection it never increases the Frobenius norm.
template <typename Scalar>
Matrix<Scalar> rank_k(const Matrix<Scalar>& A, int K) {
  if (K >= A.rows() && K >= A.cols()) return A;
  if (A.rows() == A.cols() && A == A.transpose()) return rank_k_symmetric(A, K);
  const Matrix<Scalar> gram = A.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(gram);
  const Index cols = A.cols();
  const Index k = std::min<Index>(K, cols);
  const Matrix<Scalar> V = es.eigenvectors().rightCols(k);  // eigenvalues are ascending
  return (A * V) * V.transpose();
}

}  // namespace detail

template <typename Scalar>
CompressedPayload<Scalar> compress(const CompressorSpec& spec, const Matrix<Scalar>& A) {
  spec.validate();
  if (A.rows() != spec.d || A.cols() != spec.d)
    throw Error("compress: expected a " + std::to_string(spec.d) + "x" + std::to_string(spec.d) +
                " matrix, got " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
  CompressedPayload<Scalar> out;
  out.bits = payload_bits(spec);
  switch (spec.kind) {
    case CompressorKind::identity: out.dense = A; break;
    case CompressorKind::rank_k: out.dense = detail::rank_k(A, spec.K); break;
    case CompressorKind::top_k: out.dense = detail::top_k(A, spec.K); break;
  }
  return out;
}

/// Matrix-only shorthand for Q(A).
template <typename Scalar>
Matrix<Scalar> apply(const CompressorSpec& spec, const Matrix<Scalar>& A) {
  return compress(spec, A).dense;
}

}  // namespace dnewton
