#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dnewton {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Per-node vectors stored column-wise: column i is node i's d-vector.
// Mixing is then a right multiplication by the (symmetric) mixing matrix.
template <typename Scalar>
using NodeVectors = Matrix<Scalar>;

// Per-node d x d matrices, one entry per node.
template <typename Scalar>
using NodeMatrices = std::vector<Matrix<Scalar>>;

using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
NodeMatrices<Scalar> zero_blocks(Index n, Index d) {
  return NodeMatrices<Scalar>(static_cast<std::size_t>(n), Matrix<Scalar>::Zero(d, d));
}

template <typename Scalar>
Scalar frobenius(const NodeMatrices<Scalar>& blocks) {
  Scalar s(0);
  for (const auto& b : blocks) s += b.squaredNorm();
  using std::sqrt;
  return sqrt(s);
}

template <typename Scalar>
Matrix<Scalar> block_mean(const NodeMatrices<Scalar>& blocks) {
  if (blocks.empty()) throw Error("block_mean: empty block stack");
  Matrix<Scalar> mean = Matrix<Scalar>::Zero(blocks.front().rows(), blocks.front().cols());
  for (const auto& b : blocks) mean += b;
  return mean / static_cast<Scalar>(blocks.size());
}

// ||A - W_inf A||_F over the stack.
template <typename Scalar>
Scalar block_deviation(const NodeMatrices<Scalar>& blocks) {
  const Matrix<Scalar> mean = block_mean(blocks);
  Scalar s(0);
  for (const auto& b : blocks) s += (b - mean).squaredNorm();
  using std::sqrt;
  return sqrt(s);
}

// ||X - W_inf X|| for column-stacked node vectors.
template <typename Scalar>
Scalar column_deviation(const NodeVectors<Scalar>& x) {
  const Vector<Scalar> mean = x.rowwise().mean();
  return (x.colwise() - mean).norm();
}

}  // namespace dnewton
