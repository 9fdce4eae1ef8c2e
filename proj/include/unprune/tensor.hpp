#pragma once

// Dense row-major tensors and the handful of kernels the rest of the library
// builds on. Everything is templated on the scalar; the library itself
// instantiates double.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unprune/errors.hpp"

namespace unpruning {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

/// Matrix product with a fixed summation order: every output coefficient is
/// accumulated left to right over the inner index, so results are bit-stable
/// independent of vectorization or blocking.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " x " +
                     shape_str(b.rows(), b.cols()));
  }
  const MatrixX<Scalar> lhs = a;
  const MatrixX<Scalar> rhs = b;
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(lhs.rows(), rhs.cols());
  const Eigen::Index inner = lhs.cols();
  const Eigen::Index n = rhs.cols();
  for (Eigen::Index i = 0; i < lhs.rows(); ++i) {
    Scalar* out_row = out.row(i).data();
    for (Eigen::Index k = 0; k < inner; ++k) {
      const Scalar aik = lhs(i, k);
      if (aik == Scalar(0)) continue;
      const Scalar* rhs_row = rhs.row(k).data();
      for (Eigen::Index j = 0; j < n; ++j) out_row[j] += aik * rhs_row[j];
    }
  }
  return out;
}

/// Row-wise softmax, max-shifted for stability.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar shift = out.row(i).maxCoeff();
    Scalar total = 0;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = std::exp(out(i, j) - shift);
      total += out(i, j);
    }
    out.row(i) /= total;
  }
  return out;
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss = 0;
  MatrixX<Scalar> grad_logits;
};

/// Mean softmax cross-entropy over the batch and its gradient
/// (softmax - onehot) / batch with respect to the logits.
template <typename Derived>
LossAndGrad<typename Derived::Scalar> softmax_cross_entropy(
    const Eigen::MatrixBase<Derived>& logits, std::span<const int> labels) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index batch = logits.rows();
  const Eigen::Index classes = logits.cols();
  if (batch < 1) throw InputError("softmax_cross_entropy: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != batch) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(batch));
  }
  LossAndGrad<Scalar> out;
  out.grad_logits = MatrixX<Scalar>(batch, classes);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) {
      throw InputError("softmax_cross_entropy: label " + std::to_string(y) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    const Scalar shift = logits.row(i).maxCoeff();
    Scalar sum = 0;
    for (Eigen::Index j = 0; j < classes; ++j) sum += std::exp(logits(i, j) - shift);
    const Scalar log_norm = shift + std::log(sum);
    total += log_norm - logits(i, y);
    for (Eigen::Index j = 0; j < classes; ++j) {
      out.grad_logits(i, j) = std::exp(logits(i, j) - log_norm);
    }
    out.grad_logits(i, y) -= Scalar(1);
  }
  out.grad_logits /= static_cast<Scalar>(batch);
  out.loss = total / static_cast<Scalar>(batch);
  return out;
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
Eigen::Index argmax_row(const Eigen::MatrixBase<Derived>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return best;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace unpruning
