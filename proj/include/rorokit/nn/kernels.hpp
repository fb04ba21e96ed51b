#pragma once

// Dense forward kernels shared by the autodiff ops and by the plain-matrix
// reference paths used in tests. Everything here is a free function over
// Eigen expressions and works for any floating scalar.

#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace rorokit::nn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;

/// Row-wise softmax with max subtraction.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar top = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - top).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// log(exp(0) + sum(exp(x))) over the coefficients selected by mask, i.e. a
/// log-sum-exp that includes one implicit zero logit.
template <typename DerivedX, typename DerivedM>
typename DerivedX::Scalar log1p_sum_exp(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedM>& mask) {
  using Scalar = typename DerivedX::Scalar;
  Scalar top = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j)) top = std::max(top, x(i, j));
  Scalar acc = std::exp(-top);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j)) acc += std::exp(x(i, j) - top);
  return top + std::log(acc);
}

/// Attention weights softmax((q k^T + lambda * rho) / sqrt(d_k)). The bias is
/// added before the scaling.
template <typename DerivedQ, typename DerivedK, typename DerivedR>
MatrixX<typename DerivedQ::Scalar> attention_weights(const Eigen::MatrixBase<DerivedQ>& q,
                                                     const Eigen::MatrixBase<DerivedK>& k,
                                                     const Eigen::MatrixBase<DerivedR>& rho,
                                                     typename DerivedQ::Scalar lambda) {
  using Scalar = typename DerivedQ::Scalar;
  MatrixX<Scalar> logits = q * k.transpose();
  logits += lambda * rho;
  logits *= Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  return softmax_rows(logits);
}

template <typename DerivedQ, typename DerivedK>
MatrixX<typename DerivedQ::Scalar> attention_weights(const Eigen::MatrixBase<DerivedQ>& q,
                                                     const Eigen::MatrixBase<DerivedK>& k) {
  using Scalar = typename DerivedQ::Scalar;
  MatrixX<Scalar> logits = q * k.transpose();
  logits *= Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  return softmax_rows(logits);
}

/// Per-row normalization to zero mean and unit variance (biased variance).
template <typename Derived>
MatrixX<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& x,
                                                 typename Derived::Scalar eps,
                                                 RowVectorX<typename Derived::Scalar>* inv_std = nullptr) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(x.rows(), x.cols());
  if (inv_std) inv_std->resize(x.rows());
  const Scalar d = static_cast<Scalar>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar mean = x.row(i).sum() / d;
    const auto centered = (x.row(i).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / d;
    const Scalar r = Scalar(1) / std::sqrt(var + eps);
    out.row(i) = centered * r;
    if (inv_std) (*inv_std)(i) = r;
  }
  return out;
}

/// Global-pointer pair scores s_ij = (W_q h_i + b_q)^T (W_k h_j + b_k) with
/// elements as rows of h.
template <typename DerivedH, typename DerivedW, typename DerivedB>
MatrixX<typename DerivedH::Scalar> pair_scores(const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedW>& wq,
                                               const Eigen::MatrixBase<DerivedB>& bq, const Eigen::MatrixBase<DerivedW>& wk,
                                               const Eigen::MatrixBase<DerivedB>& bk) {
  using Scalar = typename DerivedH::Scalar;
  MatrixX<Scalar> q = h * wq;
  q.rowwise() += bq.row(0);
  MatrixX<Scalar> k = h * wk;
  k.rowwise() += bk.row(0);
  return q * k.transpose();
}

}  // namespace rorokit::nn
