#pragma once

// Shared Gaussian-density helpers for the filtering and likelihood code.

#include <Eigen/Dense>

#include <algorithm>

#include "ncrsm/model.hpp"

namespace ncrsm::internal {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kCovBump = 1e-8;

// Cholesky-factor a symmetric matrix expected to be PD. A failing
// factorization gets one bump by kCovBump*max(1, diag)*I (recorded via
// *bumped); non-finite entries or a second failure mean the recursion
// producing S has collapsed numerically.
inline Eigen::LLT<Matrix> factor_innovation(Matrix S, bool* bumped) {
  Eigen::LLT<Matrix> llt(symmetrize(S));
  if (llt.info() != Eigen::Success) {
    if (!S.allFinite()) {
      throw DivergenceError("innovation covariance has non-finite entries");
    }
    if (bumped) *bumped = true;
    S += kCovBump * std::max(1.0, S.diagonal().maxCoeff()) *
         Matrix::Identity(S.rows(), S.cols());
    llt.compute(symmetrize(S));
    if (llt.info() != Eigen::Success) {
      throw DivergenceError(
          "innovation covariance is not positive definite even after "
          "regularization");
    }
  }
  return llt;
}

inline double log_det_from_llt(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline double log_gaussian(const Vector& residual, const Eigen::LLT<Matrix>& llt,
                           double logdet) {
  const double quad = residual.dot(llt.solve(residual));
  return -0.5 * (static_cast<double>(residual.size()) * kLog2Pi + logdet + quad);
}

}  // namespace ncrsm::internal
