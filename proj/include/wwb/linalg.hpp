#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstddef>
#include <optional>

namespace wwb {

using Matrix = Eigen::MatrixXd;

/// Lower Cholesky factor of `a + jitter * I`, or nullopt if the matrix is not
/// numerically positive definite.
inline std::optional<Matrix> cholesky_factor(const Matrix& a, double jitter = 0.0) {
  Matrix shifted = a;
  if (jitter != 0.0) shifted.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Matrix l = llt.matrixL();
  if (!l.allFinite()) return std::nullopt;
  return l;
}

inline bool is_psd_with_jitter(const Matrix& a, double jitter) {
  return cholesky_factor(a, jitter).has_value();
}

}  // namespace wwb
