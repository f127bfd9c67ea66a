#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mflq/error.hpp"

namespace mflq {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

inline double asymmetry(const MatrixXd& m) {
  if (m.rows() != m.cols()) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

/// Smallest eigenvalue of the symmetric part of `m`.
inline double min_eig(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline VectorXd sym_eigenvalues(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline constexpr double kSingularTol = 1e-12;

/// Inverse of a symmetric matrix; throws SingularInverse when the smallest
/// eigenvalue magnitude drops below 1e-12.
inline MatrixXd sym_inverse(const MatrixXd& m, const char* what = "matrix") {
  if (m.rows() == 1) {
    const double v = m(0, 0);
    if (!(std::abs(v) >= kSingularTol)) {
      throw Error(ErrorKind::SingularInverse, std::string(what) + " is singular");
    }
    return MatrixXd::Constant(1, 1, 1.0 / v);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
  const VectorXd& ev = es.eigenvalues();
  if (!(ev.cwiseAbs().minCoeff() >= kSingularTol)) {
    throw Error(ErrorKind::SingularInverse, std::string(what) + " is singular");
  }
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

/// Symmetric square root of a positive semidefinite matrix (negative
/// eigenvalues from rounding are clipped to zero).
inline MatrixXd psd_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline double fro(const MatrixXd& m) { return m.norm(); }

inline MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline double scalar(const MatrixXd& m) { return m(0, 0); }

}  // namespace mflq
