#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mflq/linalg.hpp"

namespace mflq {

/// Problem datum of the LQ mean field social optimization model.
///
/// Agent i evolves as
///   dX_i = (A X_i + B u_i + G X^(N)) dt + (B1 u_i + D) dW_i + (B0 u^(N) + D0) dW_0
/// and pays
///   E[ int_0^T |X_i - Gamma X^(N)|_Q^2 + |u_i|_R^2 dt + |X_i(T) - GammaF X^(N)(T)|_QF^2 ].
/// Noises are scalar, so D, D0 are n x 1 and B1, B0 multiply scalar increments.
/// Q, R and QF may be indefinite.
struct ModelParams {
  Index n = 1;
  Index n1 = 1;
  MatrixXd A, B, B0, B1, D, D0, G, Gamma, GammaF, Q, R, QF;
  double T = 1.0;
};

/// Weights derived from the cost: the coupling weights Q^Gamma and the
/// aggregate weights Q3 = (I - Gamma)^T Q (I - Gamma).
struct DerivedWeights {
  MatrixXd QGamma, QGammaF, Q3, Q3F;
};

/// A validated model: symmetrized weights plus derived quantities.
struct Model {
  ModelParams params;
  DerivedWeights weights;

  Index n() const { return params.n; }
  Index n1() const { return params.n1; }
  double T() const { return params.T; }
};

/// Common initial law of the agents' states.
struct InitialLaw {
  VectorXd mu0;
  MatrixXd sigma0;
  std::vector<MatrixXd> per_agent_sigma;  // optional heterogeneous covariances

  /// Covariance of agent i (0-based).
  const MatrixXd& sigma_of(Index i) const {
    if (per_agent_sigma.empty()) return sigma0;
    return per_agent_sigma[static_cast<std::size_t>(i) % per_agent_sigma.size()];
  }
};

namespace detail {

inline void require_shape(const MatrixXd& m, Index rows, Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(name) + " must be " + std::to_string(rows) + "x" +
                    std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw Error(ErrorKind::NonFiniteEntry, std::string(name) + " has non-finite entries");
}

// Asymmetry up to 1e-9 (relative to the entry scale) is absorbed by symmetrization.
inline MatrixXd intake_symmetric(const MatrixXd& m, const char* name) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (asymmetry(m) > 1e-9 * scale) {
    throw Error(ErrorKind::AsymmetricWeight, std::string(name) + " is not symmetric");
  }
  return symmetrize(m);
}

}  // namespace detail

inline DerivedWeights derive_weights(const ModelParams& p) {
  const MatrixXd I = MatrixXd::Identity(p.n, p.n);
  DerivedWeights w;
  w.QGamma = symmetrize(p.Gamma.transpose() * p.Q * p.Gamma - p.Q * p.Gamma - p.Gamma.transpose() * p.Q);
  w.QGammaF = symmetrize(p.GammaF.transpose() * p.QF * p.GammaF - p.QF * p.GammaF -
                         p.GammaF.transpose() * p.QF);
  w.Q3 = symmetrize((I - p.Gamma).transpose() * p.Q * (I - p.Gamma));
  w.Q3F = symmetrize((I - p.GammaF).transpose() * p.QF * (I - p.GammaF));
  return w;
}

/// Validates dimensions and entries, symmetrizes Q, R, QF and computes the
/// derived weights.
inline Model build_model(const ModelParams& raw) {
  if (raw.n <= 0 || raw.n1 <= 0) throw Error(ErrorKind::DimensionMismatch, "n and n1 must be positive");
  const Index n = raw.n, n1 = raw.n1;
  detail::require_shape(raw.A, n, n, "A");
  detail::require_shape(raw.B, n, n1, "B");
  detail::require_shape(raw.B0, n, n1, "B0");
  detail::require_shape(raw.B1, n, n1, "B1");
  detail::require_shape(raw.D, n, 1, "D");
  detail::require_shape(raw.D0, n, 1, "D0");
  detail::require_shape(raw.G, n, n, "G");
  detail::require_shape(raw.Gamma, n, n, "Gamma");
  detail::require_shape(raw.GammaF, n, n, "GammaF");
  detail::require_shape(raw.Q, n, n, "Q");
  detail::require_shape(raw.R, n1, n1, "R");
  detail::require_shape(raw.QF, n, n, "QF");
  if (!std::isfinite(raw.T)) throw Error(ErrorKind::NonFiniteEntry, "T is not finite");
  if (!(raw.T > 0.0)) throw Error(ErrorKind::NonPositiveHorizon, "T must be positive");

  Model m;
  m.params = raw;
  m.params.Q = detail::intake_symmetric(raw.Q, "Q");
  m.params.R = detail::intake_symmetric(raw.R, "R");
  m.params.QF = detail::intake_symmetric(raw.QF, "QF");
  m.weights = derive_weights(m.params);
  return m;
}

/// Scalar (n = n1 = 1) parameter set helper.
struct ScalarParams {
  double A = 0, B = 0, B0 = 0, B1 = 0, D = 0, D0 = 0, G = 0, Gamma = 0, GammaF = 0, Q = 0, R = 0,
         QF = 0, T = 1;
};

inline ModelParams scalar_params(const ScalarParams& s) {
  auto c = [](double v) { return MatrixXd::Constant(1, 1, v); };
  ModelParams p;
  p.n = 1;
  p.n1 = 1;
  p.A = c(s.A);
  p.B = c(s.B);
  p.B0 = c(s.B0);
  p.B1 = c(s.B1);
  p.D = c(s.D);
  p.D0 = c(s.D0);
  p.G = c(s.G);
  p.Gamma = c(s.Gamma);
  p.GammaF = c(s.GammaF);
  p.Q = c(s.Q);
  p.R = c(s.R);
  p.QF = c(s.QF);
  p.T = s.T;
  return p;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"example1", "example2", "example3", "decoupled_m0",
                                              "portfolio_lq"};
  return names;
}

/// Named scalar presets: the three numerical examples, the decoupled
/// baseline M0, and the LQ form of the mean-variance portfolio problem
/// (rho = 0.05, alpha = 0.15, sigma = 0.25, gamma = 1, T = 1).
inline ModelParams scalar_model(const std::string& name) {
  if (name == "example1") {
    return scalar_params({.A = 1, .B = 1, .B0 = 0.2, .B1 = 0.2, .D = 0, .D0 = 0, .G = 2, .Gamma = 0.1,
                          .GammaF = 0.1, .Q = 4, .R = 1, .QF = 2, .T = 2});
  }
  if (name == "example2") {
    return scalar_params({.A = -4, .B = 1, .B0 = -2, .B1 = 4, .D = 0, .D0 = 0, .G = 1, .Gamma = 4,
                          .GammaF = 2, .Q = 1, .R = -1, .QF = 1, .T = 2});
  }
  if (name == "example3") {
    return scalar_params({.A = 30, .B = 1, .B0 = 0.2, .B1 = 0.2, .D = 0, .D0 = 0, .G = 2, .Gamma = 0.1,
                          .GammaF = 0.1, .Q = -30, .R = 1.5, .QF = 3, .T = 2});
  }
  if (name == "decoupled_m0") {
    return scalar_params({.A = 0, .B = 1, .B0 = 0, .B1 = 0, .D = 0, .D0 = 0, .G = 0, .Gamma = 0,
                          .GammaF = 0, .Q = 0, .R = 1, .QF = 1, .T = 1});
  }
  if (name == "portfolio_lq") {
    const double rho = 0.05, alpha = 0.15, sigma = 0.25, gamma = 1.0;
    return scalar_params({.A = rho, .B = alpha - rho, .B0 = 0, .B1 = sigma, .D = 0, .D0 = 0, .G = 0,
                          .Gamma = 0, .GammaF = 1, .Q = 0, .R = 0, .QF = gamma / 2, .T = 1});
  }
  throw Error(ErrorKind::UnknownPreset, "unknown preset '" + name + "'");
}

/// Terminal linear weight K attached to a preset (zero unless the preset
/// carries the linear terminal cost 2 K^T X_i(T)).
inline VectorXd preset_terminal_linear(const std::string& name, Index n) {
  if (name == "portfolio_lq") return VectorXd::Constant(1, -0.5);
  return VectorXd::Zero(n);
}

inline InitialLaw deterministic_law(const VectorXd& mu0) {
  InitialLaw law;
  law.mu0 = mu0;
  law.sigma0 = MatrixXd::Zero(mu0.size(), mu0.size());
  return law;
}

inline void validate_law(const InitialLaw& law, Index n, double sigma_bound = 1e6) {
  detail::require_shape(law.mu0, n, 1, "mu0");
  detail::require_shape(law.sigma0, n, n, "Sigma0");
  auto check = [&](const MatrixXd& s, const char* name) {
    if (asymmetry(s) > 1e-9 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
      throw Error(ErrorKind::AsymmetricWeight, std::string(name) + " is not symmetric");
    }
    if (min_eig(s) < -1e-10) throw Error(ErrorKind::PreconditionViolated, std::string(name) + " is not PSD");
    if (s.norm() > sigma_bound) throw Error(ErrorKind::InvalidArgument, std::string(name) + " exceeds bound");
  };
  check(law.sigma0, "Sigma0");
  for (const auto& s : law.per_agent_sigma) {
    detail::require_shape(s, n, n, "Sigma0^i");
    check(s, "Sigma0^i");
  }
}

}  // namespace mflq
