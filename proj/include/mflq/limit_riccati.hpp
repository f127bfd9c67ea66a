#pragma once

#include <optional>
#include <string>

#include "mflq/model.hpp"
#include "mflq/ode.hpp"

namespace mflq {

inline MatrixXd r1(const Model& m, const MatrixXd& L1) {
  const auto& p = m.params;
  return symmetrize(p.R + p.B1.transpose() * L1 * p.B1);
}

inline MatrixXd r2(const Model& m, const MatrixXd& L1, const MatrixXd& L2) {
  const auto& p = m.params;
  return symmetrize(p.R + p.B1.transpose() * L1 * p.B1 + p.B0.transpose() * (L1 + L2) * p.B0);
}

inline MatrixXd psi1(const Model& m, const MatrixXd& L1) {
  const auto& p = m.params;
  const MatrixXd H = sym_inverse(r1(m, L1), "R1");
  return symmetrize(L1 * p.B * H * p.B.transpose() * L1 - L1 * p.A - p.A.transpose() * L1 - p.Q);
}

inline MatrixXd psi2(const Model& m, const MatrixXd& L1, const MatrixXd& L2) {
  const auto& p = m.params;
  const MatrixXd H = sym_inverse(r1(m, L1), "R1");
  const MatrixXd H1 = sym_inverse(r2(m, L1, L2), "R2");
  const MatrixXd L3 = L1 + L2;
  const MatrixXd AG = p.A + p.G;
  return symmetrize(L3 * p.B * H1 * p.B.transpose() * L3 - L1 * p.B * H * p.B.transpose() * L1 -
                    (L1 * p.G + L2 * AG) - (p.G.transpose() * L1 + AG.transpose() * L2) -
                    m.weights.QGamma);
}

/// Field of Lambda3 = Lambda1 + Lambda2 given Lambda1.
inline MatrixXd psi3(const Model& m, const MatrixXd& L1, const MatrixXd& L3) {
  const auto& p = m.params;
  const MatrixXd W = p.R + p.B1.transpose() * L1 * p.B1 + p.B0.transpose() * L3 * p.B0;
  const MatrixXd AG = p.A + p.G;
  return symmetrize(L3 * p.B * sym_inverse(W, "R2") * p.B.transpose() * L3 - L3 * AG -
                    AG.transpose() * L3 - m.weights.Q3);
}

struct LimitSolution {
  MatrixTrajectory Lambda1, Lambda2, Lambda3;
  MatrixTrajectory S;  // n x 1
  MatrixTrajectory r;  // 1 x 1
  MatrixTrajectory min_eig_R1, min_eig_R2;
  VectorXd K;
};

namespace detail {

inline VectorXd terminal_linear_or_zero(const Model& m, const std::optional<VectorXd>& K) {
  if (!K) return VectorXd::Zero(m.n());
  if (K->size() != m.n()) throw Error(ErrorKind::DimensionMismatch, "K must have length n");
  if (!K->allFinite()) throw Error(ErrorKind::NonFiniteEntry, "K has non-finite entries");
  return *K;
}

template <class T>
Outcome<T> failed(const OdeResult& res) {
  Outcome<T> out;
  out.status = res.status;
  out.failure_time = res.t_fail;
  out.failed_constraint = res.constraint;
  out.partial = res.traj;
  return out;
}

// Common building block for the affine (S, r) stages: q is the n1-vector
// B^T S + B1^T L1 D + B0^T M D0 and the rhs is assembled by the caller.
inline MatrixXd affine_q(const ModelParams& p, const MatrixXd& S, const MatrixXd& L1, const MatrixXd& M) {
  return p.B.transpose() * S + p.B1.transpose() * L1 * p.D + p.B0.transpose() * M * p.D0;
}

}  // namespace detail

/// phi_1 and phi_2 of the limiting (S, r) system.
inline MatrixXd phi1(const Model& m, const MatrixXd& L1, const MatrixXd& L2, const MatrixXd& S) {
  const auto& p = m.params;
  const MatrixXd L3 = L1 + L2;
  const MatrixXd q = detail::affine_q(p, S, L1, L3);
  return L3 * p.B * sym_inverse(r2(m, L1, L2), "R2") * q - (p.A + p.G).transpose() * S;
}

inline MatrixXd phi2(const Model& m, const MatrixXd& L1, const MatrixXd& L2, const MatrixXd& S) {
  const auto& p = m.params;
  const MatrixXd L3 = L1 + L2;
  const MatrixXd q = detail::affine_q(p, S, L1, L3);
  return q.transpose() * sym_inverse(r2(m, L1, L2), "R2") * q - p.D.transpose() * L1 * p.D -
         p.D0.transpose() * L3 * p.D0;
}

inline OdeSystem limit_lambda_system(const Model& m) {
  const Index n = m.n();
  OdeSystem sys;
  sys.blocks = {{"Lambda1", n, n, true}, {"Lambda2", n, n, true}};
  sys.rhs = [&m](double, const Blocks& y) { return Blocks{psi1(m, y[0]), psi2(m, y[0], y[1])}; };
  sys.constraints = {
      {"R1", [&m](double, const Blocks& y) { return r1(m, y[0]); }},
      {"R2", [&m](double, const Blocks& y) { return r2(m, y[0], y[1]); }},
  };
  return sys;
}

/// Solves the limiting system (Lambda1, Lambda2) jointly and then the affine
/// (S, r) stage. S(T) = K when a linear terminal cost 2 K^T X_i(T) is active.
inline Outcome<LimitSolution> solve_limit(const Model& m, const std::optional<VectorXd>& K = std::nullopt,
                                          const OdeOptions& opts = {}) {
  const VectorXd k = detail::terminal_linear_or_zero(m, K);
  const Index n = m.n();
  const OdeSystem sys = limit_lambda_system(m);
  OdeResult res = integrate_backward(sys, {m.params.QF, m.weights.QGammaF}, m.T(), opts);
  if (res.status != SolveStatus::Solved) return detail::failed<LimitSolution>(res);

  LimitSolution sol;
  sol.K = k;
  sol.Lambda1 = std::move(res.traj.at("Lambda1"));
  sol.Lambda2 = std::move(res.traj.at("Lambda2"));
  sol.Lambda3 = MatrixTrajectory::combine(sol.Lambda1, 1.0, sol.Lambda2, 1.0);
  sol.min_eig_R1 = std::move(res.margins.at("R1"));
  sol.min_eig_R2 = std::move(res.margins.at("R2"));

  OdeSystem lin;
  lin.blocks = {{"S", n, 1, false}, {"r", 1, 1, false}};
  const MatrixTrajectory& L1 = sol.Lambda1;
  const MatrixTrajectory& L2 = sol.Lambda2;
  lin.rhs = [&](double t, const Blocks& y) {
    const MatrixXd l1 = L1.at(t), l2 = L2.at(t);
    return Blocks{phi1(m, l1, l2, y[0]), phi2(m, l1, l2, y[0])};
  };
  OdeResult lr = integrate_backward(lin, {MatrixXd(k), MatrixXd::Zero(1, 1)}, m.T(), opts);
  if (lr.status != SolveStatus::Solved) return detail::failed<LimitSolution>(lr);
  sol.S = std::move(lr.traj.at("S"));
  sol.r = std::move(lr.traj.at("r"));

  Outcome<LimitSolution> out;
  out.value = std::move(sol);
  return out;
}

struct Lambda13Solution {
  MatrixTrajectory Lambda1, Lambda3;
};

/// The equivalent (Lambda1, Lambda3) formulation, solved independently.
inline Outcome<Lambda13Solution> solve_limit_lambda13(const Model& m, const OdeOptions& opts = {}) {
  const Index n = m.n();
  OdeSystem sys;
  sys.blocks = {{"Lambda1", n, n, true}, {"Lambda3", n, n, true}};
  sys.rhs = [&m](double, const Blocks& y) { return Blocks{psi1(m, y[0]), psi3(m, y[0], y[1])}; };
  sys.constraints = {
      {"R1", [&m](double, const Blocks& y) { return r1(m, y[0]); }},
      {"R2", [&m](double, const Blocks& y) { return r2(m, y[0], y[1] - y[0]); }},
  };
  OdeResult res = integrate_backward(sys, {m.params.QF, m.weights.Q3F}, m.T(), opts);
  if (res.status != SolveStatus::Solved) return detail::failed<Lambda13Solution>(res);
  Outcome<Lambda13Solution> out;
  out.value = Lambda13Solution{std::move(res.traj.at("Lambda1")), std::move(res.traj.at("Lambda3"))};
  return out;
}

struct SolvabilityVerdict {
  bool solvable = false;
  SolveStatus status = SolveStatus::Solved;
  double failure_time = 0.0;
  std::string failed_constraint;  // "R1", "R2" or empty for blow-up
};

/// Asymptotic solvability holds iff the limiting (Lambda1, Lambda2) system
/// has a solution on [0, T].
inline SolvabilityVerdict asymptotic_solvability(const Model& m, const OdeOptions& opts = {}) {
  const OdeSystem sys = limit_lambda_system(m);
  const OdeResult res = integrate_backward(sys, {m.params.QF, m.weights.QGammaF}, m.T(), opts);
  SolvabilityVerdict v;
  v.status = res.status;
  v.solvable = res.status == SolveStatus::Solved;
  if (!v.solvable) {
    v.failure_time = res.t_fail;
    v.failed_constraint = res.constraint;
  }
  return v;
}

struct ProbeReport {
  bool holds_for_Lambda1 = false;
  bool holds_for_Lambda3 = false;
  double margin_Lambda1 = 0.0;  // min over nodes of min eig(R + B1^T tL1 B1 - K)
  double margin_Lambda3 = 0.0;  // min over nodes of min eig(R + B1^T L1 B1 + B0^T tL3 B0 - K)
  bool lambda1_solved = false;
};

/// Comparison-ODE sufficient conditions for solvability with a constant
/// positive definite K. Requires Q >= 0 and QF >= 0.
inline ProbeReport sufficient_probe(const Model& m, const MatrixXd& K, const OdeOptions& opts = {}) {
  const auto& p = m.params;
  if (min_eig(p.Q) < -1e-10 || min_eig(p.QF) < -1e-10) {
    throw Error(ErrorKind::PreconditionViolated, "probe requires Q >= 0 and QF >= 0");
  }
  if (K.rows() != m.n1() || K.cols() != m.n1()) throw Error(ErrorKind::DimensionMismatch, "K must be n1 x n1");
  if (min_eig(K) <= 0) throw Error(ErrorKind::PreconditionViolated, "K must be positive definite");
  const Index n = m.n();
  const MatrixXd Kinv = sym_inverse(K, "K");
  const double tol = 1e-9;

  // Lambda1 tilde: standard Riccati with K as control weight.
  OdeSystem s1;
  s1.blocks = {{"tLambda1", n, n, true}};
  s1.rhs = [&](double, const Blocks& y) {
    const MatrixXd& L = y[0];
    return Blocks{symmetrize(L * p.B * Kinv * p.B.transpose() * L - L * p.A - p.A.transpose() * L - p.Q)};
  };
  OdeOptions loose = opts;
  loose.pos_tol = -1e300;
  const OdeResult t1 = integrate_backward(s1, {p.QF}, m.T(), loose);
  ProbeReport rep;
  rep.margin_Lambda1 = std::numeric_limits<double>::infinity();
  for (const auto& L : t1.traj.at("tLambda1").values()) {
    rep.margin_Lambda1 = std::min(rep.margin_Lambda1, min_eig(p.R + p.B1.transpose() * L * p.B1 - K));
  }
  rep.holds_for_Lambda1 = t1.status == SolveStatus::Solved && rep.margin_Lambda1 >= -tol;

  // Lambda1 from its own Riccati equation drives the Lambda3 comparison.
  OdeSystem sl;
  sl.blocks = {{"Lambda1", n, n, true}};
  sl.rhs = [&m](double, const Blocks& y) { return Blocks{psi1(m, y[0])}; };
  sl.constraints = {{"R1", [&m](double, const Blocks& y) { return r1(m, y[0]); }}};
  const OdeResult l1 = integrate_backward(sl, {p.QF}, m.T(), opts);
  rep.lambda1_solved = l1.status == SolveStatus::Solved;
  rep.margin_Lambda3 = -std::numeric_limits<double>::infinity();
  if (!rep.lambda1_solved) return rep;

  const MatrixTrajectory& L1 = l1.traj.at("Lambda1");
  const MatrixXd AG = p.A + p.G;
  OdeSystem s3;
  s3.blocks = {{"tLambda3", n, n, true}};
  s3.rhs = [&](double, const Blocks& y) {
    const MatrixXd& L = y[0];
    return Blocks{symmetrize(L * p.B * Kinv * p.B.transpose() * L - L * AG - AG.transpose() * L - m.weights.Q3)};
  };
  const OdeResult t3 = integrate_backward(s3, {m.weights.Q3F}, m.T(), loose);
  const auto& tl3 = t3.traj.at("tLambda3");
  rep.margin_Lambda3 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tl3.size(); ++i) {
    const double t = tl3.grid()[i];
    const MatrixXd W = p.R + p.B1.transpose() * L1.at(t) * p.B1 + p.B0.transpose() * tl3.value(i) * p.B0;
    rep.margin_Lambda3 = std::min(rep.margin_Lambda3, min_eig(W - K));
  }
  rep.holds_for_Lambda3 = t3.status == SolveStatus::Solved && rep.margin_Lambda3 >= -tol;
  return rep;
}

struct InterpretationGains {
  MatrixTrajectory g1, g2;  // n1 x n
};

/// Feedback gains of the two single-agent problems whose value functions are
/// Lambda1 and Lambda3. The control is reported as printed in the source
/// derivation, u = +g X, without the minus sign the other controls carry; the
/// optimal feedback of those problems is u = -g X.
inline InterpretationGains interpretation_gains(const Model& m, const LimitSolution& lim) {
  const auto& p = m.params;
  std::vector<MatrixXd> g1, g2;
  for (std::size_t i = 0; i < lim.Lambda1.size(); ++i) {
    const MatrixXd& L1 = lim.Lambda1.value(i);
    const MatrixXd& L3 = lim.Lambda3.value(i);
    g1.push_back(sym_inverse(r1(m, L1), "R1") * p.B.transpose() * L1);
    g2.push_back(sym_inverse(p.R + p.B1.transpose() * L1 * p.B1 + p.B0.transpose() * L3 * p.B0, "R2") *
                 p.B.transpose() * L3);
  }
  return {MatrixTrajectory::from_samples(lim.Lambda1.grid(), g1),
          MatrixTrajectory::from_samples(lim.Lambda1.grid(), g2)};
}

}  // namespace mflq
