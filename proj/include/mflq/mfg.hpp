#pragma once

#include "mflq/limit_riccati.hpp"

namespace mflq {

struct MfgSolution {
  MatrixTrajectory Lambda1g, Lambda2g, Lambda3g, Lambda4g;
  MatrixTrajectory min_eig_R1;
};

/// Nash equilibrium coefficients of the mean field game with the same
/// dynamics and individual costs.
inline OdeSystem mfg_system(const Model& m) {
  const Index n = m.n();
  OdeSystem sys;
  sys.blocks = {{"Lambda1g", n, n, true}, {"Lambda2g", n, n, false}, {"Lambda3g", n, n, false},
                {"Lambda4g", n, n, false}};
  sys.rhs = [&m](double, const Blocks& y) {
    const auto& p = m.params;
    const MatrixXd &L1 = y[0], &L2 = y[1], &L3 = y[2], &L4 = y[3];
    const MatrixXd Hg = sym_inverse(r1(m, L1), "R1");
    const MatrixXd BHB = p.B * Hg * p.B.transpose();
    const MatrixXd &A = p.A, &G = p.G;
    const MatrixXd QG = p.Q * p.Gamma;
    const MatrixXd GQG = p.Gamma.transpose() * p.Q * p.Gamma;
    const MatrixXd L2t = L2.transpose();
    const MatrixXd sum4 = L1 + L2 + L2t + L4;
    const MatrixXd common = (L1 + L2t) * p.B * Hg * p.B0.transpose() * sum4 * p.B0 * Hg * p.B.transpose() * (L1 + L2);

    MatrixXd d2 = L2 * BHB * L2 + L2 * BHB * L1 + L1 * BHB * L2 - L1 * G - L2 * (A + G) - A.transpose() * L2 + QG;
    MatrixXd d3 = L3 * BHB * L1 + L1 * BHB * L3 + L4 * BHB * L2 + L2t * BHB * (L2 + L4) -
                  L1 * p.B * Hg * p.B1.transpose() * L3 * p.B1 * Hg * p.B.transpose() * L1 - common - L3 * A -
                  (L2t + L4.transpose()) * G - A.transpose() * L3 - G.transpose() * (L2 + L4) - GQG;
    MatrixXd d4 = L4 * BHB * (L1 + L2) + L1 * BHB * L4 + L2t * BHB * (L2 + L4) - common - (L2t + L4) * G - L4 * A -
                  G.transpose() * (L2 + L4) - A.transpose() * L4 - GQG;
    return Blocks{psi1(m, L1), d2, d3, d4};
  };
  sys.constraints = {{"R1", [&m](double, const Blocks& y) { return r1(m, y[0]); }}};
  return sys;
}

inline Outcome<MfgSolution> solve_mfg(const Model& m, const OdeOptions& opts = {}) {
  const auto& p = m.params;
  const MatrixXd GQG = p.GammaF.transpose() * p.QF * p.GammaF;
  const OdeSystem sys = mfg_system(m);
  OdeResult res = integrate_backward(sys, {p.QF, MatrixXd(-p.QF * p.GammaF), GQG, GQG}, m.T(), opts);
  if (res.status != SolveStatus::Solved) return detail::failed<MfgSolution>(res);
  MfgSolution s;
  s.Lambda1g = std::move(res.traj.at("Lambda1g"));
  s.Lambda2g = std::move(res.traj.at("Lambda2g"));
  s.Lambda3g = std::move(res.traj.at("Lambda3g"));
  s.Lambda4g = std::move(res.traj.at("Lambda4g"));
  s.min_eig_R1 = std::move(res.margins.at("R1"));
  Outcome<MfgSolution> out;
  out.value = std::move(s);
  return out;
}

/// Lambda1g + Lambda2g + Lambda2g^T + Lambda4g.
inline MatrixXd mfg_mean_weight(const MfgSolution& g, double t) {
  const MatrixXd l2 = g.Lambda2g.at(t);
  return g.Lambda1g.at(t) + l2 + l2.transpose() + g.Lambda4g.at(t);
}

/// mfg_mean_weight minus Lambda3 of the social problem, on the MFG grid.
inline MatrixTrajectory mfg_difference(const MfgSolution& g, const LimitSolution& lim) {
  std::vector<MatrixXd> v;
  for (double t : g.Lambda1g.grid()) v.push_back(mfg_mean_weight(g, t) - lim.Lambda3.at(t));
  return MatrixTrajectory::from_samples(g.Lambda1g.grid(), v);
}

struct MfgComparison {
  double J_soc_bar = 0;
  double J_mfg_bar = 0;
  double gain = 0;
  double lambda1_distance = 0;  // sup |Lambda1g - Lambda1|
};

/// Asymptotic per-agent costs of the social optimum and of the Nash
/// equilibrium. Requires D = D0 = 0.
inline MfgComparison compare(const Model& m, const InitialLaw& law, const LimitSolution& lim, const MfgSolution& g) {
  const auto& p = m.params;
  if (p.D.cwiseAbs().maxCoeff() > 0 || p.D0.cwiseAbs().maxCoeff() > 0) {
    throw Error(ErrorKind::PreconditionViolated, "comparison requires D = D0 = 0");
  }
  const VectorXd& mu = law.mu0;
  MfgComparison c;
  c.J_soc_bar = (lim.Lambda1.at(0) * law.sigma0).trace() + mu.dot((lim.Lambda1.at(0) + lim.Lambda2.at(0)) * mu);
  c.J_mfg_bar = (g.Lambda1g.at(0) * law.sigma0).trace() + mu.dot(mfg_mean_weight(g, 0) * mu);
  c.gain = c.J_mfg_bar - c.J_soc_bar;
  c.lambda1_distance = sup_distance(g.Lambda1g, lim.Lambda1);
  return c;
}

inline MfgComparison compare(const Model& m, const InitialLaw& law, const OdeOptions& opts = {}) {
  auto lim = solve_limit(m, std::nullopt, opts);
  auto g = solve_mfg(m, opts);
  if (!lim.solved() || !g.solved()) throw Error(ErrorKind::PreconditionViolated, "limit or game system not solvable");
  return compare(m, law, *lim, *g);
}

}  // namespace mflq
