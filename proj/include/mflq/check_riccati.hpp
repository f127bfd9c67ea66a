#pragma once

#include "mflq/gains.hpp"

namespace mflq {

/// Rescaled value-function coefficients of the social cost under the
/// decentralized control at population size N.
struct CheckSolution {
  int N = 1;
  MatrixTrajectory cLambda1N, cLambda2N, cLambda12N, cLambda22N, cS1N, cS2N, crN;
};

inline OdeSystem check_system(const Model& m, int N, const GainSet& dec) {
  const Index n = m.n();
  OdeSystem sys;
  sys.blocks = {{"cLambda1N", n, n, true}, {"cLambda2N", n, n, true}, {"cLambda12N", n, n, false},
                {"cLambda22N", n, n, true}, {"cS1N", n, 1, false},     {"cS2N", n, 1, false},
                {"crN", 1, 1, false}};
  sys.rhs = [&m, N, &dec](double t, const Blocks& y) {
    const auto& p = m.params;
    const double nn = N;
    const GainValues g = dec.at(t);
    const MatrixXd& Th = g.Theta;
    const MatrixXd& Th1 = g.Theta1;
    const MatrixXd& Th2 = g.Theta2;
    const MatrixXd &L1 = y[0], &L2 = y[1], &L12 = y[2], &L22 = y[3], &S1 = y[4], &S2 = y[5];
    const MatrixXd &A = p.A, &B = p.B, &B0 = p.B0, &B1 = p.B1, &D = p.D, &D0 = p.D0, &G = p.G;
    const MatrixXd AG = A + G;
    const MatrixXd Z0 = -B0 * (Th + Th1);
    const MatrixXd Z1 = AG - B * (Th + Th1);
    const MatrixXd R1c = r1(m, L1);
    const MatrixXd R2c = r2(m, L1, L2);
    const MatrixXd L3 = L1 + L2;
    const MatrixXd Lw = L1 + (1.0 - 1.0 / nn) * L2;
    const MatrixXd dev = D0 - B0 * Th2;  // common-noise intercept under the control
    const MatrixXd q = B1.transpose() * L1 * D + B0.transpose() * L3 * D0;

    const MatrixXd cg1 =
        (Th.transpose() * B0.transpose() * Lw * B0 * Th + Lw * G + G.transpose() * Lw + m.weights.QGamma) / nn;
    const MatrixXd cg2 = -(Th.transpose() * B0.transpose() * L2 * B0 * Th + L2 * G + G.transpose() * L2) / nn;
    const MatrixXd cg12 = (-Th.transpose() * B0.transpose() * L2 * B0 * Th1 + L2 * B * Th1) / nn;
    const MatrixXd cg22 = -Th1.transpose() * B0.transpose() * L2 * B0 * Th1 / nn;
    const MatrixXd cg01 = (Th.transpose() * B0.transpose() * L2 * dev + L2 * B * Th2) / nn;
    const MatrixXd cg02 =
        (-Th1.transpose() * B0.transpose() * L2 * B0 * Th2 + Th1.transpose() * B0.transpose() * L2 * D0) / nn;
    const MatrixXd cg03 = (-Th2.transpose() * B0.transpose() * L2 * B0 * Th2 +
                           2.0 * D0.transpose() * L2 * B0 * Th2 - D0.transpose() * L2 * D0) /
                          nn;

    const MatrixXd ABT = A - B * Th;
    const MatrixXd AGBT = AG - B * Th;
    // Each F below is -d/dt of the corresponding unknown.
    MatrixXd F1 = Th.transpose() * R1c * Th + L1 * ABT + ABT.transpose() * L1 + p.Q + cg1;
    MatrixXd F2 = Th.transpose() * B0.transpose() * L3 * B0 * Th + L1 * G + G.transpose() * L1 + L2 * AGBT +
                  AGBT.transpose() * L2 + m.weights.QGamma + cg2;
    MatrixXd F12 = Th.transpose() * R2c * Th1 + Th.transpose() * B0.transpose() * L12 * B0 * (Th + Th1) -
                   L3 * B * Th1 + AGBT.transpose() * L12 + L12 * Z1 + cg12;
    MatrixXd F22 = Th1.transpose() * R2c * Th1 - L12.transpose() * B * Th1 - Th1.transpose() * B.transpose() * L12 +
                   L22 * Z1 + Z1.transpose() * L22 - Z0.transpose() * L12.transpose() * B0 * Th1 -
                   Th1.transpose() * B0.transpose() * L12 * Z0 + Z0.transpose() * L22 * Z0 + cg22;
    MatrixXd FS1 = Th.transpose() * R2c * Th2 - (L3 + L12) * B * Th2 -
                   Th.transpose() * (B.transpose() * S1 + q) - Th.transpose() * B0.transpose() * L12 * dev +
                   AG.transpose() * S1 + cg01;
    MatrixXd FS2 = Th1.transpose() * R2c * Th2 + Z1.transpose() * S2 - Th1.transpose() * (B.transpose() * S1 + q) +
                   (Z0.transpose() * L22 + Z0.transpose() * L12.transpose() - Th1.transpose() * B0.transpose() * L12) *
                       dev -
                   (L12.transpose() + L22) * B * Th2 + cg02;
    const MatrixXd lin = (S1 + S2).transpose() * B + D.transpose() * L1 * B1 + D0.transpose() * L3 * B0;
    MatrixXd Fr = Th2.transpose() * R2c * Th2 + D.transpose() * L1 * D + D0.transpose() * L3 * D0 - lin * Th2 -
                  Th2.transpose() * lin.transpose() + dev.transpose() * (L22 + L12 + L12.transpose()) * dev + cg03;
    return Blocks{-symmetrize(F1), -symmetrize(F2), -F12, -symmetrize(F22), -FS1, -FS2, -Fr};
  };
  return sys;
}

/// Integrates the seven linear check equations backward. The limit solution
/// supplies the decentralized gains.
inline Outcome<CheckSolution> solve_check(const Model& m, int N, const LimitSolution& lim,
                                          const OdeOptions& opts = {}) {
  if (N < 1) throw Error(ErrorKind::InvalidArgument, "N must be >= 1");
  const Index n = m.n();
  const GainSet dec = decentralized_gains(m, lim);
  const OdeSystem sys = check_system(m, N, dec);
  const VectorXd K = lim.K.size() == n ? lim.K : VectorXd::Zero(n);
  Blocks term{MatrixXd(m.params.QF + m.weights.QGammaF / double(N)),
              m.weights.QGammaF,
              MatrixXd::Zero(n, n),
              MatrixXd::Zero(n, n),
              MatrixXd(K),
              MatrixXd::Zero(n, 1),
              MatrixXd::Zero(1, 1)};
  OdeResult res = integrate_backward(sys, term, m.T(), opts);
  if (res.status != SolveStatus::Solved) return detail::failed<CheckSolution>(res);
  CheckSolution c;
  c.N = N;
  c.cLambda1N = std::move(res.traj.at("cLambda1N"));
  c.cLambda2N = std::move(res.traj.at("cLambda2N"));
  c.cLambda12N = std::move(res.traj.at("cLambda12N"));
  c.cLambda22N = std::move(res.traj.at("cLambda22N"));
  c.cS1N = std::move(res.traj.at("cS1N"));
  c.cS2N = std::move(res.traj.at("cS2N"));
  c.crN = std::move(res.traj.at("crN"));
  Outcome<CheckSolution> out;
  out.value = std::move(c);
  return out;
}

/// Lambda1^N + Lambda2^N - (five-matrix sum of the check system) at time t.
inline MatrixXd check_sum_difference(const FiniteSolution& fin, const CheckSolution& c, double t) {
  const MatrixXd l12 = c.cLambda12N.at(t);
  return fin.Lambda1N.at(t) + fin.Lambda2N.at(t) -
         (c.cLambda1N.at(t) + c.cLambda2N.at(t) + l12 + l12.transpose() + c.cLambda22N.at(t));
}

}  // namespace mflq
