#pragma once

#include <optional>
#include <vector>

#include "mflq/limit_riccati.hpp"

namespace mflq {

struct EnHn {
  MatrixXd E, H;
};

/// E^N and H^N, the diagonal and off-diagonal blocks of (R + 2 M2(P))^{-1}
/// in the rescaled variables.
inline EnHn en_hn(const Model& m, int N, const MatrixXd& L1, const MatrixXd& L2) {
  const auto& p = m.params;
  const double n = N;
  const MatrixXd W = r2(m, L1, L2) - p.B0.transpose() * L2 * p.B0 / n;
  const MatrixXd R1inv = sym_inverse(r1(m, L1), "R1");
  EnHn out;
  out.E = symmetrize((sym_inverse(W, "R2 - B0^T L2 B0 / N") - R1inv) / n);
  out.H = out.E + R1inv;
  return out;
}

/// xi_N = N E^N + R1^{-1} - R2^{-1}, evaluated through the cancellation-free
/// product (1/N) R2(L1, (1-1/N) L2)^{-1} B0^T L2 B0 R2(L1, L2)^{-1}.
inline MatrixXd xi_n(const Model& m, int N, const MatrixXd& L1, const MatrixXd& L2) {
  const auto& p = m.params;
  const double n = N;
  const MatrixXd a = sym_inverse(r2(m, L1, (1.0 - 1.0 / n) * L2), "R2");
  const MatrixXd b = sym_inverse(r2(m, L1, L2), "R2");
  return symmetrize(a * p.B0.transpose() * L2 * p.B0 * b / n);
}

/// Literal N E^N + R1^{-1} - R2^{-1}; kept for cross-checking xi_n.
inline MatrixXd xi_n_direct(const Model& m, int N, const MatrixXd& L1, const MatrixXd& L2) {
  const EnHn eh = en_hn(m, N, L1, L2);
  return N * eh.E + sym_inverse(r1(m, L1), "R1") - sym_inverse(r2(m, L1, L2), "R2");
}

struct G12 {
  MatrixXd g1, g2;
};

inline G12 g1_g2(const Model& m, int N, const MatrixXd& L1, const MatrixXd& L2) {
  const auto& p = m.params;
  const double n = N;
  const EnHn eh = en_hn(m, N, L1, L2);
  const MatrixXd BEBt = p.B * eh.E * p.B.transpose();
  const MatrixXd R1inv = sym_inverse(r1(m, L1), "R1");
  const MatrixXd& G = p.G;
  G12 out;
  out.g1 = L1 * BEBt * L1 + (1.0 - 1.0 / n) * (L2 * BEBt * L1 + L1 * BEBt * L2) +
           (1.0 / n - 1.0 / (n * n)) * L2 * p.B * (eh.H + (n - 2.0) * eh.E) * p.B.transpose() * L2 -
           (1.0 / n) * ((L1 * G + G.transpose() * L1) + (1.0 - 1.0 / n) * (L2 * G + G.transpose() * L2)) -
           m.weights.QGamma / n;
  const MatrixXd L3 = L1 + L2;
  out.g2 = L3 * p.B * xi_n(m, N, L1, L2) * p.B.transpose() * L3 -
           (2.0 / n) * L2 * p.B * R1inv * p.B.transpose() * L2 + (1.0 / n - 2.0) * L2 * BEBt * L2 -
           L1 * BEBt * L2 - L2 * BEBt * L1 + (L2 * G + G.transpose() * L2) / n;
  out.g1 = symmetrize(out.g1);
  out.g2 = symmetrize(out.g2);
  return out;
}

/// g01 and g02 of the finite-N affine system.
inline std::pair<MatrixXd, MatrixXd> g01_g02(const Model& m, int N, const MatrixXd& L1, const MatrixXd& L2,
                                             const MatrixXd& S) {
  const auto& p = m.params;
  const double n = N;
  const MatrixXd Lw = L1 + (1.0 - 1.0 / n) * L2;
  const MatrixXd L3 = L1 + L2;
  const MatrixXd Winv = sym_inverse(r2(m, L1, L2) - p.B0.transpose() * L2 * p.B0 / n, "R2 - B0^T L2 B0 / N");
  const MatrixXd R2inv = sym_inverse(r2(m, L1, L2), "R2");
  const MatrixXd qw = detail::affine_q(p, S, L1, Lw);
  const MatrixXd q3 = detail::affine_q(p, S, L1, L3);
  MatrixXd g01 = Lw * p.B * Winv * qw - L3 * p.B * R2inv * q3;
  MatrixXd g02 = qw.transpose() * Winv * qw - q3.transpose() * R2inv * q3 + p.D0.transpose() * L2 * p.D0 / n;
  return {g01, g02};
}

struct FiniteSolution {
  int N = 1;
  MatrixTrajectory Lambda1N, Lambda2N, SN, rN;
  MatrixTrajectory EN, HN;  // sampled on the Lambda grid
  MatrixTrajectory min_eig_R1, min_eig_R2, min_eig_R2N;
  VectorXd K;
};

inline OdeSystem finite_lambda_system(const Model& m, int N) {
  const Index n = m.n();
  OdeSystem sys;
  sys.blocks = {{"Lambda1N", n, n, true}, {"Lambda2N", n, n, true}};
  sys.rhs = [&m, N](double, const Blocks& y) {
    const G12 g = g1_g2(m, N, y[0], y[1]);
    return Blocks{MatrixXd(psi1(m, y[0]) + g.g1), MatrixXd(psi2(m, y[0], y[1]) + g.g2)};
  };
  sys.constraints = {
      {"R1", [&m](double, const Blocks& y) { return r1(m, y[0]); }},
      {"R2", [&m](double, const Blocks& y) { return r2(m, y[0], y[1]); }},
      {"R2N",
       [&m, N](double, const Blocks& y) {
         return MatrixXd(r2(m, y[0], y[1]) - m.params.B0.transpose() * y[1] * m.params.B0 / double(N));
       }},
  };
  return sys;
}

/// Finite-N rescaled Riccati system and its affine (S^N, r^N) companion.
inline Outcome<FiniteSolution> solve_finite(const Model& m, int N, const std::optional<VectorXd>& K = std::nullopt,
                                            const OdeOptions& opts = {}) {
  if (N < 1) throw Error(ErrorKind::InvalidArgument, "N must be >= 1");
  const VectorXd k = detail::terminal_linear_or_zero(m, K);
  const Index n = m.n();
  const OdeSystem sys = finite_lambda_system(m, N);
  const MatrixXd L1T = m.params.QF + m.weights.QGammaF / double(N);
  OdeResult res = integrate_backward(sys, {L1T, m.weights.QGammaF}, m.T(), opts);
  if (res.status != SolveStatus::Solved) return detail::failed<FiniteSolution>(res);

  FiniteSolution sol;
  sol.N = N;
  sol.K = k;
  sol.Lambda1N = std::move(res.traj.at("Lambda1N"));
  sol.Lambda2N = std::move(res.traj.at("Lambda2N"));
  sol.min_eig_R1 = std::move(res.margins.at("R1"));
  sol.min_eig_R2 = std::move(res.margins.at("R2"));
  sol.min_eig_R2N = std::move(res.margins.at("R2N"));
  {
    std::vector<MatrixXd> E, H;
    for (std::size_t i = 0; i < sol.Lambda1N.size(); ++i) {
      const EnHn eh = en_hn(m, N, sol.Lambda1N.value(i), sol.Lambda2N.value(i));
      E.push_back(eh.E);
      H.push_back(eh.H);
    }
    sol.EN = MatrixTrajectory::from_samples(sol.Lambda1N.grid(), E);
    sol.HN = MatrixTrajectory::from_samples(sol.Lambda1N.grid(), H);
  }

  OdeSystem lin;
  lin.blocks = {{"SN", n, 1, false}, {"rN", 1, 1, false}};
  const MatrixTrajectory& L1 = sol.Lambda1N;
  const MatrixTrajectory& L2 = sol.Lambda2N;
  lin.rhs = [&](double t, const Blocks& y) {
    const MatrixXd l1 = L1.at(t), l2 = L2.at(t);
    const auto [g01, g02] = g01_g02(m, N, l1, l2, y[0]);
    return Blocks{MatrixXd(phi1(m, l1, l2, y[0]) + g01), MatrixXd(phi2(m, l1, l2, y[0]) + g02)};
  };
  OdeResult lr = integrate_backward(lin, {MatrixXd(k), MatrixXd::Zero(1, 1)}, m.T(), opts);
  if (lr.status != SolveStatus::Solved) return detail::failed<FiniteSolution>(lr);
  sol.SN = std::move(lr.traj.at("SN"));
  sol.rN = std::move(lr.traj.at("rN"));

  Outcome<FiniteSolution> out;
  out.value = std::move(sol);
  return out;
}

struct ConvergenceRow {
  int N = 0;
  double e1 = 0, e2 = 0, eS = 0, er = 0;
};

/// Sup-norm distances of the finite-N solution from the limit, one row per N.
inline std::vector<ConvergenceRow> convergence_table(const Model& m, const std::vector<int>& Ns,
                                                     const std::optional<VectorXd>& K = std::nullopt,
                                                     const OdeOptions& opts = {}) {
  auto lim = solve_limit(m, K, opts);
  if (!lim.solved()) throw Error(ErrorKind::PreconditionViolated, "limit system is not solvable");
  std::vector<ConvergenceRow> rows;
  for (int N : Ns) {
    auto fin = solve_finite(m, N, K, opts);
    if (!fin.solved()) {
      throw Error(ErrorKind::PreconditionViolated, "finite-N system failed at N=" + std::to_string(N));
    }
    ConvergenceRow row;
    row.N = N;
    row.e1 = sup_distance(fin->Lambda1N, lim->Lambda1);
    row.e2 = sup_distance(fin->Lambda2N, lim->Lambda2);
    row.eS = sup_distance(fin->SN, lim->S);
    row.er = sup_distance(fin->rN, lim->r);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mflq
