#pragma once

#include <algorithm>
#include <vector>

#include "mflq/check_riccati.hpp"

namespace mflq {

inline constexpr Index kOracleCap = 64;

/// Stacked N-agent system: state X = (X_1, ..., X_N), control U = (u_1, ..., u_N).
struct BigSystem {
  int N = 1;
  Index n = 1, n1 = 1;
  MatrixXd A;     // Nn x Nn
  MatrixXd Bhat;  // Nn x Nn1
  MatrixXd B0;    // Nn x n1
  MatrixXd D0;    // Nn x 1
  std::vector<MatrixXd> Bk, Dk;  // Nn x n1, Nn x 1
  std::vector<MatrixXd> e;       // n1 x Nn1 selectors
  MatrixXd Q, QF;                // Nn x Nn
  MatrixXd R;                    // Nn1 x Nn1
  MatrixXd Ihat;                 // n1 x Nn1
};

inline BigSystem assemble(const Model& m, int N, Index cap = kOracleCap) {
  if (N < 1) throw Error(ErrorKind::InvalidArgument, "N must be >= 1");
  const auto& p = m.params;
  if (N * p.n > cap) {
    throw Error(ErrorKind::CapExceeded, "N*n = " + std::to_string(N * p.n) + " exceeds oracle cap " +
                                             std::to_string(cap));
  }
  const double dn = N;
  const MatrixXd I = MatrixXd::Identity(N, N);
  const MatrixXd ones = MatrixXd::Ones(N, N);
  const MatrixXd col = MatrixXd::Ones(N, 1);
  BigSystem s;
  s.N = N;
  s.n = p.n;
  s.n1 = p.n1;
  s.A = kron(I, p.A) + kron(ones, p.G / dn);
  s.Bhat = kron(I, p.B);
  s.B0 = kron(col, p.B0 / dn);
  s.D0 = kron(col, p.D0);
  s.Q = symmetrize(kron(I, p.Q) + kron(ones, m.weights.QGamma / dn));
  s.QF = symmetrize(kron(I, p.QF) + kron(ones, m.weights.QGammaF / dn));
  s.R = kron(I, p.R);
  s.Ihat = kron(MatrixXd::Ones(1, N), MatrixXd::Identity(p.n1, p.n1));
  for (int k = 0; k < N; ++k) {
    MatrixXd ek = MatrixXd::Zero(N, 1);
    ek(k, 0) = 1.0;
    s.Bk.push_back(kron(ek, p.B1));
    s.Dk.push_back(kron(ek, p.D));
    s.e.push_back(kron(ek, MatrixXd::Identity(p.n1, p.n1)).transpose());
  }
  return s;
}

inline double big_m0(const BigSystem& s, const MatrixXd& Z) {
  double v = 0.5 * (s.D0.transpose() * Z * s.D0)(0, 0);
  for (int i = 0; i < s.N; ++i) v += 0.5 * (s.Dk[i].transpose() * Z * s.Dk[i])(0, 0);
  return v;
}

inline MatrixXd big_m1(const BigSystem& s, const MatrixXd& Z) {
  MatrixXd v = s.D0.transpose() * Z * s.B0 * s.Ihat;
  for (int i = 0; i < s.N; ++i) v += s.Dk[i].transpose() * Z * s.Bk[i] * s.e[i];
  return v;
}

inline MatrixXd big_m2(const BigSystem& s, const MatrixXd& Z) {
  MatrixXd v = 0.5 * s.Ihat.transpose() * s.B0.transpose() * Z * s.B0 * s.Ihat;
  for (int i = 0; i < s.N; ++i) v += 0.5 * s.e[i].transpose() * s.Bk[i].transpose() * Z * s.Bk[i] * s.e[i];
  return v;
}

struct FullSolution {
  int N = 1;
  MatrixTrajectory P, Sbold, rbold, min_eig_margin;
};

/// Solves the unstructured Nn-dimensional Riccati system for P, then the
/// affine S and r.
inline Outcome<FullSolution> solve_full(const Model& m, int N, const std::optional<VectorXd>& K = std::nullopt,
                                        const OdeOptions& opts = {}) {
  const BigSystem s = assemble(m, N);
  const Index nn = N * m.n();
  const VectorXd k = detail::terminal_linear_or_zero(m, K);

  OdeSystem sys;
  sys.blocks = {{"P", nn, nn, true}};
  sys.rhs = [&s](double, const Blocks& y) {
    const MatrixXd& P = y[0];
    const MatrixXd W = sym_inverse(s.R + 2.0 * big_m2(s, P), "R + 2 M2(P)");
    return Blocks{symmetrize(P * s.Bhat * W * s.Bhat.transpose() * P - P * s.A - s.A.transpose() * P - s.Q)};
  };
  sys.constraints = {{"R+2M2(P)", [&s](double, const Blocks& y) { return MatrixXd(s.R + 2.0 * big_m2(s, y[0])); }}};
  OdeResult res = integrate_backward(sys, {s.QF}, m.T(), opts);
  if (res.status != SolveStatus::Solved) return detail::failed<FullSolution>(res);

  FullSolution sol;
  sol.N = N;
  sol.P = std::move(res.traj.at("P"));
  sol.min_eig_margin = std::move(res.margins.at("R+2M2(P)"));

  OdeSystem lin;
  lin.blocks = {{"S", nn, 1, false}, {"r", 1, 1, false}};
  const MatrixTrajectory& Pt = sol.P;
  lin.rhs = [&](double t, const Blocks& y) {
    const MatrixXd P = Pt.at(t);
    const MatrixXd W = sym_inverse(s.R + 2.0 * big_m2(s, P), "R + 2 M2(P)");
    const MatrixXd q = s.Bhat.transpose() * y[0] + big_m1(s, P).transpose();
    return Blocks{MatrixXd(P * s.Bhat * W * q - s.A.transpose() * y[0]),
                  MatrixXd(q.transpose() * W * q - MatrixXd::Constant(1, 1, 2.0 * big_m0(s, P)))};
  };
  const MatrixXd Sterm = kron(MatrixXd::Ones(N, 1), MatrixXd(k));
  OdeResult lr = integrate_backward(lin, {Sterm, MatrixXd::Zero(1, 1)}, m.T(), opts);
  if (lr.status != SolveStatus::Solved) return detail::failed<FullSolution>(lr);
  sol.Sbold = std::move(lr.traj.at("S"));
  sol.rbold = std::move(lr.traj.at("r"));
  Outcome<FullSolution> out;
  out.value = std::move(sol);
  return out;
}

inline constexpr double kBlockTol = 1e-8;

struct PBlocks {
  MatrixXd Pi1, Pi2;  // Pi2 is zero when N = 1
  double spread = 0;  // largest deviation from the two-block pattern
};

/// Splits an Nn x Nn matrix into its diagonal / off-diagonal n x n blocks.
inline PBlocks two_block_split(const MatrixXd& P, int N, Index n) {
  PBlocks b;
  b.Pi1 = P.block(0, 0, n, n);
  b.Pi2 = N > 1 ? MatrixXd(P.block(n, 0, n, n)) : MatrixXd::Zero(n, n);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const MatrixXd& ref = i == j ? b.Pi1 : b.Pi2;
      b.spread = std::max(b.spread, (P.block(i * n, j * n, n, n) - ref).cwiseAbs().maxCoeff());
    }
  if (N > 1) b.spread = std::max(b.spread, asymmetry(b.Pi2));
  return b;
}

/// Largest deviation of the n-blocks of a stacked Nn x c matrix from the first block.
inline double stacked_spread(const MatrixXd& S, int N, Index n) {
  double d = 0;
  for (int i = 1; i < N; ++i) d = std::max(d, (S.block(i * n, 0, n, S.cols()) - S.block(0, 0, n, S.cols())).cwiseAbs().maxCoeff());
  return d;
}

struct Extraction {
  int N = 1;
  MatrixTrajectory Pi1N, Pi2N;
  MatrixTrajectory Lambda1N, Lambda2N, SN, rN;  // Lambda2N is empty for N = 1
  double max_spread = 0;
};

/// Verifies the two-block structure of P and the stacked structure of S at
/// every node, and returns the rescaled blocks.
inline Extraction extract_blocks(const Model& m, const FullSolution& full, double tol = kBlockTol) {
  const int N = full.N;
  const Index n = m.n();
  Extraction ex;
  ex.N = N;
  const auto pi1 = full.P.map_linear([&](const MatrixXd& P) { return MatrixXd(P.block(0, 0, n, n)); });
  for (const auto& P : full.P.values()) ex.max_spread = std::max(ex.max_spread, two_block_split(P, N, n).spread);
  for (const auto& S : full.Sbold.values()) ex.max_spread = std::max(ex.max_spread, stacked_spread(S, N, n));
  if (ex.max_spread > tol) {
    throw Error(ErrorKind::StructureViolation,
                "block structure deviates by " + std::to_string(ex.max_spread));
  }
  ex.Pi1N = pi1;
  ex.Lambda1N = pi1;
  if (N > 1) {
    ex.Pi2N = full.P.map_linear([&](const MatrixXd& P) { return MatrixXd(P.block(n, 0, n, n)); });
    ex.Lambda2N = ex.Pi2N.map_linear([&](const MatrixXd& x) { return MatrixXd(double(N) * x); });
  }
  ex.SN = full.Sbold.map_linear([&](const MatrixXd& S) { return MatrixXd(S.block(0, 0, n, 1)); });
  ex.rN = full.rbold.map_linear([&](const MatrixXd& r) { return MatrixXd(r / double(N)); });
  return ex;
}

/// sup_t of the entrywise l1 norm of P divided by N.
inline double scaled_l1_norm(const FullSolution& full) {
  double v = 0;
  for (const auto& P : full.P.values()) v = std::max(v, P.cwiseAbs().sum() / full.N);
  return v;
}

/// Block matrix with F on the diagonal and K off the diagonal.
inline MatrixXd two_block_matrix(const MatrixXd& F, const MatrixXd& K, int N) {
  const MatrixXd I = MatrixXd::Identity(N, N);
  return kron(I, F - K) + kron(MatrixXd::Ones(N, N), K);
}

/// Eigenvalues predicted by the factorization: eig(F + (N-1) K) once and
/// eig(F - K) with multiplicity N - 1, sorted ascending.
inline VectorXd factorized_eigenvalues(const MatrixXd& F, const MatrixXd& K, int N) {
  const VectorXd a = sym_eigenvalues(F + (N - 1.0) * K);
  const VectorXd b = sym_eigenvalues(F - K);
  std::vector<double> all(a.data(), a.data() + a.size());
  for (int k = 0; k < N - 1; ++k) all.insert(all.end(), b.data(), b.data() + b.size());
  std::sort(all.begin(), all.end());
  return Eigen::Map<VectorXd>(all.data(), static_cast<Index>(all.size()));
}

struct EigCheck {
  bool match = false;
  double max_diff = 0;
};

inline EigCheck eig_factorization_check(const Model& m, const FullSolution& full, double t, double tol = 1e-7) {
  const int N = full.N;
  const auto& p = m.params;
  const BigSystem s = assemble(m, N);
  const MatrixXd P = full.P.at(t);
  const PBlocks b = two_block_split(P, N, m.n());
  const MatrixXd L1 = b.Pi1, L2 = double(N) * b.Pi2;
  const MatrixXd Kn = p.B0.transpose() * (L1 + (1.0 - 1.0 / N) * L2) * p.B0 / double(N);
  const MatrixXd Fn = Kn + r1(m, L1);
  const VectorXd direct = sym_eigenvalues(s.R + 2.0 * big_m2(s, P));
  const VectorXd pred = factorized_eigenvalues(Fn, Kn, N);
  EigCheck c;
  c.max_diff = (direct - pred).cwiseAbs().maxCoeff();
  c.match = c.max_diff <= tol;
  return c;
}

struct ValueReport {
  double J_soc = 0;
  double per_agent = 0;
};

/// Optimal social cost from the rescaled solution. With per-agent
/// covariances the trace term is summed over agents.
inline ValueReport optimal_value(const FiniteSolution& fin, const InitialLaw& law) {
  const int N = fin.N;
  const MatrixXd L1 = fin.Lambda1N.at(0), L2 = fin.Lambda2N.at(0), S = fin.SN.at(0);
  const double r = fin.rN.at(0)(0, 0);
  const VectorXd& mu = law.mu0;
  double tr = 0;
  for (int i = 0; i < N; ++i) tr += (L1 * law.sigma_of(i)).trace();
  const double mean_part = (mu.transpose() * (L1 + (1.0 - 1.0 / N) * L2) * mu)(0, 0) + 2.0 * (S.transpose() * mu)(0, 0) + r;
  ValueReport v;
  v.J_soc = tr + N * mean_part;
  v.per_agent = v.J_soc / N;
  return v;
}

/// Same quantity from the full solution: E V(0, X(0)).
inline ValueReport optimal_value(const FullSolution& full, const InitialLaw& law) {
  const int N = full.N;
  const Index n = law.mu0.size();
  const MatrixXd P = full.P.at(0);
  const VectorXd x = kron(MatrixXd::Ones(N, 1), MatrixXd(law.mu0));
  double tr = 0;
  for (int i = 0; i < N; ++i) tr += (P.block(i * n, i * n, n, n) * law.sigma_of(i)).trace();
  ValueReport v;
  v.J_soc = tr + (x.transpose() * P * x)(0, 0) + 2.0 * (x.transpose() * full.Sbold.at(0))(0, 0) + full.rbold.at(0)(0, 0);
  v.per_agent = v.J_soc / N;
  return v;
}

// ---------------------------------------------------------------------------
// Cost of a generic affine feedback on an affine closed loop.

/// Linear closed loop dY = (F Y + f) dt + sum_k (G_k Y + g_k) dW_k with running
/// cost Y^T M Y + 2 m^T Y + c and terminal cost Y^T Mf Y + 2 mf^T Y.
struct AffineLoop {
  Index dim = 0;
  std::function<void(double t, MatrixXd& F, MatrixXd& f, std::vector<MatrixXd>& G, std::vector<MatrixXd>& g,
                     MatrixXd& M, MatrixXd& mvec, double& c)>
      coeffs;
  MatrixXd Mf, mf;
};

struct LoopValue {
  MatrixTrajectory P, S, rho;  // value = Y^T P Y + 2 Y^T S + rho
};

/// Backward Feynman-Kac equations of the expected cost of an AffineLoop.
inline Outcome<LoopValue> evaluate_loop(const AffineLoop& loop, double T, const OdeOptions& opts = {}) {
  const Index d = loop.dim;
  OdeSystem sys;
  sys.blocks = {{"P", d, d, true}, {"S", d, 1, false}, {"rho", 1, 1, false}};
  sys.rhs = [&loop](double t, const Blocks& y) {
    MatrixXd F, f, M, mv;
    std::vector<MatrixXd> G, g;
    double c = 0;
    loop.coeffs(t, F, f, G, g, M, mv, c);
    const MatrixXd &P = y[0], &S = y[1];
    MatrixXd dP = P * F + F.transpose() * P + M;
    MatrixXd dS = F.transpose() * S + P * f + mv;
    double dr = 2.0 * (f.transpose() * S)(0, 0) + c;
    for (std::size_t k = 0; k < G.size(); ++k) {
      dP += G[k].transpose() * P * G[k];
      dS += G[k].transpose() * P * g[k];
      dr += (g[k].transpose() * P * g[k])(0, 0);
    }
    return Blocks{MatrixXd(-symmetrize(dP)), MatrixXd(-dS), MatrixXd::Constant(1, 1, -dr)};
  };
  OdeResult res = integrate_backward(sys, {loop.Mf, loop.mf, MatrixXd::Zero(1, 1)}, T, opts);
  if (res.status != SolveStatus::Solved) return detail::failed<LoopValue>(res);
  Outcome<LoopValue> out;
  out.value = LoopValue{std::move(res.traj.at("P")), std::move(res.traj.at("S")), std::move(res.traj.at("rho"))};
  return out;
}

/// Closed loop of the N-agent system under u_i = -Theta X_i - Theta1 Z - Theta2,
/// with Z the mean field limit co-state (decentralized) or, when
/// `centralized`, Z = X^(N) and no extra state.
inline AffineLoop decentralized_loop(const Model& m, const BigSystem& s, const GainSet& gains) {
  const auto& p = m.params;
  const int N = s.N;
  const Index n = s.n, nx = N * n, d = nx + n;
  AffineLoop loop;
  loop.dim = d;
  loop.Mf = MatrixXd::Zero(d, d);
  loop.Mf.topLeftCorner(nx, nx) = s.QF;
  loop.mf = MatrixXd::Zero(d, 1);
  loop.coeffs = [&m, &s, &gains, N, n, nx, d](double t, MatrixXd& F, MatrixXd& f, std::vector<MatrixXd>& G,
                                               std::vector<MatrixXd>& g, MatrixXd& M, MatrixXd& mv, double& c) {
    const auto& p = m.params;
    const GainValues gv = gains.at(t);
    const MatrixXd IN = MatrixXd::Identity(N, N);
    const MatrixXd col = MatrixXd::Ones(N, 1);
    // U = -L Y - l
    MatrixXd L(N * s.n1, d);
    L << kron(IN, gv.Theta), kron(col, gv.Theta1);
    const MatrixXd l = kron(col, gv.Theta2);
    const MatrixXd Z0 = -p.B0 * (gv.Theta + gv.Theta1);
    const MatrixXd Z1 = p.A + p.G - p.B * (gv.Theta + gv.Theta1);

    F = MatrixXd::Zero(d, d);
    F.topRows(nx) = -s.Bhat * L;
    F.topLeftCorner(nx, nx) += s.A;
    F.bottomRightCorner(n, n) = Z1;
    f = MatrixXd::Zero(d, 1);
    f.topRows(nx) = -s.Bhat * l;
    f.bottomRows(n) = -p.B * gv.Theta2;

    G.assign(N + 1, MatrixXd::Zero(d, d));
    g.assign(N + 1, MatrixXd::Zero(d, 1));
    for (int i = 0; i < N; ++i) {
      const MatrixXd C = s.Bk[i] * s.e[i];
      G[i].topRows(nx) = -C * L;
      g[i].topRows(nx) = s.Dk[i] - C * l;
    }
    const MatrixXd C0 = s.B0 * s.Ihat;
    G[N].topRows(nx) = -C0 * L;
    G[N].bottomRightCorner(n, n) = Z0;
    g[N].topRows(nx) = s.D0 - C0 * l;
    g[N].bottomRows(n) = p.D0 - p.B0 * gv.Theta2;

    M = L.transpose() * s.R * L;
    M.topLeftCorner(nx, nx) += s.Q;
    mv = L.transpose() * s.R * l;
    c = (l.transpose() * s.R * l)(0, 0);
  };
  (void)p;
  return loop;
}

/// Closed loop under the centralized feedback u_i = -Theta^N X_i - Theta1^N X^(N) - Theta2^N.
inline AffineLoop centralized_loop(const Model& m, const BigSystem& s, const GainSet& gains) {
  const int N = s.N;
  const Index n = s.n, nx = N * n;
  AffineLoop loop;
  loop.dim = nx;
  loop.Mf = s.QF;
  loop.mf = MatrixXd::Zero(nx, 1);
  loop.coeffs = [&s, &gains, N, n, nx](double t, MatrixXd& F, MatrixXd& f, std::vector<MatrixXd>& G,
                                       std::vector<MatrixXd>& g, MatrixXd& M, MatrixXd& mv, double& c) {
    const GainValues gv = gains.at(t);
    const MatrixXd IN = MatrixXd::Identity(N, N);
    const MatrixXd avg = MatrixXd::Ones(N, N) / double(N);
    const MatrixXd L = kron(IN, gv.Theta) + kron(avg, gv.Theta1);
    const MatrixXd l = kron(MatrixXd::Ones(N, 1), gv.Theta2);
    F = s.A - s.Bhat * L;
    f = -s.Bhat * l;
    G.assign(N + 1, MatrixXd::Zero(nx, nx));
    g.assign(N + 1, MatrixXd::Zero(nx, 1));
    for (int i = 0; i < N; ++i) {
      const MatrixXd C = s.Bk[i] * s.e[i];
      G[i] = -C * L;
      g[i] = s.Dk[i] - C * l;
    }
    const MatrixXd C0 = s.B0 * s.Ihat;
    G[N] = -C0 * L;
    g[N] = s.D0 - C0 * l;
    M = s.Q + L.transpose() * s.R * L;
    mv = L.transpose() * s.R * l;
    c = (l.transpose() * s.R * l)(0, 0);
    (void)n;
  };
  (void)m;
  return loop;
}

struct FullCheckSolution {
  int N = 1;
  LoopValue value;  // over Y = (x, xbar)
  // Rescaled blocks.
  MatrixTrajectory cLambda1N, cLambda2N, cLambda12N, cLambda22N, cS1N, cS2N, crN;
  double max_spread = 0;
};

/// Decentralized social cost on the full state (x, xbar), evaluated from the
/// generic closed-loop equations, with the block structure verified and the
/// rescaled blocks extracted.
inline Outcome<FullCheckSolution> solve_full_check(const Model& m, int N, const LimitSolution& lim,
                                                   const OdeOptions& opts = {}, double tol = kBlockTol) {
  const BigSystem s = assemble(m, N);
  const GainSet dec = decentralized_gains(m, lim);
  AffineLoop loop = decentralized_loop(m, s, dec);
  const Index n = m.n(), nx = N * n;
  if (lim.K.size() == n) loop.mf.topRows(nx) = kron(MatrixXd::Ones(N, 1), MatrixXd(lim.K));
  auto val = evaluate_loop(loop, m.T(), opts);
  Outcome<FullCheckSolution> out;
  if (!val.solved()) {
    out.status = val.status;
    out.failure_time = val.failure_time;
    out.partial = val.partial;
    return out;
  }
  FullCheckSolution fc;
  fc.N = N;
  fc.value = std::move(*val.value);
  const double dn = N;
  for (const auto& P : fc.value.P.values()) {
    fc.max_spread = std::max(fc.max_spread, two_block_split(P.topLeftCorner(nx, nx), N, n).spread);
    fc.max_spread = std::max(fc.max_spread, stacked_spread(P.topRightCorner(nx, n), N, n));
  }
  for (const auto& S : fc.value.S.values()) fc.max_spread = std::max(fc.max_spread, stacked_spread(S.topRows(nx), N, n));
  if (fc.max_spread > tol) {
    throw Error(ErrorKind::StructureViolation, "check block structure deviates by " + std::to_string(fc.max_spread));
  }
  const auto& P = fc.value.P;
  fc.cLambda1N = P.map_linear([&](const MatrixXd& x) { return MatrixXd(x.block(0, 0, n, n)); });
  fc.cLambda2N = N > 1 ? P.map_linear([&](const MatrixXd& x) { return MatrixXd(dn * x.block(n, 0, n, n)); })
                       : P.map_linear([&](const MatrixXd&) { return MatrixXd(MatrixXd::Zero(n, n)); });
  fc.cLambda12N = P.map_linear([&](const MatrixXd& x) { return MatrixXd(x.block(0, nx, n, n)); });
  fc.cLambda22N = P.map_linear([&](const MatrixXd& x) { return MatrixXd(x.block(nx, nx, n, n) / dn); });
  fc.cS1N = fc.value.S.map_linear([&](const MatrixXd& x) { return MatrixXd(x.block(0, 0, n, 1)); });
  fc.cS2N = fc.value.S.map_linear([&](const MatrixXd& x) { return MatrixXd(x.block(nx, 0, n, 1) / dn); });
  fc.crN = fc.value.rho.map_linear([&](const MatrixXd& x) { return MatrixXd(x / dn); });
  out.value = std::move(fc);
  return out;
}

/// E V(0, X(0), xbar(0)) for a loop value over Y = (x, xbar), xbar(0) = mu0.
inline double loop_expected_value(const LoopValue& v, int N, const InitialLaw& law, bool with_mean_state) {
  const Index n = law.mu0.size();
  const MatrixXd P = v.P.at(0), S = v.S.at(0);
  VectorXd y(P.rows());
  y.head(N * n) = kron(MatrixXd::Ones(N, 1), MatrixXd(law.mu0));
  if (with_mean_state) y.tail(n) = law.mu0;
  double tr = 0;
  for (int i = 0; i < N; ++i) tr += (P.block(i * n, i * n, n, n) * law.sigma_of(i)).trace();
  return tr + (y.transpose() * P * y)(0, 0) + 2.0 * (y.transpose() * S)(0, 0) + v.rho.at(0)(0, 0);
}

/// Conjugation by the permutation swapping agents i and j.
inline MatrixXd swap_agents(const MatrixXd& P, int N, Index n, int i, int j) {
  MatrixXd J = MatrixXd::Identity(N * n, N * n);
  J.block(i * n, i * n, n, n).setZero();
  J.block(j * n, j * n, n, n).setZero();
  J.block(i * n, j * n, n, n) = MatrixXd::Identity(n, n);
  J.block(j * n, i * n, n, n) = MatrixXd::Identity(n, n);
  return J * P * J.transpose();
}

}  // namespace mflq
