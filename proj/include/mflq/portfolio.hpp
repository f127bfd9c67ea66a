#pragma once

#include <cmath>

#include "mflq/gains.hpp"

namespace mflq {

/// Mean-variance portfolio: one bond (rate rho), one stock (drift alpha,
/// volatility sigma), risk aversion gamma.
struct PortfolioParams {
  double rho = 0.05;
  double alpha = 0.15;
  double sigma = 0.25;
  double gamma = 1.0;
  double T = 1.0;
  double x0 = 1.0;
};

inline void validate(const PortfolioParams& p) {
  if (!(p.alpha > p.rho)) throw Error(ErrorKind::InvalidArgument, "alpha must exceed rho");
  if (!(p.sigma > 0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  if (!(p.gamma > 0)) throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  if (!(p.T > 0)) throw Error(ErrorKind::NonPositiveHorizon, "T must be positive");
}

struct PortfolioClosedForms {
  PortfolioParams p;
  double lambda = 0;  // (rho - alpha)^2 / sigma^2

  double A(double t) const { return p.gamma * std::exp((2 * p.rho - lambda) * (p.T - t)); }
  double C(double t) const { return std::exp(p.rho * (p.T - t)); }
  double Lambda1(double t) const { return 0.5 * p.gamma * std::exp((2 * p.rho - lambda) * (p.T - t)); }
  double S(double t) const { return -0.5 * std::exp(p.rho * (p.T - t)); }
  double theta() const { return (p.alpha - p.rho) / (p.sigma * p.sigma); }
  /// C_t / A_t = (1/gamma) e^{(lambda - rho)(T - t)}.
  double CA(double t) const { return std::exp((lambda - p.rho) * (p.T - t)) / p.gamma; }
  /// Mean wealth under the optimal mean-variance control.
  double mean_wealth(double t) const {
    return p.x0 * std::exp(p.rho * t) + std::exp(lambda * p.T - p.rho * (p.T - t)) / p.gamma - CA(t);
  }
};

inline PortfolioClosedForms closed_forms(const PortfolioParams& p) {
  validate(p);
  PortfolioClosedForms c;
  c.p = p;
  c.lambda = (p.rho - p.alpha) * (p.rho - p.alpha) / (p.sigma * p.sigma);
  return c;
}

/// LQ social model: A = rho, B = alpha - rho, B1 = sigma, Q = R = 0,
/// Q_f = gamma/2, Gamma_f = 1, with terminal linear weight K = -1/2.
inline Model portfolio_model(const PortfolioParams& p) {
  validate(p);
  return build_model(scalar_params({.A = p.rho, .B = p.alpha - p.rho, .B0 = 0, .B1 = p.sigma, .D = 0, .D0 = 0,
                                    .G = 0, .Gamma = 0, .GammaF = 1, .Q = 0, .R = 0, .QF = p.gamma / 2, .T = p.T}));
}

inline VectorXd portfolio_terminal_linear() { return VectorXd::Constant(1, -0.5); }

struct PortfolioReport {
  double lambda1_error = 0;  // sup |Lambda1 - closed form|
  double lambda3_sup = 0;    // sup |Lambda3|
  double lambda2_error = 0;  // sup |Lambda2 + Lambda1|
  double s_error = 0;        // sup |S - closed form|
  double theta_error = 0;    // sup over Theta, Theta1, Theta2 against closed forms
  double min_R1 = 0;         // min over nodes of sigma^2 Lambda1
  bool pass = false;
};

inline PortfolioReport verify_against_solver(const PortfolioParams& p, const OdeOptions& opts = {}) {
  const PortfolioClosedForms cf = closed_forms(p);
  const Model m = portfolio_model(p);
  auto lim = solve_limit(m, portfolio_terminal_linear(), opts);
  if (!lim.solved()) throw Error(ErrorKind::PreconditionViolated, "portfolio limit system failed");
  const GainSet g = decentralized_gains(m, *lim);
  PortfolioReport r;
  r.min_R1 = std::numeric_limits<double>::infinity();
  const double th = cf.theta();
  for (std::size_t i = 0; i < lim->Lambda1.size(); ++i) {
    const double t = lim->Lambda1.grid()[i];
    const double l1 = lim->Lambda1.value(i)(0, 0);
    r.lambda1_error = std::max(r.lambda1_error, std::abs(l1 - cf.Lambda1(t)));
    r.lambda3_sup = std::max(r.lambda3_sup, std::abs(lim->Lambda3.value(i)(0, 0)));
    r.lambda2_error = std::max(r.lambda2_error, std::abs(lim->Lambda2.value(i)(0, 0) + l1));
    r.min_R1 = std::min(r.min_R1, r1(m, lim->Lambda1.value(i))(0, 0));
  }
  for (std::size_t i = 0; i < lim->S.size(); ++i) {
    const double t = lim->S.grid()[i];
    r.s_error = std::max(r.s_error, std::abs(lim->S.value(i)(0, 0) - cf.S(t)));
    const GainValues v = g.at(t);
    const double e = std::max({std::abs(v.Theta(0, 0) - th), std::abs(v.Theta1(0, 0) + th),
                               std::abs(v.Theta2(0, 0) - th * cf.S(t) / cf.Lambda1(t))});
    r.theta_error = std::max(r.theta_error, e);
  }
  r.pass = r.lambda1_error <= 1e-8 && r.lambda3_sup <= 1e-9 && r.lambda2_error <= 1e-8 && r.s_error <= 1e-8 &&
           r.theta_error <= 1e-8;
  return r;
}

struct PortfolioControls {
  double u_mv = 0;   // mean-variance optimal control, mean term = Xbar
  double u_soc = 0;  // decentralized social control
};

/// Both controls at (t, X) with the mean term Xbar.
inline PortfolioControls control_compare(const PortfolioParams& p, double t, double X, double Xbar) {
  const PortfolioClosedForms cf = closed_forms(p);
  PortfolioControls c;
  c.u_mv = cf.theta() * (cf.C(t) / cf.A(t) - (X - Xbar));
  c.u_soc = cf.theta() * (-cf.S(t) / cf.Lambda1(t) - (X - Xbar));
  return c;
}

/// Mean-variance control with the explicit mean wealth substituted.
inline double u_mv_explicit(const PortfolioParams& p, double t, double X) {
  const PortfolioClosedForms cf = closed_forms(p);
  return cf.theta() * (p.x0 * std::exp(p.rho * t) + std::exp(cf.lambda * p.T - p.rho * (p.T - t)) / p.gamma - X);
}

/// Mean wealth obtained by integrating dm/dt = rho m + (alpha - rho) theta C_t/A_t forward.
inline MatrixTrajectory mean_wealth_numeric(const PortfolioParams& p, const OdeOptions& opts = {}) {
  const PortfolioClosedForms cf = closed_forms(p);
  OdeSystem sys;
  sys.blocks = {{"m", 1, 1, false}};
  sys.rhs = [cf](double t, const Blocks& y) {
    return Blocks{MatrixXd::Constant(1, 1, cf.p.rho * y[0](0, 0) + (cf.p.alpha - cf.p.rho) * cf.theta() * cf.CA(t))};
  };
  OdeResult res = integrate(sys, {MatrixXd::Constant(1, 1, p.x0)}, 0.0, p.T, opts);
  if (res.status != SolveStatus::Solved) throw Error(ErrorKind::PreconditionViolated, "mean wealth ODE failed");
  return std::move(res.traj.at("m"));
}

/// Largest difference between the gains of the problem re-solved on [t0, T]
/// and the original gains restricted to [t0, T].
inline double time_consistency_gap(const PortfolioParams& p, double t0, const OdeOptions& opts = {}) {
  const Model full = portfolio_model(p);
  PortfolioParams q = p;
  q.T = p.T - t0;
  const Model tail = portfolio_model(q);
  auto a = solve_limit(full, portfolio_terminal_linear(), opts);
  auto b = solve_limit(tail, portfolio_terminal_linear(), opts);
  if (!a.solved() || !b.solved()) throw Error(ErrorKind::PreconditionViolated, "portfolio limit system failed");
  const GainSet ga = decentralized_gains(full, *a), gb = decentralized_gains(tail, *b);
  double gap = 0;
  for (int k = 0; k <= 200; ++k) {
    const double s = q.T * k / 200.0;
    const GainValues x = ga.at(t0 + s), y = gb.at(s);
    gap = std::max({gap, (x.Theta - y.Theta).norm(), (x.Theta1 - y.Theta1).norm(), (x.Theta2 - y.Theta2).norm()});
  }
  return gap;
}

}  // namespace mflq
