#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mflq/linalg.hpp"

namespace mflq {

using Blocks = std::vector<MatrixXd>;

struct BlockSpec {
  std::string name;
  Index rows = 1;
  Index cols = 1;
  bool symmetric = false;
};

/// Right-hand side dy/dt in forward time.
using OdeRhs = std::function<Blocks(double t, const Blocks& y)>;

/// A strict positivity requirement: `matrix(t, y)` must stay positive definite.
struct PositivityConstraint {
  std::string id;
  std::function<MatrixXd(double t, const Blocks& y)> matrix;
};

struct OdeSystem {
  std::vector<BlockSpec> blocks;
  OdeRhs rhs;
  std::vector<PositivityConstraint> constraints;
};

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_norm = 1e8;
  double pos_tol = 1e-9;
  double max_step = 0.0;  // 0 means span / 100
  long max_steps = 2000000;
};

enum class SolveStatus { Solved, PositivityViolation, BlowUp, StepFailure };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "Solved";
    case SolveStatus::PositivityViolation: return "PositivityViolation";
    case SolveStatus::BlowUp: return "BlowUp";
    case SolveStatus::StepFailure: return "StepFailure";
  }
  return "Unknown";
}

/// Matrix-valued function of time sampled on an ascending grid, with dense
/// output between nodes. Each interval stores the endpoint values and
/// slopes plus the fifth Dormand-Prince continuous-extension coefficient, so
/// evaluation reproduces the integrator's fourth-order interpolant. When the
/// coefficient is absent the interpolant is cubic Hermite; when slopes are
/// absent it is linear.
class MatrixTrajectory {
 public:
  MatrixTrajectory() = default;

  // Nodes are pushed in the order the integrator produced them; finalize()
  // reverses a backward-generated sequence into ascending order.
  void push(double t, MatrixXd value, MatrixXd slope) {
    t_.push_back(t);
    v_.push_back(std::move(value));
    d_.push_back(std::move(slope));
  }
  void push_interval_correction(MatrixXd c) { c_.push_back(std::move(c)); }

  void finalize_backward() {
    std::reverse(t_.begin(), t_.end());
    std::reverse(v_.begin(), v_.end());
    std::reverse(d_.begin(), d_.end());
    std::reverse(c_.begin(), c_.end());
    backward_ = true;
  }

  static MatrixTrajectory from_samples(std::vector<double> t, std::vector<MatrixXd> v,
                                       std::vector<MatrixXd> d = {}) {
    MatrixTrajectory out;
    out.t_ = std::move(t);
    out.v_ = std::move(v);
    out.d_ = std::move(d);
    return out;
  }

  /// Same grid, values mapped node-wise by a linear map `f`. Slopes and
  /// corrections go through the same map, so dense output commutes with f.
  template <class F>
  MatrixTrajectory map_linear(F f) const {
    MatrixTrajectory out;
    out.t_ = t_;
    out.backward_ = backward_;
    for (const auto& m : v_) out.v_.push_back(f(m));
    for (const auto& m : d_) out.d_.push_back(f(m));
    for (const auto& m : c_) out.c_.push_back(f(m));
    return out;
  }

  /// a*x + b*y on a shared grid.
  static MatrixTrajectory combine(const MatrixTrajectory& x, double a, const MatrixTrajectory& y, double b) {
    if (x.t_ != y.t_) throw Error(ErrorKind::InvalidArgument, "combine needs a shared grid");
    MatrixTrajectory out;
    out.t_ = x.t_;
    out.backward_ = x.backward_;
    for (std::size_t i = 0; i < x.v_.size(); ++i) out.v_.push_back(a * x.v_[i] + b * y.v_[i]);
    if (x.d_.size() == y.d_.size()) {
      for (std::size_t i = 0; i < x.d_.size(); ++i) out.d_.push_back(a * x.d_[i] + b * y.d_[i]);
    }
    if (x.c_.size() == y.c_.size()) {
      for (std::size_t i = 0; i < x.c_.size(); ++i) out.c_.push_back(a * x.c_[i] + b * y.c_[i]);
    }
    return out;
  }

  bool empty() const { return t_.empty(); }
  std::size_t size() const { return t_.size(); }
  const std::vector<double>& grid() const { return t_; }
  const std::vector<MatrixXd>& values() const { return v_; }
  const MatrixXd& value(std::size_t i) const { return v_[i]; }
  double t_min() const { return t_.front(); }
  double t_max() const { return t_.back(); }
  const MatrixXd& front() const { return v_.front(); }
  const MatrixXd& back() const { return v_.back(); }
  Index rows() const { return v_.front().rows(); }
  Index cols() const { return v_.front().cols(); }

  MatrixXd at(double t) const {
    if (t_.empty()) throw Error(ErrorKind::InvalidArgument, "empty trajectory");
    if (t_.size() == 1) return v_.front();
    const double slack = 1e-9 * std::max(1.0, std::abs(t_.back() - t_.front()));
    if (t < t_.front() - slack || t > t_.back() + slack) {
      throw Error(ErrorKind::InvalidArgument, "time outside trajectory range");
    }
    t = std::clamp(t, t_.front(), t_.back());
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(t_.begin(), it));
    if (i == 0) i = 1;
    if (i >= t_.size()) i = t_.size() - 1;
    const std::size_t lo = i - 1, hi = i;
    if (t == t_[lo]) return v_[lo];
    if (t == t_[hi]) return v_[hi];
    if (d_.size() != t_.size()) {
      const double w = (t - t_[lo]) / (t_[hi] - t_[lo]);
      return (1.0 - w) * v_[lo] + w * v_[hi];
    }
    // Step orientation: a backward run stepped from hi to lo.
    const std::size_t a = backward_ ? hi : lo;
    const std::size_t b = backward_ ? lo : hi;
    const double h = t_[b] - t_[a];
    const double th = (t - t_[a]) / h;
    const MatrixXd ydiff = v_[b] - v_[a];
    const MatrixXd bspl = h * d_[a] - ydiff;
    const MatrixXd r4 = ydiff - h * d_[b] - bspl;
    MatrixXd inner = r4;
    if (c_.size() + 1 == t_.size()) inner = r4 + (1.0 - th) * c_[lo];
    return v_[a] + th * (ydiff + (1.0 - th) * (bspl + th * inner));
  }

  double sup_norm() const {
    double m = 0.0;
    for (const auto& x : v_) m = std::max(m, x.norm());
    return m;
  }

 private:
  std::vector<double> t_;
  std::vector<MatrixXd> v_;
  std::vector<MatrixXd> d_;
  std::vector<MatrixXd> c_;  // one per interval, ascending
  bool backward_ = false;
};

using TrajectoryMap = std::map<std::string, MatrixTrajectory>;

struct OdeResult {
  SolveStatus status = SolveStatus::Solved;
  double t_fail = 0.0;
  std::string constraint;
  TrajectoryMap traj;
  std::map<std::string, MatrixTrajectory> margins;  // min eigenvalue per constraint
  long accepted_steps = 0;
  long rejected_steps = 0;
};

/// Result wrapper for the higher-level solvers: either a value or the
/// failure description together with the partial trajectories.
template <class T>
struct Outcome {
  SolveStatus status = SolveStatus::Solved;
  double failure_time = 0.0;
  std::string failed_constraint;
  std::optional<T> value;
  TrajectoryMap partial;

  bool solved() const { return status == SolveStatus::Solved && value.has_value(); }
  const T& operator*() const { return *value; }
  const T* operator->() const { return &*value; }
};

namespace detail {

inline Index packed_size(const std::vector<BlockSpec>& specs) {
  Index s = 0;
  for (const auto& b : specs) s += b.rows * b.cols;
  return s;
}

inline VectorXd pack(const std::vector<BlockSpec>& specs, const Blocks& y) {
  VectorXd out(packed_size(specs));
  Index k = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (y[i].rows() != specs[i].rows || y[i].cols() != specs[i].cols) {
      throw Error(ErrorKind::DimensionMismatch, "block '" + specs[i].name + "' has wrong shape");
    }
    for (Index r = 0; r < specs[i].rows; ++r)
      for (Index c = 0; c < specs[i].cols; ++c) out[k++] = y[i](r, c);
  }
  return out;
}

inline Blocks unpack(const std::vector<BlockSpec>& specs, const VectorXd& v) {
  Blocks out;
  out.reserve(specs.size());
  Index k = 0;
  for (const auto& s : specs) {
    MatrixXd m(s.rows, s.cols);
    for (Index r = 0; r < s.rows; ++r)
      for (Index c = 0; c < s.cols; ++c) m(r, c) = v[k++];
    out.push_back(std::move(m));
  }
  return out;
}

inline VectorXd eval_rhs(const OdeSystem& sys, double t, const VectorXd& y) {
  return pack(sys.blocks, sys.rhs(t, unpack(sys.blocks, y)));
}

inline VectorXd symmetrize_packed(const std::vector<BlockSpec>& specs, const VectorXd& y) {
  Blocks b = unpack(specs, y);
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].symmetric) b[i] = symmetrize(b[i]);
  return pack(specs, b);
}

// Dormand-Prince 5(4) tableau.
struct DP {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline bool finite(const VectorXd& v) { return v.allFinite(); }

}  // namespace detail

/// Integrates `sys` from `t_start` (where y = y0) towards `t_end` with an
/// adaptive Dormand-Prince 5(4) scheme. Integration usually runs backward
/// (t_end < t_start). Positivity constraints and the norm bound are checked at
/// every accepted node, including the starting one.
inline OdeResult integrate(const OdeSystem& sys, const Blocks& y0, double t_start, double t_end,
                           const OdeOptions& opts = {}) {
  using detail::DP;
  const auto& specs = sys.blocks;
  const double span = std::abs(t_end - t_start);
  const double dir = t_end >= t_start ? 1.0 : -1.0;
  const bool backward = dir < 0;

  OdeResult res;
  std::vector<MatrixTrajectory> trajs(specs.size());
  std::vector<MatrixTrajectory> margins(sys.constraints.size());

  auto check_node = [&](double t, const VectorXd& y, std::vector<double>& mins) -> int {
    // 0 ok, 1 positivity, 2 blow-up
    const Blocks b = detail::unpack(specs, y);
    for (const auto& m : b)
      if (!m.allFinite() || m.norm() > opts.max_norm) return 2;
    mins.assign(sys.constraints.size(), 0.0);
    for (std::size_t c = 0; c < sys.constraints.size(); ++c) {
      mins[c] = min_eig(sys.constraints[c].matrix(t, b));
      if (!(mins[c] >= opts.pos_tol)) {
        res.constraint = sys.constraints[c].id;
        return 1;
      }
    }
    return 0;
  };

  auto record = [&](double t, const VectorXd& y, const VectorXd& f, const std::vector<double>& mins) {
    const Blocks yb = detail::unpack(specs, y);
    const Blocks fb = detail::unpack(specs, f);
    for (std::size_t i = 0; i < specs.size(); ++i) trajs[i].push(t, yb[i], fb[i]);
    for (std::size_t c = 0; c < mins.size(); ++c)
      margins[c].push(t, MatrixXd::Constant(1, 1, mins[c]), MatrixXd::Zero(1, 1));
  };

  auto finish = [&](SolveStatus st, double tf) {
    res.status = st;
    res.t_fail = tf;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (backward) trajs[i].finalize_backward();
      res.traj.emplace(specs[i].name, std::move(trajs[i]));
    }
    for (std::size_t c = 0; c < margins.size(); ++c) {
      // margins carry no dense data; keep them linear
      std::vector<double> tt = margins[c].grid();
      std::vector<MatrixXd> vv = margins[c].values();
      if (backward) {
        std::reverse(tt.begin(), tt.end());
        std::reverse(vv.begin(), vv.end());
      }
      res.margins.emplace(sys.constraints[c].id, MatrixTrajectory::from_samples(tt, vv));
    }
    return res;
  };

  VectorXd y = detail::symmetrize_packed(specs, detail::pack(specs, y0));
  double t = t_start;
  std::vector<double> mins;
  const int c0 = check_node(t, y, mins);
  VectorXd f = detail::eval_rhs(sys, t, y);
  if (c0 == 2 || !detail::finite(f)) return finish(SolveStatus::BlowUp, t);
  record(t, y, f, mins);
  if (c0 == 1) return finish(SolveStatus::PositivityViolation, t);
  if (span == 0.0) return finish(SolveStatus::Solved, t);

  const Index dim = y.size();
  auto err_norm = [&](const VectorXd& e, const VectorXd& ya, const VectorXd& yb) {
    double s = 0.0;
    for (Index i = 0; i < dim; ++i) {
      const double sc = opts.atol + opts.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      s += (e[i] / sc) * (e[i] / sc);
    }
    return std::sqrt(s / static_cast<double>(std::max<Index>(dim, 1)));
  };

  // Initial step (Hairer-Wanner heuristic).
  double h;
  {
    VectorXd sc = (opts.atol + opts.rtol * y.cwiseAbs().array()).matrix();
    const double d0 = std::sqrt((y.cwiseQuotient(sc)).squaredNorm() / dim);
    const double d1 = std::sqrt((f.cwiseQuotient(sc)).squaredNorm() / dim);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    bool ok = true;
    VectorXd f1;
    try {
      f1 = detail::eval_rhs(sys, t + dir * h0, y + dir * h0 * f);
      ok = detail::finite(f1);
    } catch (const Error&) {
      ok = false;
    }
    double h1;
    if (ok) {
      const double d2 = std::sqrt(((f1 - f).cwiseQuotient(sc)).squaredNorm() / dim) / h0;
      h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                     : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
    } else {
      h1 = h0 * 1e-3;
    }
    h = std::min({100 * h0, h1, span});
  }
  const double max_step = opts.max_step > 0 ? opts.max_step : span / 100.0;
  h = std::min(h, max_step);

  const double h_min = 1e-14 * span;
  bool last_rejected = false;
  VectorXd k1 = f, k2, k3, k4, k5, k6, k7, ytmp, ynew;

  while (dir * (t_end - t) > 0) {
    if (res.accepted_steps + res.rejected_steps > opts.max_steps) return finish(SolveStatus::StepFailure, t);
    if (h < h_min) return finish(SolveStatus::StepFailure, t);
    double hs = std::min(h, std::abs(t_end - t));
    const bool final_step = hs >= std::abs(t_end - t) * (1 - 1e-12);
    const double hh = dir * hs;

    bool ok = true;
    try {
      ytmp = y + hh * DP::a21 * k1;
      k2 = detail::eval_rhs(sys, t + DP::c2 * hh, ytmp);
      ytmp = y + hh * (DP::a31 * k1 + DP::a32 * k2);
      k3 = detail::eval_rhs(sys, t + DP::c3 * hh, ytmp);
      ytmp = y + hh * (DP::a41 * k1 + DP::a42 * k2 + DP::a43 * k3);
      k4 = detail::eval_rhs(sys, t + DP::c4 * hh, ytmp);
      ytmp = y + hh * (DP::a51 * k1 + DP::a52 * k2 + DP::a53 * k3 + DP::a54 * k4);
      k5 = detail::eval_rhs(sys, t + DP::c5 * hh, ytmp);
      ytmp = y + hh * (DP::a61 * k1 + DP::a62 * k2 + DP::a63 * k3 + DP::a64 * k4 + DP::a65 * k5);
      k6 = detail::eval_rhs(sys, t + hh, ytmp);
      ynew = y + hh * (DP::a71 * k1 + DP::a73 * k3 + DP::a74 * k4 + DP::a75 * k5 + DP::a76 * k6);
      const double tn = final_step ? t_end : t + hh;
      k7 = detail::eval_rhs(sys, tn, ynew);
      ok = detail::finite(ynew) && detail::finite(k7);
    } catch (const Error&) {
      ok = false;
    }

    double err = 0.0;
    if (ok) {
      const VectorXd e = hh * (DP::e1 * k1 + DP::e3 * k3 + DP::e4 * k4 + DP::e5 * k5 + DP::e6 * k6 + DP::e7 * k7);
      err = err_norm(e, y, ynew);
      ok = std::isfinite(err);
    }
    if (!ok) {
      ++res.rejected_steps;
      h = hs * 0.25;
      last_rejected = true;
      continue;
    }
    if (err > 1.0) {
      ++res.rejected_steps;
      h = hs * std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
      continue;
    }

    // Accepted.
    const VectorXd corr = hh * (DP::d1 * k1 + DP::d3 * k3 + DP::d4 * k4 + DP::d5 * k5 + DP::d6 * k6 + DP::d7 * k7);
    const double tn = final_step ? t_end : t + hh;
    const VectorXd ysym = detail::symmetrize_packed(specs, ynew);
    const int c = check_node(tn, ysym, mins);
    if (c == 2) return finish(SolveStatus::BlowUp, t);
    ++res.accepted_steps;
    {
      const Blocks cb = detail::unpack(specs, corr);
      for (std::size_t i = 0; i < specs.size(); ++i) trajs[i].push_interval_correction(cb[i]);
    }
    record(tn, ysym, k7, mins);
    if (c == 1) return finish(SolveStatus::PositivityViolation, tn);

    t = tn;
    y = ysym;
    k1 = k7;
    double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    if (last_rejected) fac = std::min(fac, 1.0);
    h = hs * fac;
    h = std::min(h, max_step);
    last_rejected = false;
  }
  return finish(SolveStatus::Solved, t);
}

/// Integrates from the terminal time T down to 0.
inline OdeResult integrate_backward(const OdeSystem& sys, const Blocks& terminal, double T,
                                    const OdeOptions& opts = {}) {
  if (!(T > 0)) throw Error(ErrorKind::NonPositiveHorizon, "T must be positive");
  return integrate(sys, terminal, T, 0.0, opts);
}

/// Maximum over `nodes` interior points of
/// |centered finite difference of traj - rhs(traj)| / (1 + |rhs|).
inline double residual_check(const TrajectoryMap& traj, const OdeSystem& sys, int nodes = 200) {
  std::vector<const MatrixTrajectory*> parts;
  for (const auto& b : sys.blocks) {
    auto it = traj.find(b.name);
    if (it == traj.end()) throw Error(ErrorKind::InvalidArgument, "missing block " + b.name);
    parts.push_back(&it->second);
  }
  const double t0 = parts.front()->t_min(), t1 = parts.front()->t_max();
  const double delta = 1e-5 * (t1 - t0);
  auto sample = [&](double t) {
    Blocks y;
    for (auto* p : parts) y.push_back(p->at(t));
    return y;
  };
  double worst = 0.0;
  for (int k = 1; k <= nodes; ++k) {
    const double t = t0 + (t1 - t0) * k / (nodes + 1.0);
    const Blocks yp = sample(t + delta), ym = sample(t - delta), y = sample(t);
    const Blocks f = sys.rhs(t, y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const MatrixXd fd = (yp[i] - ym[i]) / (2 * delta);
      num += (fd - f[i]).squaredNorm();
      den += f[i].squaredNorm();
    }
    worst = std::max(worst, std::sqrt(num) / (1.0 + std::sqrt(den)));
  }
  return worst;
}

/// Sup over a uniform grid of the Frobenius distance between two trajectories
/// on their common time range.
inline double sup_distance(const MatrixTrajectory& a, const MatrixTrajectory& b, int nodes = 401) {
  const double lo = std::max(a.t_min(), b.t_min()), hi = std::min(a.t_max(), b.t_max());
  double m = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double t = nodes == 1 ? lo : lo + (hi - lo) * k / (nodes - 1.0);
    m = std::max(m, (a.at(t) - b.at(t)).norm());
  }
  return m;
}

/// Sup over a uniform grid of |f(t)|_F for a time function f.
template <class F>
double sup_over(double lo, double hi, F f, int nodes = 401) {
  double m = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double t = lo + (hi - lo) * k / (nodes - 1.0);
    m = std::max(m, MatrixXd(f(t)).norm());
  }
  return m;
}

}  // namespace mflq
