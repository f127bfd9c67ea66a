#pragma once

#include "mflq/finite_riccati.hpp"

namespace mflq {

struct GainValues {
  MatrixXd Theta;   // n1 x n
  MatrixXd Theta1;  // n1 x n
  MatrixXd Theta2;  // n1 x 1
  // Decentralized: H, H1, Ehat. Centralized: HN, EN (H1 unused).
  MatrixXd H, H1, E;
};

/// Feedback gains u = -Theta X_i - Theta1 Z - Theta2, with Z = X^(N) in the
/// centralized flavor and Z = the mean field limit in the decentralized one.
/// Gains are evaluated on demand from the dense output of the Riccati
/// solutions they derive from.
class GainSet {
 public:
  enum class Flavor { Centralized, Decentralized };

  static GainSet decentralized(const Model& m, const LimitSolution& lim) {
    GainSet g;
    g.model_ = m;
    g.flavor_ = Flavor::Decentralized;
    g.N_ = 0;
    g.L1_ = lim.Lambda1;
    g.L2_ = lim.Lambda2;
    g.S_ = lim.S;
    return g;
  }

  static GainSet centralized(const Model& m, const FiniteSolution& fin) {
    GainSet g;
    g.model_ = m;
    g.flavor_ = Flavor::Centralized;
    g.N_ = fin.N;
    g.L1_ = fin.Lambda1N;
    g.L2_ = fin.Lambda2N;
    g.S_ = fin.SN;
    return g;
  }

  Flavor flavor() const { return flavor_; }
  int N() const { return N_; }
  const Model& model() const { return model_; }
  double t_min() const { return L1_.t_min(); }
  double t_max() const { return L1_.t_max(); }
  const std::vector<double>& grid() const { return L1_.grid(); }

  GainValues at(double t) const {
    return flavor_ == Flavor::Decentralized ? decentral(L1_.at(t), L2_.at(t), S_.at(t))
                                            : central(L1_.at(t), L2_.at(t), S_.at(t));
  }

  GainValues decentral(const MatrixXd& L1, const MatrixXd& L2, const MatrixXd& S) const {
    const auto& p = model_.params;
    GainValues v;
    v.H = sym_inverse(r1(model_, L1), "R1");
    v.H1 = sym_inverse(r2(model_, L1, L2), "R2");
    v.E = v.H1 - v.H;
    const MatrixXd L3 = L1 + L2;
    v.Theta = v.H * p.B.transpose() * L1;
    v.Theta1 = v.E * p.B.transpose() * L3 + v.H * p.B.transpose() * L2;
    v.Theta2 = v.H1 * detail::affine_q(p, S, L1, L3);
    return v;
  }

  GainValues central(const MatrixXd& L1, const MatrixXd& L2, const MatrixXd& S) const {
    const auto& p = model_.params;
    const double n = N_;
    const EnHn eh = en_hn(model_, N_, L1, L2);
    GainValues v;
    v.H = eh.H;
    v.E = eh.E;
    v.Theta = (eh.H - eh.E) * p.B.transpose() * (L1 - L2 / n);
    v.Theta1 = n * eh.E * p.B.transpose() * L1 + (eh.H + (n - 2.0) * eh.E) * p.B.transpose() * L2;
    v.Theta2 = (eh.H + (n - 1.0) * eh.E) * detail::affine_q(p, S, L1, L1 + (1.0 - 1.0 / n) * L2);
    return v;
  }

  /// Gains sampled on the grid of the underlying Riccati solution.
  struct Sampled {
    MatrixTrajectory Theta, Theta1, Theta2;
  };
  Sampled sampled() const {
    std::vector<MatrixXd> a, b, c;
    for (double t : grid()) {
      const GainValues v = at(t);
      a.push_back(v.Theta);
      b.push_back(v.Theta1);
      c.push_back(v.Theta2);
    }
    return {MatrixTrajectory::from_samples(grid(), a), MatrixTrajectory::from_samples(grid(), b),
            MatrixTrajectory::from_samples(grid(), c)};
  }

 private:
  Model model_;
  Flavor flavor_ = Flavor::Decentralized;
  int N_ = 0;
  MatrixTrajectory L1_, L2_, S_;
};

inline GainSet decentralized_gains(const Model& m, const LimitSolution& lim) { return GainSet::decentralized(m, lim); }

inline GainSet centralized_gains(const Model& m, int N, const FiniteSolution& fin) {
  if (fin.N != N) throw Error(ErrorKind::InvalidArgument, "finite solution was computed for a different N");
  return GainSet::centralized(m, fin);
}

/// u = -Theta x - Theta1 aggregate - Theta2.
inline VectorXd control_eval(const GainValues& g, const VectorXd& x, const VectorXd& aggregate) {
  return -g.Theta * x - g.Theta1 * aggregate - g.Theta2;
}

inline VectorXd control_eval(const GainSet& gs, double t, const VectorXd& x, const VectorXd& aggregate) {
  return control_eval(gs.at(t), x, aggregate);
}

}  // namespace mflq
