#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "mflq/check_riccati.hpp"

namespace mflq {

struct SimConfig {
  int N = 1;
  int paths = 1000;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  InitialLaw law;
  bool crn = true;
  std::optional<VectorXd> K;  // terminal linear weight, zero if absent
  int threads = 0;            // 0: hardware concurrency; MFLQ_THREADS caps either
};

struct NodeStats {
  std::vector<double> t;
  std::vector<double> second_moment;  // mean over agents and paths of |X_i|^2
  std::vector<double> mf_sq;          // mean over paths of |X^(N) - Xbar|^2
  std::vector<double> running_cost;   // mean over paths of the social running cost rate
};

struct SimResult {
  double J_soc_hat = 0;
  double ci_half = 0;
  double per_agent = 0;
  double second_moment_max = 0;
  std::optional<double> mf_error;
  NodeStats stats;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the substream (path, stream); stream 0 is the common noise,
/// stream i + 1 belongs to agent i.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ path) ^ (stream * 0xd1b54a32d192ed03ULL));
}

/// requested (or the hardware concurrency when <= 0), capped by MFLQ_THREADS.
inline int worker_count(int requested, int blocks) {
  int w = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("MFLQ_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) w = std::min(w, cap);
  }
  return std::max(1, std::min(w, blocks));
}

/// Sum in a fixed binary-tree order.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

/// Runs fn(path) for every path on a fixed block partition. Results must be
/// written to per-path or per-block slots so that the reduction order does
/// not depend on the worker count.
template <class Fn>
void for_each_block(int paths, int block, int threads, Fn&& fn) {
  const int nblocks = (paths + block - 1) / block;
  const int workers = worker_count(threads, nblocks);
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto work = [&]() {
    for (;;) {
      const int b = next.fetch_add(1);
      if (b >= nblocks) return;
      try {
        fn(b, b * block, std::min(paths, (b + 1) * block));
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!err) err = std::current_exception();
        next.store(nblocks);
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);
}

/// Gains sampled at the Euler nodes.
inline std::vector<GainValues> gains_on_nodes(const GainSet& g, int steps, double dt) {
  std::vector<GainValues> v;
  v.reserve(steps + 1);
  for (int k = 0; k <= steps; ++k) v.push_back(g.at(std::min(k * dt, g.t_max())));
  return v;
}

/// One closed loop simulated on a path: agents X (n x N) and, if present, the
/// mean field limit process Xbar driven by the same common noise.
struct Loop {
  const std::vector<GainValues>* control = nullptr;
  bool uses_xbar = false;                            // aggregate is Xbar instead of X^(N)
  const std::vector<GainValues>* xbar = nullptr;     // gains driving Xbar, may be null
};

}  // namespace detail

/// Monte Carlo engine for one or two closed loops driven by identical noise.
class Simulator {
 public:
  static constexpr int kBlock = 32;

  Simulator(const Model& m, const SimConfig& cfg) : m_(m), cfg_(cfg) {
    const double T = m.T();
    if (cfg.N < 1) throw Error(ErrorKind::InvalidArgument, "N must be >= 1");
    if (cfg.paths < 1) throw Error(ErrorKind::InvalidArgument, "paths must be >= 1");
    if (!(cfg.dt > 0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    steps_ = static_cast<int>(std::llround(T / cfg.dt));
    if (steps_ < 1 || std::abs(steps_ * cfg.dt - T) > 1e-9 * T) {
      throw Error(ErrorKind::InvalidArgument, "dt must divide T");
    }
    dt_ = T / steps_;
    validate_law(cfg.law, m.n());
    K_ = cfg.K ? *cfg.K : VectorXd::Zero(m.n());
    sqrt_sigma_.clear();
    for (int i = 0; i < cfg.N; ++i) sqrt_sigma_.push_back(psd_sqrt(cfg.law.sigma_of(i)));
  }

  int steps() const { return steps_; }
  double dt() const { return dt_; }

  /// Simulates the loops; per-path costs are returned per loop. Node
  /// statistics are collected for loop 0.
  std::vector<std::vector<double>> run(const std::vector<detail::Loop>& loops, NodeStats* stats) const {
    const int P = cfg_.paths;
    std::vector<std::vector<double>> costs(loops.size(), std::vector<double>(P, 0.0));
    const int nblocks = (P + kBlock - 1) / kBlock;
    std::vector<NodeStats> block_stats(stats ? nblocks : 0);
    detail::for_each_block(P, kBlock, cfg_.threads, [&](int b, int lo, int hi) {
      NodeStats* bs = stats ? &block_stats[b] : nullptr;
      if (bs) {
        bs->second_moment.assign(steps_ + 1, 0.0);
        bs->mf_sq.assign(steps_ + 1, 0.0);
        bs->running_cost.assign(steps_ + 1, 0.0);
      }
      for (int p = lo; p < hi; ++p) simulate_path(loops, p, costs, bs);
    });
    if (stats) {
      stats->t.resize(steps_ + 1);
      stats->second_moment.assign(steps_ + 1, 0.0);
      stats->mf_sq.assign(steps_ + 1, 0.0);
      stats->running_cost.assign(steps_ + 1, 0.0);
      std::vector<double> col(nblocks);
      for (int k = 0; k <= steps_; ++k) {
        stats->t[k] = k * dt_;
        auto reduce = [&](std::vector<double> NodeStats::*f) {
          for (int b = 0; b < nblocks; ++b) col[b] = (block_stats[b].*f)[k];
          return detail::pairwise_sum(col) / P;
        };
        stats->second_moment[k] = reduce(&NodeStats::second_moment) / cfg_.N;
        stats->mf_sq[k] = reduce(&NodeStats::mf_sq);
        stats->running_cost[k] = reduce(&NodeStats::running_cost);
      }
    }
    return costs;
  }

 private:
  void simulate_path(const std::vector<detail::Loop>& loops, int path, std::vector<std::vector<double>>& costs,
                     NodeStats* bs) const {
    const auto& p = m_.params;
    const int N = cfg_.N;
    const Index n = m_.n();
    const double sdt = std::sqrt(dt_);

    std::vector<std::mt19937_64> rng;
    rng.reserve(N + 1);
    for (int s = 0; s <= N; ++s) rng.emplace_back(detail::stream_seed(cfg_.seed, path, s));
    std::vector<std::normal_distribution<double>> nd(N + 1);

    MatrixXd X0(n, N);
    for (int i = 0; i < N; ++i) {
      VectorXd z(n);
      for (Index j = 0; j < n; ++j) z(j) = nd[i + 1](rng[i + 1]);
      X0.col(i) = cfg_.law.mu0 + sqrt_sigma_[i] * z;
    }

    const std::size_t L = loops.size();
    std::vector<MatrixXd> X(L, X0);
    std::vector<VectorXd> xb(L, cfg_.law.mu0);
    std::vector<double> cost(L, 0.0), prev_rate(L, 0.0);
    VectorXd dW(N);
    double dW0 = 0;
    const MatrixXd ones = MatrixXd::Ones(1, N);

    for (int k = 0; k <= steps_; ++k) {
      if (k < steps_) {
        dW0 = sdt * nd[0](rng[0]);
        for (int i = 0; i < N; ++i) dW(i) = sdt * nd[i + 1](rng[i + 1]);
      }
      for (std::size_t l = 0; l < L; ++l) {
        const detail::Loop& lp = loops[l];
        const GainValues& g = (*lp.control)[k];
        MatrixXd& x = X[l];
        const VectorXd xN = x.rowwise().mean();
        const VectorXd agg = lp.uses_xbar ? xb[l] : xN;
        const MatrixXd U = -g.Theta * x - (g.Theta1 * agg + g.Theta2) * ones;
        const MatrixXd Y = x - (p.Gamma * xN) * ones;
        const double rate = (Y.cwiseProduct(p.Q * Y)).sum() + (U.cwiseProduct(p.R * U)).sum();
        if (k > 0) cost[l] += 0.5 * dt_ * (prev_rate[l] + rate);
        prev_rate[l] = rate;
        if (l == 0 && bs) {
          bs->second_moment[k] += x.squaredNorm();
          bs->running_cost[k] += rate;
          if (lp.xbar) bs->mf_sq[k] += (xN - xb[l]).squaredNorm();
        }
        if (k == steps_) {
          const MatrixXd Yf = x - (p.GammaF * xN) * ones;
          cost[l] += (Yf.cwiseProduct(p.QF * Yf)).sum() + 2.0 * (K_.transpose() * x).sum();
          continue;
        }
        const VectorXd uN = U.rowwise().mean();
        MatrixXd nx = x + (p.A * x + p.B * U + (p.G * xN) * ones) * dt_;
        nx += (p.D * ones + p.B1 * U) * dW.asDiagonal();
        nx += ((p.D0 + p.B0 * uN) * dW0) * ones;
        if (lp.xbar) {
          const GainValues& h = (*lp.xbar)[k];
          const MatrixXd Z = h.Theta + h.Theta1;
          const VectorXd& y = xb[l];
          xb[l] = y + ((p.A + p.G - p.B * Z) * y - p.B * h.Theta2) * dt_ +
                  (p.D0 - p.B0 * h.Theta2 - p.B0 * Z * y) * dW0;
        }
        if (!nx.allFinite() || !xb[l].allFinite()) {
          throw Error(ErrorKind::NonFiniteState, "state escaped at t = " + std::to_string((k + 1) * dt_));
        }
        x = std::move(nx);
      }
    }
    for (std::size_t l = 0; l < L; ++l) costs[l][path] = cost[l];
  }

  const Model& m_;
  SimConfig cfg_;
  int steps_ = 0;
  double dt_ = 0;
  VectorXd K_;
  std::vector<MatrixXd> sqrt_sigma_;
};

namespace detail {

inline std::pair<double, double> mean_ci(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  const double var = v.size() > 1 ? pairwise_sum(sq) / (n - 1) : 0.0;
  return {mean, 1.96 * std::sqrt(var / n)};
}

}  // namespace detail

/// Closed-loop Monte Carlo under one gain set. The decentralized flavor
/// co-simulates Xbar; a centralized run co-simulates Xbar when `limit` is given.
inline SimResult simulate(const Model& m, const GainSet& gains, const SimConfig& cfg,
                          const GainSet* limit = nullptr) {
  if (gains.flavor() == GainSet::Flavor::Centralized && gains.N() != cfg.N) {
    throw Error(ErrorKind::InvalidArgument, "centralized gains were computed for a different N");
  }
  const Simulator sim(m, cfg);
  const auto g = detail::gains_on_nodes(gains, sim.steps(), sim.dt());
  std::vector<GainValues> h;
  detail::Loop loop;
  loop.control = &g;
  if (gains.flavor() == GainSet::Flavor::Decentralized) {
    loop.uses_xbar = true;
    loop.xbar = &g;
  } else if (limit) {
    h = detail::gains_on_nodes(*limit, sim.steps(), sim.dt());
    loop.xbar = &h;
  }
  SimResult r;
  const auto costs = sim.run({loop}, &r.stats);
  std::tie(r.J_soc_hat, r.ci_half) = detail::mean_ci(costs[0]);
  r.per_agent = r.J_soc_hat / cfg.N;
  for (double v : r.stats.second_moment) r.second_moment_max = std::max(r.second_moment_max, v);
  if (loop.xbar) r.mf_error = *std::max_element(r.stats.mf_sq.begin(), r.stats.mf_sq.end());
  return r;
}

/// sup over the grid of the Monte Carlo mean of |X^(N) - Xbar|^2, with X^(N)
/// under the centralized gains and Xbar the mean field limit process.
inline double mf_error(const Model& m, const LimitSolution& lim, const SimConfig& cfg, const OdeOptions& opts = {}) {
  auto fin = solve_finite(m, cfg.N, cfg.K, opts);
  if (!fin.solved()) throw Error(ErrorKind::PreconditionViolated, "finite-N system is not solvable");
  const GainSet c = centralized_gains(m, cfg.N, *fin);
  const GainSet d = decentralized_gains(m, lim);
  return *simulate(m, c, cfg, &d).mf_error;
}

struct GapReport {
  double gap = 0;
  double zeta0N = 0;
  double linear_term = 0;
  double constant_term = 0;
};

/// J_soc(U^d) - J_soc(U^o) from the rescaled centralized and check solutions.
inline GapReport gap_exact(const FiniteSolution& fin, const CheckSolution& c, const InitialLaw& law) {
  const int N = fin.N;
  const double dn = N;
  const VectorXd& mu = law.mu0;
  const MatrixXd L1 = fin.Lambda1N.at(0), L2 = fin.Lambda2N.at(0);
  const MatrixXd cL1 = c.cLambda1N.at(0), cL2 = c.cLambda2N.at(0), cL12 = c.cLambda12N.at(0),
                 cL22 = c.cLambda22N.at(0);
  GapReport g;
  double tr = 0;
  for (int i = 0; i < N; ++i) tr += ((cL1 - L1) * law.sigma_of(i)).trace();
  const MatrixXd five = cL1 + cL2 + cL12 + cL12.transpose() + cL22;
  g.zeta0N = tr + dn * mu.dot((five - L1 - L2) * mu) - mu.dot((cL2 - L2) * mu);
  g.linear_term = 2.0 * dn * mu.dot(VectorXd(c.cS1N.at(0) + c.cS2N.at(0) - fin.SN.at(0)));
  g.constant_term = dn * (c.crN.at(0)(0, 0) - fin.rN.at(0)(0, 0));
  g.gap = g.zeta0N + g.linear_term + g.constant_term;
  return g;
}

inline GapReport gap_exact(const Model& m, int N, const LimitSolution& lim, const InitialLaw& law,
                           const OdeOptions& opts = {}) {
  auto fin = solve_finite(m, N, lim.K, opts);
  auto c = solve_check(m, N, lim, opts);
  if (!fin.solved() || !c.solved()) {
    throw Error(ErrorKind::PreconditionViolated, "finite or check system failed at N=" + std::to_string(N));
  }
  return gap_exact(*fin, *c, law);
}

struct GapEstimate {
  double J_Ud_hat = 0, J_Uo_hat = 0;
  double gap_hat = 0;
  double ci = 0;  // 95% half-width of the paired difference
};

/// Both controls simulated on the same noise (common random numbers when
/// cfg.crn, independent seeds otherwise).
inline GapEstimate gap_monte_carlo(const Model& m, const LimitSolution& lim, const SimConfig& cfg,
                                   const OdeOptions& opts = {}) {
  auto fin = solve_finite(m, cfg.N, lim.K, opts);
  if (!fin.solved()) throw Error(ErrorKind::PreconditionViolated, "finite-N system is not solvable");
  SimConfig c2 = cfg;
  c2.K = lim.K;
  const Simulator sim(m, c2);
  const GainSet dec = decentralized_gains(m, lim);
  const GainSet cen = centralized_gains(m, cfg.N, *fin);
  const auto gd = detail::gains_on_nodes(dec, sim.steps(), sim.dt());
  const auto gc = detail::gains_on_nodes(cen, sim.steps(), sim.dt());
  detail::Loop ld{&gd, true, &gd}, lc{&gc, false, nullptr};
  std::vector<double> cd, co;
  if (cfg.crn) {
    const auto costs = sim.run({ld, lc}, nullptr);
    cd = costs[0];
    co = costs[1];
  } else {
    cd = sim.run({ld}, nullptr)[0];
    SimConfig other = c2;
    other.seed = detail::splitmix64(cfg.seed ^ 0x5bd1e995ULL);
    co = Simulator(m, other).run({lc}, nullptr)[0];
  }
  std::vector<double> diff(cd.size());
  for (std::size_t i = 0; i < cd.size(); ++i) diff[i] = cd[i] - co[i];
  GapEstimate e;
  e.J_Ud_hat = detail::mean_ci(cd).first;
  e.J_Uo_hat = detail::mean_ci(co).first;
  std::tie(e.gap_hat, e.ci) = detail::mean_ci(diff);
  return e;
}

}  // namespace mflq
