// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "mflq/mflq.hpp"

namespace fs = std::filesystem;
using namespace mflq;

namespace {

Model preset(const char* name) { return build_model(scalar_model(name)); }

// Example 1 has D = D0 = 0 and no terminal linear weight, so S and r vanish
// identically. Their rates are measured on the same model with D = D0 = 0.5.
Model noisy_example1() {
  auto p = scalar_model("example1");
  p.D(0, 0) = 0.5;
  p.D0(0, 0) = 0.5;
  return build_model(p);
}

InitialLaw unit_mean() { return deterministic_law(VectorXd::Ones(1)); }

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [" << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s) {
    c.ok = false;
    c.detail << " [runtime " << secs << " s exceeds " << budget_s << " s]";
  }
  if (!c.ok) ++failures;
  std::printf("%s criterion %d: %s (%.2f s)%s\n", c.ok ? "PASS" : "FAIL", id, title.c_str(), secs,
              c.detail.str().c_str());
  std::fflush(stdout);
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

// ---- 1 ---------------------------------------------------------------------

void solvability(Check& c) {
  for (const char* name : {"example1", "example2", "example3"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const SolvabilityVerdict v = asymptotic_solvability(preset(name));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.require(secs < 5.0, std::string(name) + " runtime " + num(secs));
    if (std::string(name) == "example3") {
      c.require(!v.solvable, "example3 reported solvable");
      c.require(v.failure_time > 0.0 && v.failure_time < 2.0, "example3 failure time " + num(v.failure_time));
      c.detail << " example3 fails at t=" << num(v.failure_time) << " (" << to_string(v.status) << ")";
    } else {
      c.require(v.solvable, std::string(name) + " reported unsolvable");
    }
  }
}

// ---- 2 ---------------------------------------------------------------------

void analytic(Check& c) {
  auto m0 = solve_limit(preset("decoupled_m0"));
  c.require(m0.solved(), "M0 unsolved");
  const double l10 = m0->Lambda1.at(0)(0, 0);
  c.require(std::abs(l10 - 0.5) <= 1e-8, "M0 Lambda1(0)=" + num(l10));

  const PortfolioParams p;
  const PortfolioReport r = verify_against_solver(p);
  c.require(r.lambda1_error <= 1e-8, "portfolio Lambda1 error " + num(r.lambda1_error));
  c.require(r.s_error <= 1e-8, "portfolio S error " + num(r.s_error));
  c.require(r.lambda3_sup <= 1e-9, "portfolio Lambda3 sup " + num(r.lambda3_sup));
  const PortfolioClosedForms cf = closed_forms(p);
  double id = 0;
  for (int k = 0; k <= 1000; ++k) {
    const double t = p.T * k / 1000.0;
    id = std::max(id, std::abs(-cf.S(t) / cf.Lambda1(t) - cf.C(t) / cf.A(t)));
  }
  c.require(id <= 1e-12, "mean-term identity " + num(id));
  c.detail << " Lambda1 err " << num(r.lambda1_error) << ", S err " << num(r.s_error);
}

// ---- 3 ---------------------------------------------------------------------

void oracle(Check& c) {
  double worst = 0, spread = 0, eig = 0;
  for (const char* name : {"example1", "example2", "decoupled_m0"}) {
    const Model m = preset(name);
    for (int N : {1, 2, 3, 5, 8}) {
      const std::string tag = std::string(name) + " N=" + std::to_string(N);
      auto full = solve_full(m, N);
      auto fin = solve_finite(m, N);
      if (!full.solved() || !fin.solved()) {
        c.require(false, tag + " unsolved");
        continue;
      }
      const Extraction ex = extract_blocks(m, *full, 1e-7);
      spread = std::max(spread, ex.max_spread);
      double d = std::max({sup_distance(ex.Lambda1N, fin->Lambda1N), sup_distance(ex.SN, fin->SN),
                           sup_distance(ex.rN, fin->rN)});
      // Lambda2^N has no block to be read from when N = 1.
      if (N > 1) d = std::max(d, sup_distance(ex.Lambda2N, fin->Lambda2N));
      worst = std::max(worst, d);
      c.require(d <= 1e-6, tag + " extraction distance " + num(d));
      for (double t : {0.0, 0.5 * m.T(), m.T()}) {
        const EigCheck e = eig_factorization_check(m, *full, t, 1e-7);
        eig = std::max(eig, e.max_diff);
        c.require(e.match, tag + " eigenvalue factorization at t=" + num(t));
      }
    }
  }
  c.detail << " max distance " << num(worst) << ", block spread " << num(spread) << ", eig diff " << num(eig);
}

// ---- 4 ---------------------------------------------------------------------

void rates(Check& c) {
  const std::vector<int> Ns{25, 50, 100, 200};
  const Model plain = preset("example1");
  const Model noisy = noisy_example1();
  auto lim_p = solve_limit(plain);
  auto lim_n = solve_limit(noisy);
  const GainSet dec = decentralized_gains(noisy, *lim_n);
  std::map<std::string, std::vector<double>> err;
  for (int N : Ns) {
    auto fp = solve_finite(plain, N);
    auto fn = solve_finite(noisy, N);
    auto ck = solve_check(noisy, N, *lim_n);
    if (!fp.solved() || !fn.solved() || !ck.solved()) throw Error(ErrorKind::PreconditionViolated, "unsolved");
    err["Lambda1"].push_back(sup_distance(fp->Lambda1N, lim_p->Lambda1));
    err["Lambda2"].push_back(sup_distance(fp->Lambda2N, lim_p->Lambda2));
    err["S"].push_back(sup_distance(fn->SN, lim_n->S));
    err["r"].push_back(sup_distance(fn->rN, lim_n->r));
    const GainSet cen = centralized_gains(noisy, N, *fn);
    err["gains"].push_back(sup_over(0, noisy.T(), [&](double t) {
      const GainValues x = cen.at(t), y = dec.at(t);
      return MatrixXd::Constant(1, 1, (x.Theta - y.Theta).norm() + (x.Theta1 - y.Theta1).norm() +
                                          (x.Theta2 - y.Theta2).norm());
    }));
    err["check Lambda1"].push_back(sup_distance(ck->cLambda1N, fn->Lambda1N));
    err["check sum"].push_back(sup_over(0, noisy.T(), [&](double t) { return check_sum_difference(*fn, *ck, t); }));
    err["check S"].push_back(sup_over(0, noisy.T(), [&](double t) {
      return MatrixXd(ck->cS1N.at(t) + ck->cS2N.at(t) - fn->SN.at(t));
    }));
    err["check r"].push_back(sup_over(0, noisy.T(), [&](double t) { return MatrixXd(ck->crN.at(t) - fn->rN.at(t)); }));
  }
  double lo = 1e9, hi = 0;
  for (const auto& [name, e] : err) {
    for (std::size_t k = 0; k + 1 < e.size(); ++k) {
      const double ratio = e[k] / e[k + 1];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      c.require(in_range(ratio, 1.5, 2.5), name + " ratio " + num(ratio) + " at N=" + std::to_string(Ns[k]));
    }
  }
  c.detail << " ratios in [" << num(lo) << ", " << num(hi) << "]";
}

// ---- 5 ---------------------------------------------------------------------

void gap(Check& c) {
  const Model m = preset("example1");
  auto lim = solve_limit(m);
  double min_gap = 1e300, max_gap = -1e300, per50 = 0, per100 = 0;
  for (int N = 1; N <= 200; ++N) {
    const double g = gap_exact(m, N, *lim, unit_mean()).gap;
    c.require(std::isfinite(g), "non-finite gap at N=" + std::to_string(N));
    min_gap = std::min(min_gap, g);
    max_gap = std::max(max_gap, g);
    if (N == 50) per50 = g / N;
    if (N == 100) per100 = g / N;
  }
  c.require(min_gap >= -1e-8, "min gap " + num(min_gap));
  c.require(std::isfinite(max_gap), "unbounded gap");
  c.require(per100 < per50, "per-agent gap N=100 " + num(per100) + " vs N=50 " + num(per50));
  const Model m0 = preset("decoupled_m0");
  auto l0 = solve_limit(m0);
  double m0_gap = 0;
  for (int N : {1, 2, 5, 10, 50, 100, 200}) m0_gap = std::max(m0_gap, std::abs(gap_exact(m0, N, *l0, unit_mean()).gap));
  c.require(m0_gap <= 1e-9, "M0 gap " + num(m0_gap));
  c.detail << " gap in [" << num(min_gap) << ", " << num(max_gap) << "], M0 |gap| " << num(m0_gap);
}

// ---- 6 ---------------------------------------------------------------------

void monte_carlo(Check& c) {
  const Model m = preset("example1");
  const int N = 20;
  auto lim = solve_limit(m);
  auto fin = solve_finite(m, N);
  SimConfig cfg;
  cfg.N = N;
  cfg.paths = 2000;
  cfg.seed = 7;
  cfg.dt = 1e-3;
  cfg.law = unit_mean();
  const SimResult r = simulate(m, centralized_gains(m, N, *fin), cfg);
  const double exact = optimal_value(*fin, cfg.law).J_soc;
  c.require(std::abs(r.J_soc_hat - exact) <= 3 * r.ci_half,
            "J_soc_hat " + num(r.J_soc_hat) + " vs " + num(exact) + " ci " + num(r.ci_half));
  const GapEstimate g = gap_monte_carlo(m, *lim, cfg);
  const double ge = gap_exact(m, N, *lim, cfg.law).gap;
  c.require(std::abs(g.gap_hat - ge) <= 3 * g.ci, "gap_hat " + num(g.gap_hat) + " vs " + num(ge) + " ci " + num(g.ci));
  c.detail << " J " << num(r.J_soc_hat) << " vs " << num(exact) << " (ci " << num(r.ci_half) << "), gap "
           << num(g.gap_hat) << " vs " << num(ge) << " (ci " << num(g.ci) << ")";
}

// ---- 7 ---------------------------------------------------------------------

void mean_field_error(Check& c) {
  const Model m = preset("example1");
  auto lim = solve_limit(m);
  std::vector<double> e;
  for (int N : {10, 20, 40}) {
    SimConfig cfg;
    cfg.N = N;
    cfg.paths = 5000;
    cfg.seed = 11;
    cfg.dt = 1e-3;
    cfg.law = unit_mean();
    e.push_back(mf_error(m, *lim, cfg));
  }
  for (int k = 0; k < 2; ++k) {
    const double ratio = e[k] / e[k + 1];
    c.require(in_range(ratio, 1.4, 2.8), "ratio " + num(ratio));
    c.detail << " ratio " << num(ratio);
  }
}

// ---- 8 ---------------------------------------------------------------------

void mfg(Check& c) {
  const Model m = preset("example1");
  auto lim = solve_limit(m);
  auto g = solve_mfg(m);
  c.require(lim.solved() && g.solved(), "unsolved");
  const double dist = sup_distance(g->Lambda1g, lim->Lambda1);
  c.require(dist <= 1e-7, "Lambda1g distance " + num(dist));
  const MfgComparison cmp = compare(m, unit_mean(), *lim, *g);
  c.require(cmp.gain >= -1e-8, "gain " + num(cmp.gain));
  const double g0 = compare(preset("decoupled_m0"), unit_mean()).gain;
  c.require(std::abs(g0) <= 1e-9, "M0 gain " + num(g0));
  c.detail << " gain " << num(cmp.gain) << ", Lambda1 distance " << num(dist);
}

// ---- 9 ---------------------------------------------------------------------

int run_cli(const std::string& args, const std::string& env) {
  const std::string cmd = env + " " + MFLQ_CLI_PATH + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism(Check& c) {
  const fs::path root = fs::temp_directory_path() / "mflq_acceptance";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"solve-limit", "solve-limit --preset example1"},
      {"solve-limit-3", "solve-limit --preset example3"},
      {"solve-finite", "solve-finite --preset example2 --N 7"},
      {"oracle", "oracle --preset example1 --N-list 1,2,3"},
      {"gap-sweep", "gap-sweep --preset example1 --N-list 1:10"},
      {"simulate", "simulate --preset example1 --N 6 --paths 200 --dt 0.01 --seed 7 --stats"},
      {"simulate-c", "simulate --preset example1 --N 6 --paths 200 --dt 0.01 --seed 7 --flavor centralized"},
      {"mfg-compare", "mfg-compare --preset example1"},
      {"portfolio", "portfolio"},
      {"convergence", "convergence --preset example1 --N-list 10,20"},
  };
  int compared = 0;
  for (const auto& [name, args] : commands) {
    const fs::path a = root / (name + "_1"), b = root / (name + "_2"), r = root / (name + "_replay");
    const int ca = run_cli(args + " --out " + a.string(), "MFLQ_THREADS=1");
    const int cb = run_cli(args + " --out " + b.string(), "MFLQ_THREADS=2");
    c.require(ca == cb && (ca == 0 || ca == 2), name + " exit codes " + std::to_string(ca) + "/" + std::to_string(cb));
    const int cr = run_cli("replay --manifest " + (a / "manifest.json").string() + " --out " + r.string(),
                           "MFLQ_THREADS=3");
    c.require(cr == ca, name + " replay exit " + std::to_string(cr));
    try {
      const json ma = json::parse(read_text((a / "manifest.json").string()));
      const json mb = json::parse(read_text((b / "manifest.json").string()));
      const json mr = json::parse(read_text((r / "manifest.json").string()));
      c.require(!ma["outputs"].empty(), name + " has no outputs");
      c.require(ma["outputs"] == mb["outputs"] && ma["outputs"] == mr["outputs"], name + " hashes differ");
      ++compared;
    } catch (const std::exception& e) {
      c.require(false, name + " manifest unreadable");
    }
  }
  c.detail << " " << compared << " commands compared across 1, 2 and 3 workers";
  fs::remove_all(root);
}

}  // namespace

int main() {
  criterion(1, "solvability verdicts on Examples 1-3", 15.0, solvability);
  criterion(2, "analytic Riccati solutions (M0, portfolio)", 2.0, analytic);
  criterion(3, "full-system oracle equivalence", 60.0, oracle);
  criterion(4, "O(1/N) convergence rates on Example 1", 30.0, rates);
  criterion(5, "exact optimality gap for N = 1..200", 120.0, gap);
  criterion(6, "Monte Carlo cost and gap consistency", 120.0, monte_carlo);
  criterion(7, "mean field error halves with N", 180.0, mean_field_error);
  criterion(8, "mean field game comparison", 5.0, mfg);
  criterion(9, "determinism across reruns and worker counts", 0.0, determinism);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
