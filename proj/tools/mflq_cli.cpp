// mflq_cli: command-line front end for the mean field LQ social solvers.
//
// Every command writes its artifacts plus manifest.json into --out. Exit
// codes: 0 solved, 2 a clean "not solvable" verdict, 1 any error.

#include <openssl/evp.h>

#include <filesystem>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "mflq/mflq.hpp"

namespace fs = std::filesystem;
using namespace mflq;

namespace {

constexpr int kExitSolved = 0;
constexpr int kExitError = 1;
constexpr int kExitUnsolvable = 2;

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::InvalidArgument, "SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Collects the artifacts of one command and the manifest describing them.
class Outputs {
 public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) {}

  void text(const std::string& name, const std::string& content) {
    fs::create_directories(dir_);
    write_text((fs::path(dir_) / name).string(), content);
    hashes_[name] = sha256_hex(content);
  }
  void csv(const std::string& name, const MatrixTrajectory& t) { text(name, trajectory_csv(t)); }
  void csv(const std::string& name, const Table& t) { text(name, table_csv(t)); }
  void json_file(const std::string& name, const json& j) { text(name, dump(j)); }

  void manifest(const json& info) {
    json m = info;
    m["out"] = dir_;
    m["outputs"] = hashes_;
    fs::create_directories(dir_);
    write_text((fs::path(dir_) / "manifest.json").string(), dump(m));
  }

 private:
  std::string dir_;
  std::map<std::string, std::string> hashes_;
};

/// "1,2,5" or "1:10" ranges, mixed; result is sorted and unique.
std::vector<int> parse_n_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    try {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        out.insert(std::stoi(item));
      } else {
        const int a = std::stoi(item.substr(0, colon)), b = std::stoi(item.substr(colon + 1));
        for (int k = a; k <= b; ++k) out.insert(k);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::InvalidArgument, "bad N list entry '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "empty N list");
  if (*out.begin() < 1) throw Error(ErrorKind::InvalidArgument, "N must be positive");
  return {out.begin(), out.end()};
}

struct Common {
  std::string config_path, preset, out = ".";
  double rtol = OdeOptions{}.rtol, atol = OdeOptions{}.atol;
  std::uint64_t seed = 0;
  std::vector<std::string> argv;

  OdeOptions ode() const {
    OdeOptions o;
    o.rtol = rtol;
    o.atol = atol;
    return o;
  }

  Config load() const {
    if (!config_path.empty()) return load_config(config_path);
    if (!preset.empty()) return preset_config(preset);
    throw Error(ErrorKind::ConfigError, "one of --config or --preset is required");
  }

  json info(const std::string& command) const {
    json j;
    j["command"] = command;
    j["argv"] = argv;
    if (!config_path.empty()) {
      j["config"] = config_path;
      j["config_sha256"] = sha256_hex(read_text(config_path));
    } else {
      j["preset"] = preset;
    }
    j["rtol"] = rtol;
    j["atol"] = atol;
    j["seed"] = seed;
    return j;
  }
};

json verdict_json(const SolvabilityVerdict& v) {
  json j;
  j["solvable"] = v.solvable;
  j["status"] = std::string(to_string(v.status));
  if (!v.solvable) {
    j["failure_time"] = v.failure_time;
    if (!v.failed_constraint.empty()) j["failed_constraint"] = v.failed_constraint;
  }
  return j;
}

/// Solves the limit system; on failure writes verdict.json and the manifest
/// and returns nullopt so the caller exits with the unsolvable code.
std::optional<LimitSolution> limit_or_verdict(const Model& m, const Config& c, const Common& g, Outputs& out,
                                              json& info) {
  const SolvabilityVerdict v = asymptotic_solvability(m, g.ode());
  if (!v.solvable) {
    out.json_file("verdict.json", verdict_json(v));
    info["exit"] = kExitUnsolvable;
    out.manifest(info);
    return std::nullopt;
  }
  auto lim = solve_limit(m, c.K, g.ode());
  if (!lim.solved()) throw Error(ErrorKind::PreconditionViolated, "limit linear system failed");
  return *lim;
}

int finish(Outputs& out, json& info, int code) {
  info["exit"] = code;
  out.manifest(info);
  return code;
}

// ---- commands --------------------------------------------------------------

int cmd_solve_limit(const Common& g) {
  const Config c = g.load();
  const Model m = build_model(c.params);
  Outputs out(g.out);
  json info = g.info("solve-limit");
  const SolvabilityVerdict v = asymptotic_solvability(m, g.ode());
  out.json_file("verdict.json", verdict_json(v));
  if (!v.solvable) return finish(out, info, kExitUnsolvable);
  auto lim = solve_limit(m, c.K, g.ode());
  if (!lim.solved()) throw Error(ErrorKind::PreconditionViolated, "limit linear system failed");
  out.csv("Lambda1.csv", lim->Lambda1);
  out.csv("Lambda2.csv", lim->Lambda2);
  out.csv("Lambda3.csv", lim->Lambda3);
  out.csv("S.csv", lim->S);
  out.csv("r.csv", lim->r);
  return finish(out, info, kExitSolved);
}

int cmd_solve_finite(const Common& g, int N) {
  const Config c = g.load();
  const Model m = build_model(c.params);
  Outputs out(g.out);
  json info = g.info("solve-finite");
  info["N"] = N;
  auto fin = solve_finite(m, N, c.K, g.ode());
  json r;
  r["N"] = N;
  r["solved"] = fin.solved();
  r["status"] = std::string(to_string(fin.status));
  if (!fin.solved()) {
    r["failure_time"] = fin.failure_time;
    if (!fin.failed_constraint.empty()) r["failed_constraint"] = fin.failed_constraint;
    out.json_file("finite.json", r);
    return finish(out, info, kExitUnsolvable);
  }
  const ValueReport val = optimal_value(*fin, c.law);
  r["J_soc"] = val.J_soc;
  r["per_agent"] = val.per_agent;
  out.json_file("finite.json", r);
  out.csv("Lambda1N.csv", fin->Lambda1N);
  out.csv("Lambda2N.csv", fin->Lambda2N);
  out.csv("SN.csv", fin->SN);
  out.csv("rN.csv", fin->rN);
  return finish(out, info, kExitSolved);
}

int cmd_oracle(const Common& g, const std::string& n_list) {
  const Config c = g.load();
  const Model m = build_model(c.params);
  const std::vector<int> Ns = parse_n_list(n_list);
  Outputs out(g.out);
  json info = g.info("oracle");
  info["N_list"] = Ns;
  json report = json::array();
  bool all_pass = true;
  for (int N : Ns) {
    auto full = solve_full(m, N, c.K, g.ode());
    auto fin = solve_finite(m, N, c.K, g.ode());
    json row;
    row["N"] = N;
    if (!full.solved() || !fin.solved()) {
      row["solved"] = false;
      all_pass = false;
      report.push_back(row);
      continue;
    }
    const Extraction ex = extract_blocks(m, *full);
    row["solved"] = true;
    row["max_spread"] = ex.max_spread;
    row["dist_Lambda1"] = sup_distance(ex.Lambda1N, fin->Lambda1N);
    if (N > 1) row["dist_Lambda2"] = sup_distance(ex.Lambda2N, fin->Lambda2N);
    row["dist_S"] = sup_distance(ex.SN, fin->SN);
    row["dist_r"] = sup_distance(ex.rN, fin->rN);
    double eig = 0;
    bool match = true;
    for (double t : {0.0, 0.5 * m.T()}) {
      const EigCheck e = eig_factorization_check(m, *full, t);
      eig = std::max(eig, e.max_diff);
      match = match && e.match;
    }
    row["eig_max_diff"] = eig;
    double worst = std::max({row["dist_Lambda1"].get<double>(), row["dist_S"].get<double>(),
                             row["dist_r"].get<double>()});
    if (N > 1) worst = std::max(worst, row["dist_Lambda2"].get<double>());
    row["pass"] = match && worst <= 1e-6 && ex.max_spread <= 1e-7;
    all_pass = all_pass && row["pass"].get<bool>();
    report.push_back(row);
  }
  json j;
  j["rows"] = report;
  j["pass"] = all_pass;
  out.json_file("oracle.json", j);
  return finish(out, info, all_pass ? kExitSolved : kExitError);
}

int cmd_gap_sweep(const Common& g, const std::string& n_list) {
  const Config c = g.load();
  const Model m = build_model(c.params);
  const std::vector<int> Ns = parse_n_list(n_list);
  Outputs out(g.out);
  json info = g.info("gap-sweep");
  info["N_list"] = Ns;
  auto lim = limit_or_verdict(m, c, g, out, info);
  if (!lim) return kExitUnsolvable;
  Table gap{{"N", "gap", "zeta0N", "linear", "constant"}, {}};
  Table sum{{"N"}, {}};
  const Index n = m.n();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) sum.columns.push_back("m_" + std::to_string(i) + "_" + std::to_string(j));
  for (int N : Ns) {
    auto fin = solve_finite(m, N, lim->K, g.ode());
    auto chk = solve_check(m, N, *lim, g.ode());
    if (!fin.solved() || !chk.solved())
      throw Error(ErrorKind::PreconditionViolated, "finite or check system failed at N=" + std::to_string(N));
    const GapReport r = gap_exact(*fin, *chk, c.law);
    gap.rows.push_back({double(N), r.gap, r.zeta0N, r.linear_term, r.constant_term});
    const MatrixXd d = -check_sum_difference(*fin, *chk, 0.0);
    std::vector<double> row{double(N)};
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) row.push_back(d(i, j));
    sum.rows.push_back(std::move(row));
  }
  out.csv("gap.csv", gap);
  out.csv("sum-difference.csv", sum);
  return finish(out, info, kExitSolved);
}

int cmd_simulate(const Common& g, int N, int paths, double dt, int threads, const std::string& flavor,
                 bool stats) {
  const Config c = g.load();
  const Model m = build_model(c.params);
  Outputs out(g.out);
  json info = g.info("simulate");
  info["N"] = N;
  info["paths"] = paths;
  info["dt"] = dt;
  info["flavor"] = flavor;
  auto lim = limit_or_verdict(m, c, g, out, info);
  if (!lim) return kExitUnsolvable;
  auto fin = solve_finite(m, N, lim->K, g.ode());
  if (!fin.solved()) throw Error(ErrorKind::PreconditionViolated, "finite-N system is not solvable");
  SimConfig cfg;
  cfg.N = N;
  cfg.paths = paths;
  cfg.dt = dt;
  cfg.seed = g.seed;
  cfg.law = c.law;
  cfg.K = lim->K;
  cfg.threads = threads;
  const GainSet dec = decentralized_gains(m, *lim);
  SimResult r;
  json j;
  if (flavor == "centralized") {
    r = simulate(m, centralized_gains(m, N, *fin), cfg, &dec);
    j["J_soc_exact"] = optimal_value(*fin, c.law).J_soc;
  } else if (flavor == "decentralized") {
    r = simulate(m, dec, cfg);
    auto chk = solve_check(m, N, *lim, g.ode());
    if (!chk.solved()) throw Error(ErrorKind::PreconditionViolated, "check system failed");
    j["J_soc_exact"] = optimal_value(*fin, c.law).J_soc + gap_exact(*fin, *chk, c.law).gap;
  } else {
    throw Error(ErrorKind::InvalidArgument, "flavor must be centralized or decentralized");
  }
  j["N"] = N;
  j["paths"] = paths;
  j["dt"] = dt;
  j["seed"] = g.seed;
  j["flavor"] = flavor;
  j["J_soc_hat"] = r.J_soc_hat;
  j["ci_half"] = r.ci_half;
  j["per_agent"] = r.per_agent;
  j["second_moment_max"] = r.second_moment_max;
  if (r.mf_error) j["mf_error"] = *r.mf_error;
  out.json_file("summary.json", j);
  if (stats) {
    Table t{{"t", "second_moment", "mf_sq", "running_cost"}, {}};
    for (std::size_t k = 0; k < r.stats.t.size(); ++k)
      t.rows.push_back({r.stats.t[k], r.stats.second_moment[k], r.stats.mf_sq[k], r.stats.running_cost[k]});
    out.csv("stats.csv", t);
  }
  return finish(out, info, kExitSolved);
}

int cmd_mfg_compare(const Common& g) {
  const Config c = g.load();
  const Model m = build_model(c.params);
  Outputs out(g.out);
  json info = g.info("mfg-compare");
  auto lim = limit_or_verdict(m, c, g, out, info);
  if (!lim) return kExitUnsolvable;
  auto game = solve_mfg(m, g.ode());
  if (!game.solved()) {
    json v;
    v["solvable"] = false;
    v["status"] = std::string(to_string(game.status));
    v["failure_time"] = game.failure_time;
    out.json_file("mfg.json", v);
    return finish(out, info, kExitUnsolvable);
  }
  const MfgComparison cmp = compare(m, c.law, *lim, *game);
  json j;
  j["solvable"] = true;
  j["J_soc_bar"] = cmp.J_soc_bar;
  j["J_mfg_bar"] = cmp.J_mfg_bar;
  j["gain"] = cmp.gain;
  j["lambda1_distance"] = cmp.lambda1_distance;
  j["difference_at_0"] = mfg_difference(*game, *lim).front()(0, 0);
  out.json_file("mfg.json", j);
  out.csv("mfg-difference.csv", mfg_difference(*game, *lim));
  return finish(out, info, kExitSolved);
}

int cmd_portfolio(const Common& g, const PortfolioParams& p) {
  Outputs out(g.out);
  json info;
  info["command"] = "portfolio";
  info["argv"] = g.argv;
  info["rho"] = p.rho;
  info["alpha"] = p.alpha;
  info["sigma"] = p.sigma;
  info["gamma"] = p.gamma;
  info["T"] = p.T;
  info["x0"] = p.x0;
  info["rtol"] = g.rtol;
  info["atol"] = g.atol;
  const PortfolioClosedForms cf = closed_forms(p);
  const PortfolioReport r = verify_against_solver(p, g.ode());
  json j;
  j["lambda"] = cf.lambda;
  j["theta"] = cf.theta();
  j["Lambda1_0"] = cf.Lambda1(0);
  j["S_0"] = cf.S(0);
  j["lambda1_error"] = r.lambda1_error;
  j["lambda2_error"] = r.lambda2_error;
  j["lambda3_sup"] = r.lambda3_sup;
  j["s_error"] = r.s_error;
  j["theta_error"] = r.theta_error;
  j["min_R1"] = r.min_R1;
  j["pass"] = r.pass;
  out.json_file("portfolio.json", j);

  const Model m = portfolio_model(p);
  auto lim = solve_limit(m, portfolio_terminal_linear(), g.ode());
  if (!lim.solved()) throw Error(ErrorKind::PreconditionViolated, "portfolio limit system failed");
  const GainSet gains = decentralized_gains(m, *lim);
  Table t{{"t", "Lambda1", "S", "Theta", "Theta2", "CA"}, {}};
  for (std::size_t k = 0; k < lim->Lambda1.size(); ++k) {
    const double s = lim->Lambda1.grid()[k];
    const GainValues v = gains.at(s);
    t.rows.push_back({s, lim->Lambda1.value(k)(0, 0), lim->S.at(s)(0, 0), v.Theta(0, 0), v.Theta2(0, 0), cf.CA(s)});
  }
  out.csv("portfolio.csv", t);
  return finish(out, info, r.pass ? kExitSolved : kExitError);
}

int cmd_convergence(const Common& g, const std::string& n_list) {
  const Config c = g.load();
  const Model m = build_model(c.params);
  const std::vector<int> Ns = parse_n_list(n_list);
  Outputs out(g.out);
  json info = g.info("convergence");
  info["N_list"] = Ns;
  auto lim = limit_or_verdict(m, c, g, out, info);
  if (!lim) return kExitUnsolvable;
  Table t{{"N", "e_Lambda1", "e_Lambda2", "e_S", "e_r"}, {}};
  for (const ConvergenceRow& row : convergence_table(m, Ns, c.K, g.ode()))
    t.rows.push_back({double(row.N), row.e1, row.e2, row.eS, row.er});
  out.csv("convergence.csv", t);
  return finish(out, info, kExitSolved);
}

int run(std::vector<std::string> args);

/// Re-runs the argument list recorded in a manifest into a new directory and
/// compares output hashes.
int cmd_replay(const std::string& manifest_path, const std::string& out_dir) {
  const json old = json::parse(read_text(manifest_path));
  if (!old.contains("argv")) throw Error(ErrorKind::ConfigError, "manifest has no argv");
  std::vector<std::string> args;
  const auto argv = old["argv"].get<std::vector<std::string>>();
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--out" && i + 1 < argv.size()) {
      ++i;
      continue;
    }
    if (argv[i].rfind("--out=", 0) == 0) continue;
    args.push_back(argv[i]);
  }
  args.push_back("--out");
  args.push_back(out_dir);
  const int code = run(args);
  const json fresh = json::parse(read_text((fs::path(out_dir) / "manifest.json").string()));
  if (fresh["outputs"] != old["outputs"]) {
    std::cerr << "replay: output hashes differ\n";
    return kExitError;
  }
  std::cout << "replay: " << old["outputs"].size() << " outputs identical\n";
  return code;
}

int run(std::vector<std::string> args) {
  CLI::App app{"Mean field LQ social optimization"};
  app.require_subcommand(1);
  app.fallthrough();
  Common g;
  g.argv = args;
  auto* cfg_opt = app.add_option("--config", g.config_path, "JSON model config");
  auto* preset_opt = app.add_option("--preset", g.preset, "named preset")
                         ->check(CLI::IsMember(preset_names()));
  cfg_opt->excludes(preset_opt);
  app.add_option("--out", g.out, "output directory");
  app.add_option("--rtol", g.rtol, "ODE relative tolerance");
  app.add_option("--atol", g.atol, "ODE absolute tolerance");
  app.add_option("--seed", g.seed, "random seed");

  int N = 20, paths = 1000, threads = 0;
  double dt = 1e-3;
  bool stats = false;
  std::string oracle_ns, gap_ns, conv_ns, flavor = "decentralized", manifest;
  PortfolioParams pp;

  auto* limit = app.add_subcommand("solve-limit", "limit Riccati system and solvability verdict");
  auto* finite = app.add_subcommand("solve-finite", "rescaled finite-N system");
  finite->add_option("--N", N, "population size")->check(CLI::PositiveNumber);
  auto* oracle = app.add_subcommand("oracle", "full N-agent system against the rescaled one");
  oracle->add_option("--N-list", oracle_ns, "N values, e.g. 1,2,3 or 1:8")->default_val("1,2,3,5,8");
  auto* gap = app.add_subcommand("gap-sweep", "exact optimality gap over N");
  gap->add_option("--N-list", gap_ns, "N values")->default_val("1,2,5,10,20,50,100,200");
  auto* sim = app.add_subcommand("simulate", "Monte Carlo social cost");
  sim->add_option("--N", N, "population size")->check(CLI::PositiveNumber);
  sim->add_option("--paths", paths, "number of paths")->check(CLI::PositiveNumber);
  sim->add_option("--dt", dt, "Euler step");
  sim->add_option("--threads", threads, "worker count (0: hardware concurrency)");
  sim->add_option("--flavor", flavor, "decentralized or centralized")
      ->check(CLI::IsMember({"decentralized", "centralized"}));
  sim->add_flag("--stats", stats, "also write per-node statistics");
  auto* mfg = app.add_subcommand("mfg-compare", "mean field game against the social optimum");
  auto* port = app.add_subcommand("portfolio", "mean-variance portfolio closed forms");
  port->add_option("--rho", pp.rho);
  port->add_option("--alpha", pp.alpha);
  port->add_option("--sigma", pp.sigma);
  port->add_option("--gamma", pp.gamma);
  port->add_option("--T", pp.T);
  port->add_option("--x0", pp.x0);
  auto* conv = app.add_subcommand("convergence", "finite-N distance from the limit");
  conv->add_option("--N-list", conv_ns, "N values")->default_val("25,50,100,200");
  auto* replay = app.add_subcommand("replay", "re-run a manifest and compare hashes");
  replay->add_option("--manifest", manifest, "manifest.json to replay")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  if (limit->parsed()) return cmd_solve_limit(g);
  if (finite->parsed()) return cmd_solve_finite(g, N);
  if (oracle->parsed()) return cmd_oracle(g, oracle_ns);
  if (gap->parsed()) return cmd_gap_sweep(g, gap_ns);
  if (sim->parsed()) return cmd_simulate(g, N, paths, dt, threads, flavor, stats);
  if (mfg->parsed()) return cmd_mfg_compare(g);
  if (port->parsed()) return cmd_portfolio(g, pp);
  if (conv->parsed()) return cmd_convergence(g, conv_ns);
  if (replay->parsed()) return cmd_replay(manifest, g.out);
  return kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitError;
}
