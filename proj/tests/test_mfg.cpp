#include <gtest/gtest.h>

#include "mflq/mfg.hpp"

using namespace mflq;

namespace {

Model preset(const char* name) { return build_model(scalar_model(name)); }

// Independent scalar integrations for Example 1 (scipy DOP853, rtol 1e-12).
constexpr double kEx1Lambda3At0 = 3.5658172805168453 + 6.1261351938275626;
constexpr double kEx1Lambda2gAt0 = 1.774355484180266;
constexpr double kEx1Lambda3gAt0 = 4.645711450677624;
constexpr double kEx1Lambda4gAt0 = 4.22809886273648;
constexpr double kEx1MfgWeightAt0 = 11.34262711161383;

}  // namespace

TEST(Mfg, DecoupledCollapses) {
  const Model m = preset("decoupled_m0");
  auto g = solve_mfg(m);
  auto lim = solve_limit(m);
  ASSERT_TRUE(g.solved() && lim.solved());
  EXPECT_LE(sup_distance(g->Lambda1g, lim->Lambda1), 1e-8);
  EXPECT_LE(g->Lambda2g.sup_norm(), 1e-12);
  EXPECT_LE(g->Lambda3g.sup_norm(), 1e-12);
  EXPECT_LE(g->Lambda4g.sup_norm(), 1e-12);
  const auto c = compare(m, deterministic_law(VectorXd::Ones(1)));
  EXPECT_NEAR(c.gain, 0.0, 1e-9);
}

TEST(Mfg, TerminalValues) {
  auto p = scalar_model("example1");
  const Model m = build_model(p);
  auto g = solve_mfg(m);
  ASSERT_TRUE(g.solved());
  EXPECT_EQ(g->Lambda1g.back()(0, 0), 2.0);
  EXPECT_NEAR(g->Lambda2g.back()(0, 0), -0.2, 1e-15);
  EXPECT_NEAR(g->Lambda3g.back()(0, 0), 0.02, 1e-15);
  EXPECT_NEAR(g->Lambda4g.back()(0, 0), 0.02, 1e-15);

  p.QF.setZero();
  p.GammaF(0, 0) = 3.0;
  auto z = solve_mfg(build_model(p));
  ASSERT_TRUE(z.solved());
  EXPECT_EQ(z->Lambda2g.back()(0, 0), 0.0);
  EXPECT_EQ(z->Lambda4g.back()(0, 0), 0.0);
}

TEST(Mfg, ExampleOneEfficiencyGain) {
  const Model m = preset("example1");
  auto lim = solve_limit(m);
  auto g = solve_mfg(m);
  ASSERT_TRUE(lim.solved() && g.solved());
  EXPECT_LE(sup_distance(g->Lambda1g, lim->Lambda1), 1e-7);
  EXPECT_NEAR(lim->Lambda3.at(0)(0, 0), kEx1Lambda3At0, 1e-6);
  EXPECT_NEAR(g->Lambda2g.at(0)(0, 0), kEx1Lambda2gAt0, 1e-6);
  EXPECT_NEAR(g->Lambda3g.at(0)(0, 0), kEx1Lambda3gAt0, 1e-6);
  EXPECT_NEAR(g->Lambda4g.at(0)(0, 0), kEx1Lambda4gAt0, 1e-6);
  EXPECT_NEAR(mfg_mean_weight(*g, 0)(0, 0), kEx1MfgWeightAt0, 1e-6);
  const auto c = compare(m, deterministic_law(VectorXd::Ones(1)), *lim, *g);
  EXPECT_GE(c.gain, -1e-8);
  const double diff0 = mfg_difference(*g, *lim).front()(0, 0);
  EXPECT_NEAR(c.gain, diff0, 1e-9);
  EXPECT_NEAR(c.J_soc_bar, kEx1Lambda3At0, 1e-6);
}

TEST(Mfg, ZeroMeanGivesZeroGain) {
  const Model m = preset("example1");
  InitialLaw law = deterministic_law(VectorXd::Zero(1));
  law.sigma0 = MatrixXd::Constant(1, 1, 0.7);
  EXPECT_NEAR(compare(m, law).gain, 0.0, 1e-7);
}

TEST(Mfg, RequiresNoiseFreeIntercepts) {
  auto p = scalar_model("example1");
  p.D0(0, 0) = 0.1;
  try {
    compare(build_model(p), deterministic_law(VectorXd::Ones(1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PreconditionViolated);
  }
}

TEST(Mfg, Lambda4SymmetricPartOnlyMatters) {
  const Model m = preset("example2");
  auto g = solve_mfg(m);
  ASSERT_TRUE(g.solved());
  const VectorXd mu = VectorXd::Constant(1, 0.8);
  const MatrixXd w = mfg_mean_weight(*g, 0);
  const MatrixXd ws = symmetrize(w);
  EXPECT_NEAR(mu.dot(w * mu), mu.dot(ws * mu), 1e-14);
  const OdeSystem sys = mfg_system(m);
  TrajectoryMap tm{{"Lambda1g", g->Lambda1g}, {"Lambda2g", g->Lambda2g}, {"Lambda3g", g->Lambda3g},
                   {"Lambda4g", g->Lambda4g}};
  EXPECT_LE(residual_check(tm, sys), 1e-4);
}
