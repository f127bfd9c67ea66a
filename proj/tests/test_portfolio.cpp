#include <gtest/gtest.h>

#include "mflq/portfolio.hpp"

using namespace mflq;

TEST(Portfolio, ClosedFormsAtHorizon) {
  const PortfolioParams p;
  const auto cf = closed_forms(p);
  EXPECT_DOUBLE_EQ(cf.A(p.T), 1.0);
  EXPECT_DOUBLE_EQ(cf.C(p.T), 1.0);
  EXPECT_DOUBLE_EQ(cf.Lambda1(p.T), 0.5);
  EXPECT_DOUBLE_EQ(cf.S(p.T), -0.5);
}

TEST(Portfolio, DefaultParameterValues) {
  const auto cf = closed_forms(PortfolioParams{});
  EXPECT_NEAR(cf.lambda, 0.16, 1e-15);
  EXPECT_NEAR(cf.Lambda1(0), 0.470882, 1e-6);
  EXPECT_NEAR(cf.Lambda1(0), 0.5 * std::exp(-0.06), 1e-15);
}

TEST(Portfolio, MeanTermIdentity) {
  const PortfolioParams p{.rho = 0.03, .alpha = 0.11, .sigma = 0.3, .gamma = 2.0, .T = 1.5, .x0 = 1.0};
  const auto cf = closed_forms(p);
  for (int k = 0; k < 20; ++k) {
    const double t = p.T * k / 19.0;
    const double lhs = -cf.S(t) / cf.Lambda1(t);
    EXPECT_NEAR(lhs, cf.C(t) / cf.A(t), 1e-12);
    EXPECT_NEAR(lhs, std::exp((cf.lambda - p.rho) * (p.T - t)) / p.gamma, 1e-12);
  }
}

TEST(Portfolio, SolverMatchesClosedForms) {
  const PortfolioReport r = verify_against_solver(PortfolioParams{});
  EXPECT_LE(r.lambda1_error, 1e-8);
  EXPECT_LE(r.lambda3_sup, 1e-9);
  EXPECT_LE(r.lambda2_error, 1e-8);
  EXPECT_LE(r.s_error, 1e-8);
  EXPECT_LE(r.theta_error, 1e-8);
  EXPECT_GT(r.min_R1, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(Portfolio, ControlsCoincide) {
  const PortfolioParams p;
  const auto cf = closed_forms(p);
  const auto same = control_compare(p, 0.3, 1.2, 1.2);
  EXPECT_NEAR(same.u_mv, cf.theta() * cf.C(0.3) / cf.A(0.3), 1e-14);
  for (double t : {0.0, 0.4, 1.0})
    for (double x : {-1.0, 0.5, 2.0}) {
      const auto c = control_compare(p, t, x, 0.9);
      EXPECT_NEAR(c.u_mv, c.u_soc, 1e-12);
    }
}

TEST(Portfolio, ExplicitMeanVariant) {
  const PortfolioParams p;
  const auto cf = closed_forms(p);
  const auto m = mean_wealth_numeric(p);
  for (double t : {0.0, 0.25, 0.6, 1.0}) {
    EXPECT_NEAR(m.at(t)(0, 0), cf.mean_wealth(t), 1e-8);
    const double x = 1.3;
    EXPECT_NEAR(u_mv_explicit(p, t, x), control_compare(p, t, x, m.at(t)(0, 0)).u_mv, 1e-7);
  }
}

TEST(Portfolio, SocialControlIsTimeConsistent) {
  for (double t0 : {0.25, 0.5}) EXPECT_LE(time_consistency_gap(PortfolioParams{}, t0), 1e-8);
}

TEST(Portfolio, RejectsInvalidParameters) {
  EXPECT_THROW(closed_forms(PortfolioParams{.rho = 0.2, .alpha = 0.1}), Error);
  EXPECT_THROW(closed_forms(PortfolioParams{.sigma = 0}), Error);
  EXPECT_THROW(closed_forms(PortfolioParams{.gamma = -1}), Error);
}
