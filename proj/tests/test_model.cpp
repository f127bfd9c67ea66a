#include <gtest/gtest.h>

#include <random>

#include "mflq/model.hpp"

using namespace mflq;

namespace {

ModelParams random_params(std::mt19937_64& rng, Index n, Index n1) {
  std::normal_distribution<double> nd;
  auto rnd = [&](Index r, Index c) {
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
  };
  ModelParams p;
  p.n = n;
  p.n1 = n1;
  p.A = rnd(n, n);
  p.B = rnd(n, n1);
  p.B0 = rnd(n, n1);
  p.B1 = rnd(n, n1);
  p.D = rnd(n, 1);
  p.D0 = rnd(n, 1);
  p.G = rnd(n, n);
  p.Gamma = rnd(n, n);
  p.GammaF = rnd(n, n);
  p.Q = symmetrize(rnd(n, n));
  p.R = symmetrize(rnd(n1, n1));
  p.QF = symmetrize(rnd(n, n));
  p.T = 1.5;
  return p;
}

}  // namespace

TEST(Model, ZeroGammaGivesZeroCoupling) {
  auto p = scalar_model("example1");
  p.Gamma.setZero();
  p.GammaF.setZero();
  const Model m = build_model(p);
  EXPECT_EQ(m.weights.QGamma(0, 0), 0.0);
  EXPECT_EQ(m.weights.QGammaF(0, 0), 0.0);
}

TEST(Model, IdentityGammaGivesMinusQ) {
  std::mt19937_64 rng(3);
  auto p = random_params(rng, 3, 2);
  p.Gamma = MatrixXd::Identity(3, 3);
  const Model m = build_model(p);
  EXPECT_LE((m.weights.QGamma + m.params.Q).norm(), 1e-14);
}

TEST(Model, ExampleOneDerivedWeights) {
  const Model m = build_model(scalar_model("example1"));
  EXPECT_NEAR(m.weights.QGamma(0, 0), -0.76, 1e-15);
  EXPECT_NEAR(m.weights.Q3(0, 0), 3.24, 1e-14);
  EXPECT_NEAR(m.weights.QGammaF(0, 0), -0.38, 1e-15);
  EXPECT_NEAR(m.weights.Q3F(0, 0), 1.62, 1e-14);
}

TEST(Model, PresetsAreVerbatim) {
  const auto e1 = scalar_model("example1");
  EXPECT_EQ(e1.A(0, 0), 1);
  EXPECT_EQ(e1.B(0, 0), 1);
  EXPECT_EQ(e1.B0(0, 0), 0.2);
  EXPECT_EQ(e1.B1(0, 0), 0.2);
  EXPECT_EQ(e1.D(0, 0), 0);
  EXPECT_EQ(e1.D0(0, 0), 0);
  EXPECT_EQ(e1.G(0, 0), 2);
  EXPECT_EQ(e1.Q(0, 0), 4);
  EXPECT_EQ(e1.QF(0, 0), 2);
  EXPECT_EQ(e1.R(0, 0), 1);
  EXPECT_EQ(e1.Gamma(0, 0), 0.1);
  EXPECT_EQ(e1.GammaF(0, 0), 0.1);
  EXPECT_EQ(e1.T, 2);

  const auto e3 = scalar_model("example3");
  EXPECT_EQ(e3.A(0, 0), 30);
  EXPECT_EQ(e3.Q(0, 0), -30);
  EXPECT_EQ(e3.QF(0, 0), 3);
  EXPECT_EQ(e3.R(0, 0), 1.5);
  EXPECT_EQ(e3.G(0, 0), 2);

  const auto e2 = scalar_model("example2");
  EXPECT_EQ(e2.R(0, 0), -1);
  EXPECT_EQ(e2.B0(0, 0), -2);
  EXPECT_EQ(e2.B1(0, 0), 4);
  EXPECT_EQ(e2.Gamma(0, 0), 4);
  EXPECT_EQ(e2.GammaF(0, 0), 2);

  const auto m0 = scalar_model("decoupled_m0");
  EXPECT_EQ(m0.A(0, 0), 0);
  EXPECT_EQ(m0.B(0, 0), 1);
  EXPECT_EQ(m0.R(0, 0), 1);
  EXPECT_EQ(m0.QF(0, 0), 1);
  EXPECT_EQ(m0.Q(0, 0), 0);
  EXPECT_EQ(m0.T, 1);
}

TEST(Model, UnknownPresetThrows) {
  try {
    scalar_model("example4");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownPreset);
  }
}

TEST(Model, ValidationErrors) {
  auto p = scalar_model("example1");
  p.T = 0;
  EXPECT_THROW(build_model(p), Error);
  try {
    build_model(p);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveHorizon);
  }
  p = scalar_model("example1");
  p.B = MatrixXd::Zero(2, 1);
  try {
    build_model(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
  p = scalar_model("example1");
  p.Q(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    build_model(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteEntry);
  }
}

TEST(Model, SmallAsymmetryIsSymmetrizedLargeIsRejected) {
  std::mt19937_64 rng(5);
  auto p = random_params(rng, 3, 1);
  p.Q(0, 1) += 1e-11;
  const Model m = build_model(p);
  EXPECT_LE(asymmetry(m.params.Q), 1e-12);
  p.Q(0, 1) += 1e-3;
  try {
    build_model(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AsymmetricWeight);
  }
}

TEST(Model, BuildIsIdempotent) {
  std::mt19937_64 rng(11);
  const Model a = build_model(random_params(rng, 3, 2));
  const Model b = build_model(a.params);
  EXPECT_LE((a.params.Q - b.params.Q).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((a.weights.QGamma - b.weights.QGamma).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((a.weights.Q3F - b.weights.Q3F).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Model, Q3EqualsQPlusQGammaOnRandomDraws) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 100; ++k) {
    const Model m = build_model(random_params(rng, 3, 2));
    EXPECT_LE((m.weights.Q3 - m.params.Q - m.weights.QGamma).norm(), 1e-10);
    EXPECT_LE((m.weights.Q3F - m.params.QF - m.weights.QGammaF).norm(), 1e-10);
    EXPECT_LE(asymmetry(m.weights.QGamma), 1e-12);
  }
}

TEST(Model, InitialLawValidation) {
  InitialLaw law = deterministic_law(VectorXd::Ones(2));
  EXPECT_NO_THROW(validate_law(law, 2));
  law.sigma0 << 1, 0, 0, -1;
  EXPECT_THROW(validate_law(law, 2), Error);
  law.sigma0 << 1, 0.5, 0.5, 1;
  law.per_agent_sigma = {MatrixXd::Identity(2, 2) * 1e7};
  EXPECT_THROW(validate_law(law, 2), Error);
}
