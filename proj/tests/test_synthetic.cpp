#include <cmath>

#include <gtest/gtest.h>

#include "locpoly/synthetic.hpp"
#include "oracles.hpp"

using namespace locpoly;

namespace {

const NoiseKind kAllKinds[] = {NoiseKind::SphereUniform, NoiseKind::BallUniform, NoiseKind::GaussianIsotropic};

}

// --- random polynomials ------------------------------------------------------

TEST(RandomPolynomial, ConstantTruth) {
  ExperimentFunctionSpec fs;
  fs.d = 2;
  fs.D = 3;
  fs.degree = 0;
  fs.seed = 4;
  const auto p = gen_random_polynomial(fs);
  const auto f = p.as_function();
  const Eigen::VectorXd c = p.coefficients.row(0).transpose();
  EXPECT_EQ(f.truth(DifferentialOperator::identity(2)), c);
  EXPECT_EQ(f.at(Eigen::Vector2d(0.3, -0.9)), c);
  EXPECT_TRUE(f.truth(parse_operator("d1", 2)).isZero(0.0));
}

TEST(RandomPolynomial, QuadraticByHand) {
  ExperimentFunctionSpec fs;
  fs.D = 4;
  fs.seed = 9;
  const auto p = gen_random_polynomial(fs);
  const auto f = p.as_function();
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double a = p.coefficients(0, j), b = p.coefficients(1, j), c = p.coefficients(2, j);
    EXPECT_GE(a, -1.0);
    EXPECT_LE(a, 1.0);
    EXPECT_DOUBLE_EQ(f.truth(DifferentialOperator::identity(1))(j), a);
    EXPECT_DOUBLE_EQ(f.truth(parse_operator("d1", 1))(j), b);
    EXPECT_DOUBLE_EQ(f.truth(parse_operator("d1d1", 1))(j), 2.0 * c);
    EXPECT_DOUBLE_EQ(f.truth(parse_operator("d1d1d1", 1))(j), 0.0);
    const double x = 0.37;
    EXPECT_NEAR(f.at(Eigen::VectorXd::Constant(1, x))(j), a + b * x + c * x * x, 1e-15);
  }
}

TEST(RandomPolynomial, MixedPartialTruth) {
  ExperimentFunctionSpec fs;
  fs.d = 2;
  fs.D = 2;
  fs.degree = 3;
  fs.seed = 1;
  const auto p = gen_random_polynomial(fs);
  // d1 d1 d2 of c x1^2 x2 is 2c.
  const auto row = static_cast<Eigen::Index>(p.basis.index_of(MultiIndex{2, 1}));
  const auto got = p.operator_value(parse_operator("d1d1d2", 2));
  EXPECT_DOUBLE_EQ(got(0), 2.0 * p.coefficients(row, 0));
  EXPECT_DOUBLE_EQ(got(1), 2.0 * p.coefficients(row, 1));
}

TEST(RandomPolynomial, Deterministic) {
  ExperimentFunctionSpec fs;
  fs.d = 3;
  fs.D = 5;
  fs.degree = 3;
  fs.seed = 123;
  EXPECT_EQ(gen_random_polynomial(fs).coefficients, gen_random_polynomial(fs).coefficients);
  auto other = fs;
  other.seed = 124;
  EXPECT_NE(gen_random_polynomial(fs).coefficients, gen_random_polynomial(other).coefficients);
}

// --- sample_x ----------------------------------------------------------------

TEST(SampleX, SupportMeanAndReproducibility) {
  const double hw = 0.7;
  const Eigen::Index n = 20000;
  const auto xs = sample_x(n, 3, hw, 77);
  EXPECT_LE(xs.cwiseAbs().maxCoeff(), hw);
  EXPECT_LE(xs.colwise().mean().norm(), 4.0 * hw / std::sqrt(static_cast<double>(n)));
  EXPECT_EQ(xs, sample_x(n, 3, hw, 77));
  EXPECT_NE(xs, sample_x(n, 3, hw, 78));
}

TEST(SampleX, Rejects) {
  EXPECT_THROW(sample_x(0, 1, 1.0, 0), Error);
  EXPECT_THROW(sample_x(1, 1, 0.0, 0), Error);
}

// --- noise -------------------------------------------------------------------

TEST(SampleNoise, SphereNormIsExact) {
  for (int D : {1, 2, 10, 1000}) {
    const auto z = sample_noise({NoiseKind::SphereUniform, 0.3}, D, 500, 5);
    for (Eigen::Index i = 0; i < z.rows(); ++i) EXPECT_NEAR(z.row(i).norm(), 0.3, 0.3 * 1e-12);
  }
}

TEST(SampleNoise, SphereInOneDimensionIsSign) {
  const auto z = sample_noise({NoiseKind::SphereUniform, 0.5}, 1, 20000, 6);
  int plus = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    EXPECT_NEAR(std::abs(z(i, 0)), 0.5, 0.5e-12);
    plus += z(i, 0) > 0 ? 1 : 0;
  }
  // Binomial(20000, 1/2): sd ~ 71.
  EXPECT_NEAR(plus, 10000, 400);
}

TEST(SampleNoise, BallStaysInsideScaledRadius) {
  const int D = 50;
  const auto z = sample_noise({NoiseKind::BallUniform, 1.0}, D, 5000, 7);
  const double R = ball_radius(1.0, D);
  double below_half = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    EXPECT_LE(z.row(i).norm(), R * (1 + 1e-12));
    if (z.row(i).norm() < 0.99 * R) ++below_half;
  }
  // P(||z|| < 0.99 R) = 0.99^50 ~ 0.605.
  EXPECT_NEAR(below_half / 5000.0, std::pow(0.99, D), 0.03);
}

TEST(SampleNoise, CovarianceOperatorNorm) {
  const double sigma = 0.1;
  for (auto kind : kAllKinds)
    for (int D : {2, 100}) {
      const auto z = sample_noise({kind, sigma}, D, 100000, 11);
      const double ratio = oracle::covariance_operator_norm(z) / noise_covariance_norm({kind, sigma}, D);
      EXPECT_GE(ratio, 0.8) << noise_kind_name(kind) << " D=" << D;
      EXPECT_LE(ratio, 1.2) << noise_kind_name(kind) << " D=" << D;
    }
}

TEST(SampleNoise, ZeroMean) {
  const double sigma = 2.0;
  const Eigen::Index n = 100000;
  for (auto kind : kAllKinds)
    for (int D : {1, 10, 1000}) {
      const auto z = sample_noise({kind, sigma}, D, n, 13);
      EXPECT_LE(z.colwise().mean().norm(), 5.0 * sigma / std::sqrt(static_cast<double>(n))) << noise_kind_name(kind) << " D=" << D;
    }
}

TEST(SampleNoise, GaussianNormConcentrates) {
  for (int D : {10, 100, 1000}) {
    const auto z = sample_noise({NoiseKind::GaussianIsotropic, 1.5}, D, 20000, 17);
    const double mean_norm = z.rowwise().norm().mean();
    EXPECT_GE(mean_norm, 0.9 * 1.5) << D;
    EXPECT_LE(mean_norm, 1.1 * 1.5) << D;
  }
}

TEST(SampleNoise, ZeroSigmaAndReproducible) {
  for (auto kind : kAllKinds) {
    EXPECT_TRUE(sample_noise({kind, 0.0}, 7, 10, 1).isZero(0.0));
    EXPECT_EQ(sample_noise({kind, 1.0}, 7, 10, 3), sample_noise({kind, 1.0}, 7, 10, 3));
  }
  EXPECT_THROW(sample_noise({NoiseKind::SphereUniform, -1.0}, 2, 3, 0), Error);
}

TEST(NoiseKind, NameRoundTrip) {
  for (auto kind : kAllKinds) EXPECT_EQ(parse_noise_kind(noise_kind_name(kind)), kind);
  EXPECT_THROW(parse_noise_kind("laplace"), Error);
}

// --- datasets ----------------------------------------------------------------

TEST(MakeDataset, NoiselessIsExact) {
  ExperimentFunctionSpec fs;
  fs.d = 2;
  fs.D = 3;
  const auto f = gen_random_polynomial(fs).as_function();
  const auto data = make_dataset(f, 100, NoiseModel{NoiseKind::SphereUniform, 0.0}, 1.0, 8);
  EXPECT_EQ(data.ys(), f(data.xs()));
  const auto again = make_dataset(f, 100, NoiseModel{NoiseKind::SphereUniform, 0.0}, 1.0, 8);
  EXPECT_EQ(data.xs(), again.xs());
}

TEST(MakeDataset, ReproducibleWithNoise) {
  ExperimentFunctionSpec fs;
  fs.D = 6;
  const auto f = gen_random_polynomial(fs).as_function();
  const NoiseModel noise{NoiseKind::BallUniform, 0.4};
  const auto a = make_dataset(f, 50, noise, 1.0, 21);
  const auto b = make_dataset(f, 50, noise, 1.0, 21);
  EXPECT_EQ(a.xs(), b.xs());
  EXPECT_EQ(a.ys(), b.ys());
}

TEST(MakeDataset, ConditionalMean) {
  // Average y over many independent noise draws at the same x. Each
  // coordinate is held to 3 standard errors, so the 30 checks together carry a
  // few percent false-alarm rate; the seed is fixed.
  ExperimentFunctionSpec fs;
  fs.D = 10;
  const auto f = gen_random_polynomial(fs).as_function();
  const double sigma = 1.0;
  const int trials = 4000;
  for (auto kind : kAllKinds) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(fs.D);
    Eigen::VectorXd x0;
    for (int t = 0; t < trials; ++t) {
      const auto data = make_dataset(f, 1, NoiseModel{kind, sigma}, 1.0, derive_seed(100, {static_cast<std::uint64_t>(t)}));
      // Reuse the first draw's x; the noise is independent of x.
      if (t == 0) x0 = data.xs().row(0).transpose();
      sum += (data.ys().row(0) - f.at(data.xs().row(0).transpose()).transpose()).transpose() + f.at(x0);
    }
    const Eigen::VectorXd mean = sum / trials;
    const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(fs.D) * trials);
    const Eigen::VectorXd truth = f.at(x0);
    for (Eigen::Index j = 0; j < fs.D; ++j) EXPECT_NEAR(mean(j), truth(j), tol) << noise_kind_name(kind) << " j=" << j;
  }
}

TEST(MakeLocalDataset, MatchesFullDatasetInsideRadius) {
  ExperimentFunctionSpec fs;
  fs.D = 2;
  const auto f = gen_random_polynomial(fs).as_function();
  const auto full = make_dataset(f, 1000, NoiseModel{}, 1.0, 31);
  const auto local = make_local_dataset(f, 1000, NoiseModel{}, 1.0, 0.25, 31);
  ASSERT_TRUE(local.has_value());
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < full.n(); ++i)
    if (full.xs().row(i).norm() <= 0.25) {
      EXPECT_EQ(local->xs().row(inside), full.xs().row(i));
      EXPECT_EQ(local->ys().row(inside), full.ys().row(i));
      ++inside;
    }
  EXPECT_EQ(inside, local->n());
  EXPECT_FALSE(make_local_dataset(f, 3, NoiseModel{}, 1.0, 1e-9, 31).has_value());
}
