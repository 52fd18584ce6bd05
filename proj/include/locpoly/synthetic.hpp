#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "locpoly/dataset.hpp"
#include "locpoly/error.hpp"
#include "locpoly/multi_index.hpp"
#include "locpoly/operator.hpp"
#include "locpoly/random.hpp"
#include "locpoly/regression.hpp"

namespace locpoly {

/// Deterministic map R^d -> R^D evaluated row-wise, with optional analytic
/// values of differential operators at the origin.
struct VectorFunction {
  int d = 1;
  int D = 1;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> evaluator;
  std::function<Eigen::VectorXd(const DifferentialOperator&)> exact_operator_value;

  Eigen::MatrixXd operator()(const Eigen::MatrixXd& xs) const { return evaluator(xs); }

  Eigen::VectorXd at(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd row = x.transpose();
    return evaluator(row).row(0).transpose();
  }

  Eigen::VectorXd truth(const DifferentialOperator& op) const {
    if (!exact_operator_value) throw Error(ErrorCode::InvalidArgument, "function has no analytic operator values");
    return exact_operator_value(op);
  }
};

/// Polynomial in the unscaled monomial basis; row a of `coefficients` is the
/// coefficient of x^a for every output coordinate.
struct PolynomialFunction {
  BasisSet basis;
  Eigen::MatrixXd coefficients;

  Eigen::VectorXd operator_value(const DifferentialOperator& op) const {
    require(op.dimension() == basis.dimension(), "operator dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(coefficients.cols());
    for (const auto& t : op.terms()) {
      const std::size_t row = basis.index_of(t.alpha);
      // Derivatives beyond the polynomial degree vanish.
      if (row == basis.size()) continue;
      out += t.coefficient * t.alpha.factorial() * coefficients.row(static_cast<Eigen::Index>(row)).transpose();
    }
    return out;
  }

  VectorFunction as_function() const {
    VectorFunction f;
    f.d = basis.dimension();
    f.D = static_cast<int>(coefficients.cols());
    auto self = *this;
    f.evaluator = [self](const Eigen::MatrixXd& xs) {
      return Eigen::MatrixXd(build_design_matrix(xs, self.basis, 1.0) * self.coefficients);
    };
    f.exact_operator_value = [self](const DifferentialOperator& op) { return self.operator_value(op); };
    return f;
  }
};

struct ExperimentFunctionSpec {
  int d = 1;
  int D = 1;
  int degree = 2;
  /// Coefficients are i.i.d. uniform on [-coefficient_bound, coefficient_bound].
  double coefficient_bound = 1.0;
  std::uint64_t seed = 0;
};

inline PolynomialFunction gen_random_polynomial(const ExperimentFunctionSpec& spec) {
  require(spec.d >= 1 && spec.D >= 1, "function dimensions must be >= 1");
  require(spec.degree >= 0, "polynomial degree must be >= 0");
  require(spec.coefficient_bound >= 0.0, "coefficient bound must be non-negative");
  PolynomialFunction p;
  p.basis = enumerate_basis(spec.d, spec.degree);
  p.coefficients.resize(static_cast<Eigen::Index>(p.basis.size()), spec.D);
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> coef(-spec.coefficient_bound, spec.coefficient_bound);
  for (Eigen::Index j = 0; j < p.coefficients.cols(); ++j)
    for (Eigen::Index a = 0; a < p.coefficients.rows(); ++a) p.coefficients(a, j) = coef(rng);
  return p;
}

enum class NoiseKind { SphereUniform, BallUniform, GaussianIsotropic };

inline std::string_view noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::SphereUniform: return "sphere";
    case NoiseKind::BallUniform: return "ball";
    case NoiseKind::GaussianIsotropic: return "gaussian";
  }
  return "unknown";
}

inline NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "sphere") return NoiseKind::SphereUniform;
  if (name == "ball") return NoiseKind::BallUniform;
  if (name == "gaussian") return NoiseKind::GaussianIsotropic;
  throw Error(ErrorCode::InvalidArgument, "unknown noise kind '" + std::string(name) + "' (sphere|ball|gaussian)");
}

/// Isotropic zero-mean noise of total scale sigma: every kind has covariance
/// (sigma^2 / D) * I. Sphere draws have norm exactly sigma; ball draws are
/// uniform in the ball of radius sigma * sqrt((D + 2) / D).
struct NoiseModel {
  NoiseKind kind = NoiseKind::SphereUniform;
  double sigma = 0.0;
};

/// Analytic operator norm of the noise covariance.
inline double noise_covariance_norm(const NoiseModel& model, int D) {
  return model.sigma * model.sigma / static_cast<double>(D);
}

/// Radius of the uniform ball whose covariance is (sigma^2 / D) * I; a ball of
/// radius R has E||z||^2 = R^2 D / (D + 2).
inline double ball_radius(double sigma, int D) {
  return sigma * std::sqrt((static_cast<double>(D) + 2.0) / static_cast<double>(D));
}

inline Eigen::MatrixXd sample_x(Eigen::Index n, int d, double half_width, std::uint64_t seed) {
  require(n >= 1 && d >= 1, "sample_x needs n, d >= 1");
  require(half_width > 0.0, "half width must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-half_width, half_width);
  Eigen::MatrixXd xs(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) xs(i, j) = u(rng);
  return xs;
}

namespace detail {
inline void draw_noise_row(const NoiseModel& model, Rng& rng, Eigen::RowVectorXd& out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto D = out.size();
  if (model.kind == NoiseKind::GaussianIsotropic) {
    const double sd = model.sigma / std::sqrt(static_cast<double>(D));
    for (Eigen::Index j = 0; j < D; ++j) out(j) = sd * normal(rng);
    return;
  }
  double norm = 0.0;
  do {
    for (Eigen::Index j = 0; j < D; ++j) out(j) = normal(rng);
    norm = out.norm();
  } while (norm == 0.0);
  double radius = model.sigma;
  if (model.kind == NoiseKind::BallUniform) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    radius = ball_radius(model.sigma, static_cast<int>(D)) * std::pow(u(rng), 1.0 / static_cast<double>(D));
  }
  out *= radius / norm;
}
} // namespace detail

inline Eigen::MatrixXd sample_noise(const NoiseModel& model, int D, Eigen::Index count, std::uint64_t seed) {
  require(model.sigma >= 0.0 && std::isfinite(model.sigma), "noise sigma must be finite and non-negative");
  require(D >= 1 && count >= 0, "sample_noise needs D >= 1 and count >= 0");
  Eigen::MatrixXd z(count, D);
  Rng rng(seed);
  Eigen::RowVectorXd row(D);
  for (Eigen::Index i = 0; i < count; ++i) {
    detail::draw_noise_row(model, rng, row);
    z.row(i) = row;
  }
  return z;
}

/// xs uniform on [-half_width, half_width]^d, ys = f(xs) + noise.
inline Dataset make_dataset(const VectorFunction& f, Eigen::Index n, const NoiseModel& noise, double half_width,
                            std::uint64_t seed) {
  Eigen::MatrixXd xs = sample_x(n, f.d, half_width, derive_seed(seed, {1}));
  Eigen::MatrixXd ys = f(xs);
  if (noise.sigma > 0.0) ys += sample_noise(noise, f.D, n, derive_seed(seed, {2}));
  return Dataset(std::move(xs), std::move(ys));
}

/// Same sampling law as make_dataset, but only the samples with ||x|| <= radius
/// are materialised. Estimates at bandwidth <= radius are distributed exactly as
/// on the full dataset, at a fraction of the memory when D is large. Returns an
/// empty optional when no sample falls inside the radius.
inline std::optional<Dataset> make_local_dataset(const VectorFunction& f, Eigen::Index n, const NoiseModel& noise,
                                                 double half_width, double radius, std::uint64_t seed) {
  Eigen::MatrixXd all = sample_x(n, f.d, half_width, derive_seed(seed, {1}));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (all.row(i).norm() <= radius) keep.push_back(i);
  if (keep.empty()) return std::nullopt;
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(keep.size()), f.d);
  for (std::size_t r = 0; r < keep.size(); ++r) xs.row(static_cast<Eigen::Index>(r)) = all.row(keep[r]);
  Eigen::MatrixXd ys = f(xs);
  if (noise.sigma > 0.0) ys += sample_noise(noise, f.D, xs.rows(), derive_seed(seed, {2}));
  return Dataset(std::move(xs), std::move(ys));
}

} // namespace locpoly
