#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "locpoly/dataset.hpp"
#include "locpoly/error.hpp"
#include "locpoly/multi_index.hpp"
#include "locpoly/operator.hpp"

namespace locpoly {

struct EstimatorConfig {
  /// Smoothness k of the target; the local fit has degree k - 1.
  int smoothness = 2;
  /// b in epsilon_n = b * n^(-1/(2k+d)).
  double bandwidth_constant = 1.0;
  /// Fits whose design matrix condition number exceeds this are flagged (rank_ok = false).
  double min_condition_warn = 1e10;
  /// Relative singular-value cutoff for rank detection; |basis| * machine epsilon when unset.
  std::optional<double> rank_rtol;

  int fit_degree() const noexcept { return smoothness - 1; }

  void validate() const {
    require(smoothness >= 1, "smoothness k must be >= 1");
    require(bandwidth_constant > 0.0 && std::isfinite(bandwidth_constant), "bandwidth constant must be positive");
    require(min_condition_warn > 0.0, "condition warning threshold must be positive");
    if (rank_rtol) require(*rank_rtol >= 0.0, "rank tolerance must be non-negative");
  }
};

/// epsilon_n = b * n^(-1/(2k+d)).
inline double bandwidth(long long n, int k, int d, double b) {
  require(n >= 1 && k >= 1 && d >= 1, "bandwidth needs n, k, d >= 1");
  require(b > 0.0, "bandwidth constant must be positive");
  return b * std::pow(static_cast<double>(n), -1.0 / static_cast<double>(2 * k + d));
}

/// Row i, column a holds prod_j x_i[j]^a_j / delta^|a|. A zero delta is only
/// accepted when every point sits at the origin, in which case the scale is 1.
inline Eigen::MatrixXd build_design_matrix(const Eigen::MatrixXd& points, const BasisSet& basis, double delta) {
  require(points.cols() == basis.dimension(), "point dimension must match basis dimension");
  require(delta >= 0.0 && std::isfinite(delta), "delta must be finite and non-negative");
  if (delta == 0.0) {
    if (!points.isZero(0.0)) throw Error(ErrorCode::ZeroScale, "delta is zero but a non-origin point is present");
    delta = 1.0;
  }
  const Eigen::Index rows = points.rows();
  const int d = basis.dimension();
  const int p = basis.max_degree();

  // powers[j](i, e) = (x_i[j] / delta)^e
  std::vector<Eigen::MatrixXd> powers(static_cast<std::size_t>(d), Eigen::MatrixXd(rows, p + 1));
  for (int j = 0; j < d; ++j) {
    auto& pw = powers[static_cast<std::size_t>(j)];
    pw.col(0).setOnes();
    for (int e = 1; e <= p; ++e) pw.col(e) = pw.col(e - 1).cwiseProduct(points.col(j) / delta);
  }

  Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t a = 0; a < basis.size(); ++a) {
    auto col = design.col(static_cast<Eigen::Index>(a));
    col.setOnes();
    for (int j = 0; j < d; ++j) {
      const int e = basis[a][static_cast<std::size_t>(j)];
      if (e > 0) col.array() *= powers[static_cast<std::size_t>(j)].col(e).array();
    }
  }
  return design;
}

/// Vector polynomial stored in the scaled monomial basis x^a / scale^|a|;
/// row a of `coefficients` holds that monomial's coefficient for every output.
struct VectorPolynomial {
  BasisSet basis;
  double scale = 1.0;
  Eigen::MatrixXd coefficients;

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd row = x.transpose();
    return (build_design_matrix(row, basis, scale) * coefficients).transpose();
  }
};

struct LeastSquaresSolution {
  Eigen::MatrixXd solution;
  double condition_number = 0.0;
};

/// Minimises ||design * X - rhs||_F with one column-pivoted QR shared across
/// all right-hand sides. Throws RankDeficient when
/// sigma_min <= rtol * sigma_max.
inline LeastSquaresSolution solve_least_squares(const Eigen::MatrixXd& design, Eigen::MatrixXd rhs,
                                                std::optional<double> rtol = std::nullopt) {
  require(design.rows() == rhs.rows(), "design and right-hand side row counts differ");
  const Eigen::Index p = design.cols();
  if (design.rows() < p)
    throw Error(ErrorCode::InsufficientSamples,
                std::to_string(design.rows()) + " rows for " + std::to_string(p) + " unknowns");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
  const auto& sv = svd.singularValues();
  const double sigma_max = sv.size() ? sv(0) : 0.0;
  const double sigma_min = sv.size() ? sv(sv.size() - 1) : 0.0;
  const double tol = rtol.value_or(static_cast<double>(p) * std::numeric_limits<double>::epsilon());
  if (!(sigma_max > 0.0) || sigma_min <= tol * sigma_max)
    throw Error(ErrorCode::RankDeficient, "design matrix is numerically rank deficient (sigma_min/sigma_max = " +
                                              std::to_string(sigma_max > 0.0 ? sigma_min / sigma_max : 0.0) + ")");

  rhs.applyOnTheLeft(qr.householderQ().adjoint());
  Eigen::MatrixXd top = rhs.topRows(p);
  qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>().solveInPlace(top);

  LeastSquaresSolution out;
  out.solution = qr.colsPermutation() * top;
  out.condition_number = sigma_max / sigma_min;
  return out;
}

struct LocalFit {
  VectorPolynomial polynomial;
  Neighborhood neighborhood;
  double condition_number = 0.0;
  bool rank_ok = true;
};

/// Least-squares polynomial through (points, values) in the basis scaled by `scale`.
inline VectorPolynomial fit_polynomial(const Eigen::MatrixXd& points, const Eigen::MatrixXd& values, const BasisSet& basis,
                                       double scale, std::optional<double> rtol = std::nullopt,
                                       double* condition_number = nullptr) {
  if (static_cast<std::size_t>(points.rows()) < basis.size())
    throw Error(ErrorCode::InsufficientSamples, std::to_string(points.rows()) + " neighbourhood points for a basis of size " +
                                                    std::to_string(basis.size()));
  Eigen::MatrixXd design = build_design_matrix(points, basis, scale);
  auto ls = solve_least_squares(design, values, rtol);
  if (condition_number) *condition_number = ls.condition_number;
  return VectorPolynomial{basis, scale > 0.0 ? scale : 1.0, std::move(ls.solution)};
}

/// Local polynomial fit of degree k-1 over the neighbourhood ||x|| <= epsilon.
inline LocalFit fit_local_polynomial(const Dataset& data, const EstimatorConfig& config, double epsilon) {
  config.validate();
  const BasisSet basis = enumerate_basis(static_cast<int>(data.d()), config.fit_degree());

  LocalFit fit;
  fit.neighborhood = select_neighborhood(data, epsilon);
  const auto& idx = fit.neighborhood.indices;
  if (idx.size() < basis.size())
    throw Error(ErrorCode::InsufficientSamples, std::to_string(idx.size()) + " points within bandwidth " +
                                                    std::to_string(epsilon) + ", need at least " +
                                                    std::to_string(basis.size()));

  Eigen::MatrixXd points(static_cast<Eigen::Index>(idx.size()), data.d());
  Eigen::MatrixXd values(static_cast<Eigen::Index>(idx.size()), data.D());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    points.row(static_cast<Eigen::Index>(r)) = data.xs().row(idx[r]);
    values.row(static_cast<Eigen::Index>(r)) = data.ys().row(idx[r]);
  }

  fit.polynomial = fit_polynomial(points, values, basis, fit.neighborhood.delta, config.rank_rtol, &fit.condition_number);
  fit.rank_ok = fit.condition_number <= config.min_condition_warn;
  return fit;
}

inline LocalFit fit_local_polynomial(const Dataset& data, const EstimatorConfig& config) {
  config.validate();
  return fit_local_polynomial(data, config,
                              bandwidth(data.n(), config.smoothness, static_cast<int>(data.d()), config.bandwidth_constant));
}

/// L[poly](0) = sum_a c_a * a! * coefficients[a, :] / scale^|a|.
inline Eigen::VectorXd apply_operator(const VectorPolynomial& poly, const DifferentialOperator& op) {
  require(op.dimension() == poly.basis.dimension(), "operator dimension does not match polynomial dimension");
  if (op.order() > poly.basis.max_degree())
    throw Error(ErrorCode::OperatorOrderTooHigh, "operator order " + std::to_string(op.order()) +
                                                     " exceeds fit degree " + std::to_string(poly.basis.max_degree()));
  Eigen::VectorXd value = Eigen::VectorXd::Zero(poly.coefficients.cols());
  for (const auto& term : op.terms()) {
    const std::size_t row = poly.basis.index_of(term.alpha);
    const double weight = term.coefficient * term.alpha.factorial() / std::pow(poly.scale, term.alpha.order());
    value += weight * poly.coefficients.row(static_cast<Eigen::Index>(row)).transpose();
  }
  return value;
}

struct EstimateResult {
  Eigen::VectorXd value;
  Neighborhood neighborhood;
  double condition_number = 0.0;
  bool rank_ok = true;
};

inline void check_operator_fits(const DifferentialOperator& op, const EstimatorConfig& config, Eigen::Index d) {
  require(op.dimension() == d, "operator dimension does not match x dimension");
  if (op.order() > config.fit_degree())
    throw Error(ErrorCode::OperatorOrderTooHigh, "operator order " + std::to_string(op.order()) +
                                                     " needs smoothness k >= " + std::to_string(op.order() + 1));
}

/// Estimate of L[f](0) using an explicit bandwidth.
inline EstimateResult estimate(const Dataset& data, const DifferentialOperator& op, const EstimatorConfig& config,
                               double epsilon) {
  check_operator_fits(op, config, data.d());
  LocalFit fit = fit_local_polynomial(data, config, epsilon);
  return EstimateResult{apply_operator(fit.polynomial, op), std::move(fit.neighborhood), fit.condition_number, fit.rank_ok};
}

/// Estimate of L[f](0) with the bandwidth rule epsilon_n = b * n^(-1/(2k+d)).
inline EstimateResult estimate(const Dataset& data, const DifferentialOperator& op, const EstimatorConfig& config) {
  config.validate();
  return estimate(data, op, config,
                  bandwidth(data.n(), config.smoothness, static_cast<int>(data.d()), config.bandwidth_constant));
}

} // namespace locpoly
