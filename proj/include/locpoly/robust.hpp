#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "locpoly/dataset.hpp"
#include "locpoly/error.hpp"
#include "locpoly/random.hpp"
#include "locpoly/regression.hpp"

namespace locpoly {

enum class RadiusMode { Adaptive, Fixed };

struct AggregationConfig {
  /// Target failure probability.
  double target_failure = 0.1;
  /// Per-split failure probability the split count is designed around.
  double epsilon_zero = 0.4;
  RadiusMode mode = RadiusMode::Adaptive;
  /// Ball radius for Fixed mode; candidate centres must hold a majority within 2 * radius.
  double radius = 0.0;

  void validate() const {
    require(target_failure > 0.0 && target_failure < 1.0, "failure probability must lie in (0, 1)");
    require(epsilon_zero > 0.0 && epsilon_zero < 0.5, "eps0 must lie in (0, 0.5)");
    if (mode == RadiusMode::Fixed) require(radius > 0.0 && std::isfinite(radius), "fixed radius must be positive");
  }
};

/// nu = ceil(ln(1/eps) / (2 (0.5 - eps0)^2)), at least 1.
inline int num_splits(double failure, double epsilon_zero) {
  require(failure > 0.0 && failure < 1.0, "failure probability must lie in (0, 1)");
  require(epsilon_zero > 0.0 && epsilon_zero < 0.5, "eps0 must lie in (0, 0.5)");
  const double gap = 0.5 - epsilon_zero;
  const double raw = std::log(1.0 / failure) / (2.0 * gap * gap);
  // Absorb rounding in the ratio so that exact integers are not bumped up.
  const double nu = std::ceil(raw * (1.0 - 1e-12));
  return std::max(1, static_cast<int>(nu));
}

/// Seeded uniform permutation cut into nu parts whose sizes differ by at most
/// one (the first n mod nu parts take the extra sample).
inline std::vector<Dataset> split_dataset(const Dataset& data, int nu, std::uint64_t seed) {
  require(nu >= 1, "split count must be >= 1");
  if (data.n() < nu)
    throw Error(ErrorCode::TooFewSamples,
                std::to_string(data.n()) + " samples cannot be split into " + std::to_string(nu) + " parts");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(data.n()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<Dataset> parts;
  parts.reserve(static_cast<std::size_t>(nu));
  const std::size_t base = perm.size() / static_cast<std::size_t>(nu);
  const std::size_t extra = perm.size() % static_cast<std::size_t>(nu);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < static_cast<std::size_t>(nu); ++p) {
    const std::size_t size = base + (p < extra ? 1 : 0);
    parts.push_back(data.subset(std::span<const Eigen::Index>(perm).subspan(offset, size)));
    offset += size;
  }
  return parts;
}

struct SplitEstimates {
  std::vector<Eigen::VectorXd> estimates;
  std::vector<EstimateResult> diagnostics;
};

/// Chosen centre: its position in the estimate list, the covering radius and
/// how many estimates (itself included) lie within that radius.
struct BallChoice {
  std::size_t index = 0;
  double radius = 0.0;
  std::size_t covered = 0;
};

namespace detail {
inline Eigen::MatrixXd pairwise_distances(std::span<const Eigen::VectorXd> estimates) {
  const auto nu = static_cast<Eigen::Index>(estimates.size());
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(nu, nu);
  for (Eigen::Index i = 0; i < nu; ++i)
    for (Eigen::Index j = i + 1; j < nu; ++j) {
      const auto& a = estimates[static_cast<std::size_t>(i)];
      const auto& b = estimates[static_cast<std::size_t>(j)];
      require(a.size() == b.size(), "split estimates disagree on dimension");
      dist(i, j) = dist(j, i) = (a - b).norm();
    }
  return dist;
}
} // namespace detail

/// Among the estimates, a centre holding strictly more than half of them
/// within 2 * radius. The centre covering the most estimates wins; ties go to
/// the smallest index.
inline BallChoice median_ball(std::span<const Eigen::VectorXd> estimates, double radius) {
  require(!estimates.empty(), "median_ball needs at least one estimate");
  require(radius > 0.0, "median_ball radius must be positive");
  const Eigen::MatrixXd dist = detail::pairwise_distances(estimates);
  const std::size_t nu = estimates.size();
  const double reach = 2.0 * radius;
  BallChoice best;
  bool found = false;
  for (std::size_t i = 0; i < nu; ++i) {
    std::size_t covered = 0;
    for (std::size_t j = 0; j < nu; ++j)
      if (dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= reach) ++covered;
    if (2 * covered > nu && (!found || covered > best.covered)) {
      best = {i, reach, covered};
      found = true;
    }
  }
  if (!found)
    throw Error(ErrorCode::NoMajorityBall, "no estimate holds a majority of the " + std::to_string(nu) +
                                               " estimates within " + std::to_string(reach));
  return best;
}

/// Smallest-radius majority ball centred at an estimate. Each estimate's
/// radius is the distance to its floor(nu/2)-th nearest other estimate, which
/// is the least radius covering floor(nu/2) + 1 > nu/2 estimates.
inline BallChoice adaptive_median(std::span<const Eigen::VectorXd> estimates) {
  require(!estimates.empty(), "adaptive_median needs at least one estimate");
  const std::size_t nu = estimates.size();
  const std::size_t rank = nu / 2;
  if (rank == 0) return {0, 0.0, 1};
  const Eigen::MatrixXd dist = detail::pairwise_distances(estimates);
  BallChoice best;
  best.radius = std::numeric_limits<double>::infinity();
  std::vector<double> others;
  others.reserve(nu - 1);
  for (std::size_t i = 0; i < nu; ++i) {
    others.clear();
    for (std::size_t j = 0; j < nu; ++j)
      if (j != i) others.push_back(dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(rank - 1), others.end());
    const double r = others[rank - 1];
    if (r < best.radius) best = {i, r, 0};
  }
  for (std::size_t j = 0; j < nu; ++j)
    if (dist(static_cast<Eigen::Index>(best.index), static_cast<Eigen::Index>(j)) <= best.radius) ++best.covered;
  return best;
}

struct RobustEstimate {
  /// Value is the chosen split estimate; diagnostics are that split's.
  EstimateResult result;
  int splits = 1;
  RadiusMode mode = RadiusMode::Adaptive;
  BallChoice choice;
  SplitEstimates per_split;
};

inline RobustEstimate aggregate_estimates(SplitEstimates splits, const AggregationConfig& agg) {
  agg.validate();
  require(!splits.estimates.empty(), "no split estimates to aggregate");
  RobustEstimate out;
  out.splits = static_cast<int>(splits.estimates.size());
  out.mode = agg.mode;
  out.choice = agg.mode == RadiusMode::Fixed ? median_ball(splits.estimates, agg.radius) : adaptive_median(splits.estimates);
  out.result = splits.diagnostics.size() == splits.estimates.size()
                   ? splits.diagnostics[out.choice.index]
                   : EstimateResult{splits.estimates[out.choice.index], {}, 0.0, true};
  out.per_split = std::move(splits);
  return out;
}

/// Runs the single-shot estimator on every part and aggregates the results.
inline RobustEstimate estimate_on_splits(std::span<const Dataset> parts, const DifferentialOperator& op,
                                         const EstimatorConfig& config, const AggregationConfig& agg) {
  agg.validate();
  SplitEstimates splits;
  splits.estimates.reserve(parts.size());
  splits.diagnostics.reserve(parts.size());
  for (const auto& part : parts) {
    splits.diagnostics.push_back(estimate(part, op, config));
    splits.estimates.push_back(splits.diagnostics.back().value);
  }
  return aggregate_estimates(std::move(splits), agg);
}

/// Median trick: nu = num_splits(eps, eps0) random parts, one estimate per
/// part, then the centre of a majority ball.
inline RobustEstimate estimate_robust(const Dataset& data, const DifferentialOperator& op, const EstimatorConfig& config,
                                      const AggregationConfig& agg, std::uint64_t seed) {
  config.validate();
  agg.validate();
  check_operator_fits(op, config, data.d());
  const int nu = num_splits(agg.target_failure, agg.epsilon_zero);
  const auto basis_size = static_cast<long long>(binomial(config.fit_degree() + static_cast<int>(data.d()), static_cast<int>(data.d())));
  if (static_cast<long long>(data.n()) < 4LL * basis_size * nu)
    throw Error(ErrorCode::TooFewSamples, std::to_string(data.n()) + " samples for " + std::to_string(nu) +
                                              " splits; need at least " + std::to_string(4LL * basis_size * nu));
  const auto parts = split_dataset(data, nu, seed);
  return estimate_on_splits(parts, op, config, agg);
}

} // namespace locpoly
