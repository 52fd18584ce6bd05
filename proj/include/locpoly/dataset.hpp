#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "locpoly/error.hpp"

namespace locpoly {

/// n samples (x_i, y_i), one per row. The estimation target is the origin of x.
class Dataset {
public:
  Dataset() = default;

  Dataset(Eigen::MatrixXd xs, Eigen::MatrixXd ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
    require(xs_.rows() >= 1, "dataset needs at least one sample");
    require(xs_.rows() == ys_.rows(), "xs and ys must have the same number of rows");
    require(xs_.cols() >= 1 && ys_.cols() >= 1, "sample dimensions must be >= 1");
  }

  Eigen::Index n() const noexcept { return xs_.rows(); }
  Eigen::Index d() const noexcept { return xs_.cols(); }
  Eigen::Index D() const noexcept { return ys_.cols(); }
  const Eigen::MatrixXd& xs() const noexcept { return xs_; }
  const Eigen::MatrixXd& ys() const noexcept { return ys_; }

  Dataset subset(std::span<const Eigen::Index> rows) const {
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), d());
    Eigen::MatrixXd ys(static_cast<Eigen::Index>(rows.size()), D());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xs.row(static_cast<Eigen::Index>(r)) = xs_.row(rows[r]);
      ys.row(static_cast<Eigen::Index>(r)) = ys_.row(rows[r]);
    }
    return Dataset(std::move(xs), std::move(ys));
  }

  /// Shifts every x by -center, moving the estimation target to the origin.
  Dataset translated(const Eigen::VectorXd& center) const {
    require(center.size() == d(), "center dimension must match x dimension");
    Eigen::MatrixXd xs = xs_.rowwise() - center.transpose();
    return Dataset(std::move(xs), ys_);
  }

private:
  Eigen::MatrixXd xs_;
  Eigen::MatrixXd ys_;
};

/// Sample indices with ||x_i|| <= epsilon, plus the radius statistics delta
/// (largest selected norm) and count.
struct Neighborhood {
  std::vector<Eigen::Index> indices;
  double epsilon = 0.0;
  double delta = 0.0;

  std::size_t count() const noexcept { return indices.size(); }
};

inline Neighborhood select_neighborhood(const Dataset& data, double epsilon) {
  require(epsilon > 0.0, "bandwidth must be positive");
  Neighborhood nb;
  nb.epsilon = epsilon;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double r = data.xs().row(i).norm();
    if (r <= epsilon) {
      nb.indices.push_back(i);
      if (r > nb.delta) nb.delta = r;
    }
  }
  return nb;
}

} // namespace locpoly
