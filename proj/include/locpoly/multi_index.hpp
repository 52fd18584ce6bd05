#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "locpoly/error.hpp"

namespace locpoly {

/// Exponent tuple (a_1, ..., a_d) addressing the monomial x^a and the partial
/// derivative d^a. The total order |a| is cached.
class MultiIndex {
public:
  MultiIndex() = default;

  explicit MultiIndex(std::vector<int> exponents) : exponents_(std::move(exponents)) {
    for (int e : exponents_) {
      require(e >= 0, "multi-index exponents must be non-negative");
      order_ += e;
    }
  }

  MultiIndex(std::initializer_list<int> exponents) : MultiIndex(std::vector<int>(exponents)) {}

  static MultiIndex zero(int d) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(d), 0)); }

  static MultiIndex unit(int d, int axis) {
    require(axis >= 0 && axis < d, "axis out of range");
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    e[static_cast<std::size_t>(axis)] = 1;
    return MultiIndex(std::move(e));
  }

  int dimension() const noexcept { return static_cast<int>(exponents_.size()); }
  int order() const noexcept { return order_; }
  int operator[](std::size_t j) const { return exponents_[j]; }
  const std::vector<int>& exponents() const noexcept { return exponents_; }

  /// Multi-index factorial a! = a_1! ... a_d!, the value of d^a x^a.
  double factorial() const noexcept {
    double f = 1.0;
    for (int e : exponents_)
      for (int i = 2; i <= e; ++i) f *= i;
    return f;
  }

  MultiIndex operator+(const MultiIndex& other) const {
    require(dimension() == other.dimension(), "multi-index dimension mismatch");
    std::vector<int> e(exponents_);
    for (std::size_t j = 0; j < e.size(); ++j) e[j] += other.exponents_[j];
    return MultiIndex(std::move(e));
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t j = 0; j < exponents_.size(); ++j) {
      if (j) s += ",";
      s += std::to_string(exponents_[j]);
    }
    return s + ")";
  }

  bool operator==(const MultiIndex& other) const noexcept { return exponents_ == other.exponents_; }

  /// Graded order: total degree ascending, then exponents in descending
  /// lexicographic order, so (2,0) < (1,1) < (0,2).
  std::strong_ordering operator<=>(const MultiIndex& other) const noexcept {
    if (auto c = order_ <=> other.order_; c != 0) return c;
    return other.exponents_ <=> exponents_;
  }

private:
  std::vector<int> exponents_;
  int order_ = 0;
};

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) result = result * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return result;
}

/// All multi-indices of dimension d with |a| <= max_degree, graded order.
class BasisSet {
public:
  BasisSet() = default;
  BasisSet(int dimension, int max_degree, std::vector<MultiIndex> indices)
      : dimension_(dimension), max_degree_(max_degree), indices_(std::move(indices)) {}

  int dimension() const noexcept { return dimension_; }
  int max_degree() const noexcept { return max_degree_; }
  std::size_t size() const noexcept { return indices_.size(); }
  const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
  const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }

  /// Position of alpha in the basis, or size() if absent.
  std::size_t index_of(const MultiIndex& alpha) const {
    if (alpha.dimension() != dimension_ || alpha.order() > max_degree_) return indices_.size();
    // Indices are sorted, so a binary search suffices.
    auto lo = indices_.begin(), hi = indices_.end();
    while (lo < hi) {
      auto mid = lo + (hi - lo) / 2;
      if (*mid < alpha) lo = mid + 1;
      else hi = mid;
    }
    if (lo != indices_.end() && *lo == alpha) return static_cast<std::size_t>(lo - indices_.begin());
    return indices_.size();
  }

private:
  int dimension_ = 0;
  int max_degree_ = 0;
  std::vector<MultiIndex> indices_;
};

namespace detail {
inline void fill_degree(int remaining, std::size_t axis, std::vector<int>& current, std::vector<MultiIndex>& out) {
  if (axis + 1 == current.size()) {
    current[axis] = remaining;
    out.emplace_back(current);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    current[axis] = e;
    fill_degree(remaining - e, axis + 1, current, out);
  }
  current[axis] = 0;
}
} // namespace detail

inline BasisSet enumerate_basis(int d, int max_degree) {
  require(d >= 1, "basis dimension must be >= 1");
  require(max_degree >= 0, "basis degree must be >= 0");
  std::vector<MultiIndex> indices;
  indices.reserve(binomial(max_degree + d, d));
  std::vector<int> current(static_cast<std::size_t>(d), 0);
  for (int degree = 0; degree <= max_degree; ++degree) detail::fill_degree(degree, 0, current, indices);
  return BasisSet(d, max_degree, std::move(indices));
}

} // namespace locpoly
