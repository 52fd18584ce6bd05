#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "locpoly/error.hpp"
#include "locpoly/multi_index.hpp"

namespace locpoly {

struct OperatorTerm {
  MultiIndex alpha;
  double coefficient = 1.0;
};

/// Linear differential operator L = sum c_a d^a acting on functions of d variables.
class DifferentialOperator {
public:
  DifferentialOperator() = default;

  explicit DifferentialOperator(std::vector<OperatorTerm> terms) : terms_(std::move(terms)) {
    require(!terms_.empty(), "differential operator needs at least one term");
    dimension_ = terms_.front().alpha.dimension();
    require(dimension_ >= 1, "differential operator dimension must be >= 1");
    for (const auto& t : terms_) {
      require(t.alpha.dimension() == dimension_, "operator terms disagree on dimension");
      order_ = std::max(order_, t.alpha.order());
    }
  }

  static DifferentialOperator identity(int d) { return DifferentialOperator({{MultiIndex::zero(d), 1.0}}); }

  static DifferentialOperator partial(const MultiIndex& alpha, double coefficient = 1.0) {
    return DifferentialOperator({{alpha, coefficient}});
  }

  int dimension() const noexcept { return dimension_; }
  int order() const noexcept { return order_; }
  const std::vector<OperatorTerm>& terms() const noexcept { return terms_; }

  /// c1 * this + c2 * other, with terms concatenated (duplicates allowed).
  DifferentialOperator combine(double c1, const DifferentialOperator& other, double c2) const {
    require(dimension_ == other.dimension_, "operator dimension mismatch");
    std::vector<OperatorTerm> terms;
    for (const auto& t : terms_) terms.push_back({t.alpha, c1 * t.coefficient});
    for (const auto& t : other.terms_) terms.push_back({t.alpha, c2 * t.coefficient});
    return DifferentialOperator(std::move(terms));
  }

private:
  std::vector<OperatorTerm> terms_;
  int dimension_ = 0;
  int order_ = 0;
};

/// Parses `identity` or a chain of 1-based axis derivatives such as `d1`,
/// `d1d2` or `d2d2`.
inline DifferentialOperator parse_operator(std::string_view text, int d) {
  require(d >= 1, "operator dimension must be >= 1");
  if (text == "identity") return DifferentialOperator::identity(d);
  std::vector<int> exponents(static_cast<std::size_t>(d), 0);
  std::size_t pos = 0;
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "empty operator expression");
  while (pos < text.size()) {
    if (text[pos] != 'd')
      throw Error(ErrorCode::InvalidArgument, "bad operator '" + std::string(text) + "': expected identity or d<j>[d<l>...]");
    ++pos;
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (start == pos)
      throw Error(ErrorCode::InvalidArgument, "bad operator '" + std::string(text) + "': missing axis after 'd'");
    int axis = std::stoi(std::string(text.substr(start, pos - start)));
    if (axis < 1 || axis > d)
      throw Error(ErrorCode::InvalidArgument,
                  "bad operator '" + std::string(text) + "': axis " + std::to_string(axis) + " outside 1.." + std::to_string(d));
    ++exponents[static_cast<std::size_t>(axis - 1)];
  }
  return DifferentialOperator::partial(MultiIndex(std::move(exponents)));
}

/// Inverse of parse_operator for single-term, unit-coefficient operators.
inline std::string operator_name(const MultiIndex& alpha) {
  if (alpha.order() == 0) return "identity";
  std::string s;
  for (int j = 0; j < alpha.dimension(); ++j)
    for (int r = 0; r < alpha[static_cast<std::size_t>(j)]; ++r) s += "d" + std::to_string(j + 1);
  return s;
}

} // namespace locpoly
