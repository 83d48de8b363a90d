#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace graphopt {

/// c(x) = sum_k coef_k * x[index_k] + offset; feasible when c(x) <= 0.
struct AffineConstraint {
  std::vector<std::pair<std::size_t, double>> terms;
  double offset = 0.0;
  std::string label;

  double value(std::span<const double> x) const {
    double v = offset;
    for (const auto& [i, a] : terms) v += a * x[i];
    return v;
  }
};

/// Affine inequality system over a d-dimensional free vector.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::size_t dimension) : dimension_(dimension) {}

  void add(AffineConstraint c);
  /// lo <= x_i <= hi as two constraints.
  void add_bounds(std::size_t i, double lo, double hi, const std::string& name);
  /// sum_{i in idx} x_i <= limit.
  void add_sum_limit(std::span<const std::size_t> idx, double limit, const std::string& name);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return constraints_.size(); }
  const std::vector<AffineConstraint>& constraints() const { return constraints_; }

  std::vector<double> values(std::span<const double> x) const;
  /// max_k c_k(x), or -inf when empty.
  double max_violation(std::span<const double> x) const;
  bool feasible(std::span<const double> x, double tol = 1e-12) const { return max_violation(x) <= tol; }

  /// Euclidean projection onto the polytope by Dykstra's alternating
  /// projections, stopping once max_violation <= tol. Returns false when the
  /// sweep budget runs out first.
  bool project(std::span<double> x, double tol = 1e-12, std::size_t max_sweeps = 20000) const;

 private:
  std::size_t dimension_ = 0;
  std::vector<AffineConstraint> constraints_;
};

}  // namespace graphopt
