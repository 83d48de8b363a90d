#include "graphopt/constraints.hpp"

#include <algorithm>
#include <limits>

#include "graphopt/error.hpp"

namespace graphopt {

void ConstraintSet::add(AffineConstraint c) {
  for (const auto& [i, a] : c.terms) {
    if (i >= dimension_) throw StructuralError("constraint \"" + c.label + "\" references coordinate out of range");
    (void)a;
  }
  constraints_.push_back(std::move(c));
}

void ConstraintSet::add_bounds(std::size_t i, double lo, double hi, const std::string& name) {
  add({{{i, -1.0}}, lo, name + ".lower"});
  add({{{i, 1.0}}, -hi, name + ".upper"});
}

void ConstraintSet::add_sum_limit(std::span<const std::size_t> idx, double limit, const std::string& name) {
  AffineConstraint c;
  c.label = name;
  c.offset = -limit;
  for (std::size_t i : idx) c.terms.emplace_back(i, 1.0);
  add(std::move(c));
}

std::vector<double> ConstraintSet::values(std::span<const double> x) const {
  if (x.size() != dimension_) throw StructuralError("constraint evaluation: wrong dimension");
  std::vector<double> out;
  out.reserve(constraints_.size());
  for (const auto& c : constraints_) out.push_back(c.value(x));
  return out;
}

double ConstraintSet::max_violation(std::span<const double> x) const {
  if (x.size() != dimension_) throw StructuralError("constraint evaluation: wrong dimension");
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : constraints_) worst = std::max(worst, c.value(x));
  return worst;
}

bool ConstraintSet::project(std::span<double> x, double tol, std::size_t max_sweeps) const {
  if (x.size() != dimension_) throw StructuralError("projection: wrong dimension");
  if (max_violation(x) <= tol) return true;
  // Dykstra: one correction vector per half-space, stored sparsely as a
  // multiple of the constraint normal.
  std::vector<double> correction(constraints_.size(), 0.0);
  std::vector<double> norm2(constraints_.size(), 0.0);
  for (std::size_t k = 0; k < constraints_.size(); ++k) {
    for (const auto& [i, a] : constraints_[k].terms) norm2[k] += a * a;
  }
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    for (std::size_t k = 0; k < constraints_.size(); ++k) {
      if (norm2[k] == 0.0) continue;
      const auto& c = constraints_[k];
      // y = x + correction_k * a ; project y onto {a.y + b <= 0}.
      for (const auto& [i, a] : c.terms) x[i] += correction[k] * a;
      const double v = c.value(x);
      const double step = std::max(0.0, v) / norm2[k];
      for (const auto& [i, a] : c.terms) x[i] -= step * a;
      correction[k] = step;
    }
    if (max_violation(x) <= tol) return true;
  }
  return max_violation(x) <= tol;
}

}  // namespace graphopt
