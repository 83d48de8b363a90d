#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "graphopt/constraints.hpp"

namespace graphopt::detail {

/// Constraint system in y = x / scale with every row normalised to unit
/// length, so row values are signed distances.
class ScaledSystem {
 public:
  struct Row {
    std::vector<std::pair<std::size_t, double>> terms;
    double offset = 0.0;
  };

  ScaledSystem(const ConstraintSet& c, std::span<const double> scale) : dimension_(c.dimension()) {
    for (const auto& src : c.constraints()) {
      Row row;
      double norm2 = 0.0;
      for (const auto& [i, a] : src.terms) {
        row.terms.emplace_back(i, a * scale[i]);
        norm2 += a * scale[i] * a * scale[i];
      }
      row.offset = src.offset;
      if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& t : row.terms) t.second *= inv;
        row.offset *= inv;
      }
      rows_.push_back(std::move(row));
    }
  }

  std::size_t size() const { return rows_.size(); }
  std::size_t dimension() const { return dimension_; }
  const Row& row(std::size_t k) const { return rows_[k]; }

  double value(std::size_t k, std::span<const double> y) const {
    double v = rows_[k].offset;
    for (const auto& [i, a] : rows_[k].terms) v += a * y[i];
    return v;
  }
  double dot(std::size_t k, std::span<const double> d) const {
    double v = 0.0;
    for (const auto& [i, a] : rows_[k].terms) v += a * d[i];
    return v;
  }
  double max_violation(std::span<const double> y) const {
    double worst = -INFINITY;
    for (std::size_t k = 0; k < rows_.size(); ++k) worst = std::max(worst, value(k, y));
    return worst;
  }
  double squared_violation(std::span<const double> y) const {
    double s = 0.0;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const double v = value(k, y);
      if (v > 0.0) s += v * v;
    }
    return s;
  }

 private:
  std::size_t dimension_ = 0;
  std::vector<Row> rows_;
};

inline std::vector<double> to_scaled(std::span<const double> x, std::span<const double> scale) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / scale[i];
  return y;
}

inline std::vector<double> from_scaled(std::span<const double> y, std::span<const double> scale) {
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = y[i] * scale[i];
  return x;
}

/// True when |x_new_i - x_old_i| < rel |x_new_i| + abs for every i.
inline bool small_change(std::span<const double> x_old, std::span<const double> x_new, double rel, double abs) {
  for (std::size_t i = 0; i < x_new.size(); ++i) {
    if (!(std::abs(x_new[i] - x_old[i]) < rel * std::abs(x_new[i]) + abs)) return false;
  }
  return true;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace graphopt::detail
