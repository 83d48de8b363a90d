#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace graphopt {

/// Absolute tolerance used for every graph feasibility check.
inline constexpr double kFeasibilityTol = 1e-12;

/// A graphical multiple test procedure: initial significance levels plus an
/// m x m transition matrix (row-major). Entry (i, j) is the fraction of
/// hypothesis i's level that moves to j when i is rejected.
class Graph {
 public:
  Graph() = default;
  /// Throws StructuralError unless transitions.size() == alphas.size()^2.
  Graph(std::vector<double> alphas, std::vector<double> transitions);

  static Graph from_rows(std::vector<double> alphas, const std::vector<std::vector<double>>& rows);
  /// All alphas and transitions zero.
  static Graph zero(std::size_t m);

  std::size_t size() const { return alphas_.size(); }

  double alpha(std::size_t i) const { return alphas_[i]; }
  double& alpha(std::size_t i) { return alphas_[i]; }
  double transition(std::size_t i, std::size_t j) const { return transitions_[i * size() + j]; }
  double& transition(std::size_t i, std::size_t j) { return transitions_[i * size() + j]; }

  std::span<const double> alphas() const { return alphas_; }
  std::span<const double> transitions() const { return transitions_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(transitions_).subspan(i * size(), size());
  }

  bool operator==(const Graph&) const = default;

 private:
  std::vector<double> alphas_;
  std::vector<double> transitions_;
};

struct Violation {
  std::string constraint;
  double magnitude = 0.0;
};

class ValidationReport {
 public:
  bool feasible() const { return violations_.empty(); }
  const std::vector<Violation>& violations() const { return violations_; }
  void add(std::string constraint, double magnitude) {
    violations_.push_back({std::move(constraint), magnitude});
  }
  /// Magnitude of the named violation, or 0 when it is absent.
  double magnitude_of(std::string_view constraint) const;

 private:
  std::vector<Violation> violations_;
};

/// Checks per-entry bounds, the zero diagonal, row sums <= 1 and
/// sum(alphas) <= alpha_total, all at absolute tolerance kFeasibilityTol.
/// Constraint ids: "alpha[i].lower", "alpha[i].upper", "alpha.total",
/// "t[i][j].lower", "t[i][j].upper", "t[i][i].diagonal", "row[i].sum",
/// "nan". Indices are 0-based.
ValidationReport validate_graph(const Graph& g, double alpha_total);

/// Holm procedure as a graph: equal alphas, 1/(m-1) off the diagonal.
Graph holm_graph(std::size_t m, double alpha_total);

/// Fixed-sequence procedure; `order` is a 0-based permutation.
Graph fixed_sequence_graph(std::span<const std::size_t> order, double alpha_total);

nlohmann::json to_json(const Graph& g);
Graph graph_from_json(const nlohmann::json& j);
std::string graph_digest(const Graph& g);

}  // namespace graphopt
