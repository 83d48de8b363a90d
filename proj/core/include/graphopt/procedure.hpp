#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "graphopt/graph.hpp"

namespace graphopt {

/// decisions[i] == 1 when H_i is rejected.
using DecisionVector = std::vector<std::uint8_t>;

/// Denominator threshold below which a row update is treated as degenerate.
inline constexpr double kDegenerateDenominator = 1e-12;

/// Rejects hypothesis j and redistributes its level and edges over the
/// remaining hypotheses. Hypotheses other than j are treated as survivors;
/// previously removed ones are all-zero and stay all-zero under the update.
/// Row l is zeroed when 1 - t_lj * t_jl <= kDegenerateDenominator.
Graph remove_hypothesis(const Graph& g, std::size_t j);

/// Scratch state for the sequentially rejective procedure, so repeated calls
/// (one per Monte Carlo row) do not allocate.
class ProcedureWorkspace {
 public:
  explicit ProcedureWorkspace(std::size_t m = 0) { resize(m); }
  void resize(std::size_t m);

 private:
  friend void run_procedure_unchecked(const Graph&, const double*, ProcedureWorkspace&, std::uint8_t*);
  std::vector<double> alphas_;
  std::vector<double> transitions_;
  std::vector<std::uint8_t> active_;
};

/// Sequentially rejective graphical procedure on one p-value vector.
///
/// Each step picks the active hypothesis minimising p_i / alpha_i (smallest
/// index on ties; p/0 is +inf for p > 0 and 0 for p == 0), rejects it if
/// p_j <= alpha_j and updates the graph, otherwise stops.
///
/// Throws InputError for a wrong-length or NaN/out-of-range p, or for a graph
/// failing validate_graph(g, 1.0). The total-alpha budget is the caller's to
/// check.
DecisionVector run_procedure(const Graph& g, std::span<const double> p);

/// Hot-path variant with no validation; `out` must hold g.size() entries.
void run_procedure_unchecked(const Graph& g, const double* p, ProcedureWorkspace& ws, std::uint8_t* out);

/// Closed testing with equal-weight Bonferroni local tests, by exhaustive
/// enumeration of the 2^m - 1 intersections. Refuses m > 12.
DecisionVector closure_holm_oracle(std::span<const double> p, double alpha_total);

}  // namespace graphopt
