#include "graphopt/procedure.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "graphopt/error.hpp"

namespace graphopt {
namespace {

// In-place removal of j from (alphas, transitions) restricted to `active`.
// Row j and column j are read while updating the other rows and zeroed last.
void remove_in_place(std::size_t m, double* alphas, double* t, const std::uint8_t* active, std::size_t j) {
  const double aj = alphas[j];
  const double* row_j = t + j * m;
  for (std::size_t l = 0; l < m; ++l) {
    if (l == j || !active[l]) continue;
    alphas[l] += aj * row_j[l];
  }
  alphas[j] = 0.0;

  for (std::size_t l = 0; l < m; ++l) {
    if (l == j || !active[l]) continue;
    double* row_l = t + l * m;
    const double t_lj = row_l[j];
    const double denom = 1.0 - t_lj * row_j[l];
    if (denom <= kDegenerateDenominator) {
      for (std::size_t k = 0; k < m; ++k) row_l[k] = 0.0;
      continue;
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (k == l || k == j || !active[k]) continue;
      row_l[k] = (row_l[k] + t_lj * row_j[k]) / denom;
    }
  }
  for (std::size_t k = 0; k < m; ++k) {
    t[j * m + k] = 0.0;
    t[k * m + j] = 0.0;
  }
}

}  // namespace

Graph remove_hypothesis(const Graph& g, std::size_t j) {
  const std::size_t m = g.size();
  if (j >= m) throw InputError("remove_hypothesis: index " + std::to_string(j) + " out of range");
  std::vector<double> alphas(g.alphas().begin(), g.alphas().end());
  std::vector<double> t(g.transitions().begin(), g.transitions().end());
  std::vector<std::uint8_t> active(m, 1);
  active[j] = 0;
  remove_in_place(m, alphas.data(), t.data(), active.data(), j);
  return Graph(std::move(alphas), std::move(t));
}

void ProcedureWorkspace::resize(std::size_t m) {
  alphas_.resize(m);
  transitions_.resize(m * m);
  active_.resize(m);
}

void run_procedure_unchecked(const Graph& g, const double* p, ProcedureWorkspace& ws, std::uint8_t* out) {
  const std::size_t m = g.size();
  if (ws.alphas_.size() != m) ws.resize(m);
  double* alphas = ws.alphas_.data();
  double* t = ws.transitions_.data();
  std::uint8_t* active = ws.active_.data();
  std::copy(g.alphas().begin(), g.alphas().end(), alphas);
  std::copy(g.transitions().begin(), g.transitions().end(), t);
  for (std::size_t i = 0; i < m; ++i) {
    active[i] = 1;
    out[i] = 0;
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::size_t remaining = m; remaining > 0; --remaining) {
    std::size_t best = m;
    double best_ratio = kInf;
    for (std::size_t i = 0; i < m; ++i) {
      if (!active[i]) continue;
      double ratio;
      if (alphas[i] > 0.0) {
        ratio = p[i] / alphas[i];
      } else {
        ratio = p[i] == 0.0 ? 0.0 : kInf;
      }
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best = i;
      }
    }
    if (best == m || !(p[best] <= alphas[best])) return;
    out[best] = 1;
    active[best] = 0;
    if (remaining > 1) remove_in_place(m, alphas, t, active, best);
  }
}

DecisionVector run_procedure(const Graph& g, std::span<const double> p) {
  const std::size_t m = g.size();
  if (p.size() != m) {
    throw InputError("run_procedure: " + std::to_string(p.size()) + " p-values for a graph of size " +
                     std::to_string(m));
  }
  for (double v : p) {
    if (std::isnan(v) || v < 0.0 || v > 1.0) throw InputError("run_procedure: p-values must lie in [0, 1]");
  }
  const ValidationReport report = validate_graph(g, 1.0);
  if (!report.feasible()) {
    throw InputError("run_procedure: infeasible graph (" + report.violations().front().constraint + ")");
  }
  ProcedureWorkspace ws(m);
  DecisionVector out(m, 0);
  run_procedure_unchecked(g, p.data(), ws, out.data());
  return out;
}

DecisionVector closure_holm_oracle(std::span<const double> p, double alpha_total) {
  const std::size_t m = p.size();
  if (m > 12) throw InputError("closure_holm_oracle: refusing m > 12 (2^m - 1 intersections)");
  for (double v : p) {
    if (std::isnan(v)) throw InputError("closure_holm_oracle: NaN p-value");
  }
  DecisionVector out(m, 1);
  if (m == 0) return out;
  const std::uint32_t full = (1u << m) - 1u;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    const double weight = 1.0 / static_cast<double>(std::popcount(mask));
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) min_ratio = std::min(min_ratio, p[i] / weight);
    }
    if (min_ratio <= alpha_total) continue;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) out[i] = 0;
    }
  }
  return out;
}

}  // namespace graphopt
