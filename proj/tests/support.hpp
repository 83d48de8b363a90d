#pragma once

#include <cstddef>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "graphopt/fnn.hpp"
#include "graphopt/graph.hpp"
#include "graphopt/graph_space.hpp"
#include "graphopt/optimize.hpp"
#include "graphopt/procedure.hpp"
#include "graphopt/rng.hpp"

namespace graphopt::testing {

/// Two doses x two endpoints; primaries are H1 and H3.
inline Graph two_dose_graph() {
  return Graph::from_rows({0.0125, 0.0, 0.0125, 0.0}, {{0.0, 0.8, 0.2, 0.0},
                                                       {0.0, 0.0, 0.6, 0.4},
                                                       {0.2, 0.0, 0.0, 0.8},
                                                       {0.6, 0.4, 0.0, 0.0}});
}

/// Family of the two-dose example: alpha_1 free (alpha_3 remainder), one
/// free edge per row.
inline FamilyConfig two_dose_family() {
  FamilyConfig f;
  f.m = 4;
  f.alpha_total = 0.025;
  f.alpha.free = {0};
  f.alpha.fixed = {{1, 0.0}, {3, 0.0}};
  f.alpha.remainder = 2;
  f.rows.resize(4);
  f.rows[0] = {{1}, {{3, 0.0}}, 2};
  f.rows[1] = {{2}, {{0, 0.0}}, 3};
  f.rows[2] = {{0}, {{1, 0.0}}, 3};
  f.rows[3] = {{0}, {{2, 0.0}}, 1};
  return f;
}

/// Feasible graph from the fully free family, with some entries knocked to
/// zero so sparse graphs are covered too.
inline Graph random_graph(std::size_t m, double alpha_total, Rng& rng) {
  const ParamSpace space = ParamSpace::fully_free(m, alpha_total);
  auto x = sample_uniform(space, 1, rng.next_u64()).front();
  for (auto& v : x) {
    if (rng.uniform() < 0.2) v = 0.0;
  }
  return decode(x, space);
}

/// p-values mixing small and large magnitudes so many hypotheses reject.
inline std::vector<double> random_pvalues(std::size_t m, Rng& rng) {
  std::vector<double> p(m);
  for (auto& v : p) v = rng.uniform() < 0.5 ? 0.05 * rng.uniform() : rng.uniform();
  return p;
}

/// Concave quadratic over box-and-budget groups with a closed-form optimum:
/// within each group the weights are equal, so the maximiser is the
/// Euclidean projection of the target onto {0 <= x <= u, sum x <= c}.
struct QuadraticCase {
  OptProblem problem;
  std::vector<double> optimum;
};

inline std::vector<double> project_capped_simplex(const std::vector<double>& t, const std::vector<double>& u, double c) {
  const auto at = [&](double tau) {
    std::vector<double> x(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) x[i] = std::clamp(t[i] - tau, 0.0, u[i]);
    return x;
  };
  const auto total = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  };
  if (total(at(0.0)) <= c) return at(0.0);
  double lo = 0.0, hi = *std::max_element(t.begin(), t.end());
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(at(mid)) > c ? lo : hi) = mid;
  }
  return at(hi);
}

inline QuadraticCase random_quadratic(Rng& rng) {
  const std::size_t d = 1 + rng.below(10);
  std::vector<double> target(d), weights(d), optimum(d);
  ConstraintSet cs(d);
  std::size_t start = 0;
  while (start < d) {
    const std::size_t len = std::min<std::size_t>(d - start, 1 + rng.below(4));
    const double w = 0.5 + 2.0 * rng.uniform();
    std::vector<double> t(len), u(len);
    std::vector<std::size_t> idx(len);
    double cap_max = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      idx[k] = start + k;
      t[k] = 1.5 * rng.uniform() - 0.25;
      u[k] = 0.3 + 0.7 * rng.uniform();
      cap_max += u[k];
      cs.add_bounds(idx[k], 0.0, u[k], "x" + std::to_string(idx[k]));
      target[idx[k]] = t[k];
      weights[idx[k]] = w;
    }
    const double c = (0.3 + 0.6 * rng.uniform()) * cap_max;
    if (len > 1) cs.add_sum_limit(idx, c, "group" + std::to_string(start));
    const auto x = project_capped_simplex(t, u, len > 1 ? c : cap_max);
    for (std::size_t k = 0; k < len; ++k) optimum[idx[k]] = x[k];
    start += len;
  }
  return {quadratic_problem(target, weights, cs), optimum};
}

/// Every final rejection set reachable by rejecting any eligible hypothesis
/// first, recursively.
inline void all_orders(const Graph& g, const std::vector<double>& p, std::vector<bool> active, std::set<std::vector<bool>>& out) {
  bool any = false;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (!active[j] || !(g.alpha(j) > 0.0) || p[j] > g.alpha(j)) continue;
    any = true;
    auto next = active;
    next[j] = false;
    all_orders(remove_hypothesis(g, j), p, next, out);
  }
  if (!any) {
    std::vector<bool> rejected(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) rejected[i] = !active[i];
    out.insert(rejected);
  }
}

/// Random sigmoid net with 1 to 3 hidden layers and a random input
/// standardizer and output map.
inline Network random_network(std::size_t d, Rng& rng) {
  NetworkSpec spec;
  const std::size_t depth = 1 + rng.below(3);
  for (std::size_t l = 0; l < depth; ++l) spec.hidden_widths.push_back(1 + rng.below(12));
  std::vector<DenseLayer> layers;
  std::size_t in = d;
  auto widths = spec.hidden_widths;
  widths.push_back(1);
  for (std::size_t out : widths) {
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = 3.0 * rng.normal() / std::sqrt(in);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.normal();
    layers.push_back(std::move(layer));
    in = out;
  }
  Standardizer st;
  st.mean = Eigen::VectorXd(d);
  st.sd = Eigen::VectorXd(d);
  for (std::size_t k = 0; k < d; ++k) {
    st.mean[k] = rng.normal();
    st.sd[k] = 0.2 + rng.uniform();
  }
  return Network(spec, std::move(layers), st, {0.1 + rng.uniform(), rng.normal()});
}

}  // namespace graphopt::testing
