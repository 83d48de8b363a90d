#include "graphopt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "graphopt/digest.hpp"
#include "graphopt/error.hpp"

namespace graphopt {

Graph::Graph(std::vector<double> alphas, std::vector<double> transitions)
    : alphas_(std::move(alphas)), transitions_(std::move(transitions)) {
  if (transitions_.size() != alphas_.size() * alphas_.size()) {
    throw StructuralError("graph: transition matrix has " + std::to_string(transitions_.size()) +
                          " entries, expected " + std::to_string(alphas_.size()) + "^2");
  }
}

Graph Graph::from_rows(std::vector<double> alphas, const std::vector<std::vector<double>>& rows) {
  const std::size_t m = alphas.size();
  if (rows.size() != m) {
    throw StructuralError("graph: " + std::to_string(rows.size()) + " transition rows for " +
                          std::to_string(m) + " hypotheses");
  }
  std::vector<double> flat;
  flat.reserve(m * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw StructuralError("graph: transition matrix is not square");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Graph(std::move(alphas), std::move(flat));
}

Graph Graph::zero(std::size_t m) { return Graph(std::vector<double>(m, 0.0), std::vector<double>(m * m, 0.0)); }

double ValidationReport::magnitude_of(std::string_view constraint) const {
  for (const auto& v : violations_) {
    if (v.constraint == constraint) return v.magnitude;
  }
  return 0.0;
}

ValidationReport validate_graph(const Graph& g, double alpha_total) {
  ValidationReport report;
  const std::size_t m = g.size();
  const auto idx = [](std::size_t i) { return std::to_string(i); };

  bool any_nan = false;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = g.alpha(i);
    if (std::isnan(a)) {
      any_nan = true;
      continue;
    }
    total += a;
    if (a < -kFeasibilityTol) report.add("alpha[" + idx(i) + "].lower", -a);
    if (a > alpha_total + kFeasibilityTol) report.add("alpha[" + idx(i) + "].upper", a - alpha_total);
  }
  if (total > alpha_total + kFeasibilityTol) report.add("alpha.total", total - alpha_total);

  for (std::size_t i = 0; i < m; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double t = g.transition(i, j);
      if (std::isnan(t)) {
        any_nan = true;
        continue;
      }
      const std::string name = "t[" + idx(i) + "][" + idx(j) + "]";
      if (i == j) {
        if (t != 0.0) report.add(name + ".diagonal", std::abs(t));
        continue;
      }
      row_sum += t;
      if (t < -kFeasibilityTol) report.add(name + ".lower", -t);
      if (t > 1.0 + kFeasibilityTol) report.add(name + ".upper", t - 1.0);
    }
    if (row_sum > 1.0 + kFeasibilityTol) report.add("row[" + idx(i) + "].sum", row_sum - 1.0);
  }
  if (any_nan) report.add("nan", std::numeric_limits<double>::infinity());
  return report;
}

Graph holm_graph(std::size_t m, double alpha_total) {
  if (m < 2) throw InputError("holm_graph: need at least 2 hypotheses");
  Graph g(std::vector<double>(m, alpha_total / static_cast<double>(m)), std::vector<double>(m * m, 0.0));
  const double share = 1.0 / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j) g.transition(i, j) = share;
    }
  }
  return g;
}

Graph fixed_sequence_graph(std::span<const std::size_t> order, double alpha_total) {
  const std::size_t m = order.size();
  std::vector<bool> seen(m, false);
  for (std::size_t k : order) {
    if (k >= m || seen[k]) throw InputError("fixed_sequence_graph: order is not a permutation of 0..m-1");
    seen[k] = true;
  }
  Graph g = Graph::zero(m);
  if (m == 0) return g;
  g.alpha(order[0]) = alpha_total;
  for (std::size_t k = 0; k + 1 < m; ++k) g.transition(order[k], order[k + 1]) = 1.0;
  return g;
}

nlohmann::json to_json(const Graph& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    rows.push_back(std::vector<double>(g.row(i).begin(), g.row(i).end()));
  }
  return {{"alphas", std::vector<double>(g.alphas().begin(), g.alphas().end())}, {"transitions", rows}};
}

Graph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("alphas") || !j.contains("transitions")) {
    throw ConfigError("graph JSON must be an object with \"alphas\" and \"transitions\"");
  }
  try {
    return Graph::from_rows(j.at("alphas").get<std::vector<double>>(),
                            j.at("transitions").get<std::vector<std::vector<double>>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("graph JSON: ") + e.what());
  }
}

std::string graph_digest(const Graph& g) { return content_digest(to_json(g)); }

}  // namespace graphopt
