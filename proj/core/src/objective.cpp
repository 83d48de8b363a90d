#include "graphopt/objective.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "graphopt/error.hpp"
#include "graphopt/procedure.hpp"
#include "parallel.hpp"

namespace graphopt {
namespace {

constexpr std::size_t kRowsPerTask = 8192;

void check_weights(std::span<const double> w) {
  if (w.empty()) throw InputError("objective: empty weight vector");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("objective: weights must be finite and nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw InputError("objective: weights must sum to 1");
}

void check_graph_for_panel(const Graph& g, std::size_t cols) {
  if (g.size() != cols) {
    throw InputError("graph has " + std::to_string(g.size()) + " hypotheses but panel has " + std::to_string(cols) +
                     " columns");
  }
  const auto report = validate_graph(g, 1.0);
  if (!report.feasible()) throw InputError("infeasible graph (" + report.violations().front().constraint + ")");
}

}  // namespace

ObjectiveSpec ObjectiveSpec::plain(std::vector<double> weights) {
  check_weights(weights);
  ObjectiveSpec s;
  s.kind_ = ObjectiveKind::plain;
  s.weights_ = std::move(weights);
  return s;
}

ObjectiveSpec ObjectiveSpec::gated(std::vector<double> weights, std::size_t gate) {
  check_weights(weights);
  if (gate >= weights.size()) throw InputError("objective: gate index out of range");
  if (weights[gate] != 0.0) throw InputError("objective: the gate endpoint must carry weight 0");
  ObjectiveSpec s;
  s.kind_ = ObjectiveKind::gated;
  s.weights_ = std::move(weights);
  s.gate_ = gate;
  return s;
}

ObjectiveSpec ObjectiveSpec::equal_weights(std::size_t m, std::optional<std::size_t> gate) {
  if (!gate) return plain(std::vector<double>(m, 1.0 / static_cast<double>(m)));
  if (m < 2) throw InputError("objective: a gated objective needs at least 2 endpoints");
  std::vector<double> w(m, 1.0 / static_cast<double>(m - 1));
  if (*gate < m) w[*gate] = 0.0;
  return gated(std::move(w), *gate);
}

ObjectiveSpec objective_from_json(const nlohmann::json& j, std::size_t m) {
  try {
    const std::string kind = j.value("kind", "plain");
    std::optional<std::size_t> gate;
    if (kind == "gated") {
      gate = j.at("gate").get<std::size_t>();
    } else if (kind != "plain") {
      throw ConfigError("objective: unknown kind \"" + kind + "\"");
    }
    const auto& w = j.contains("weights") ? j.at("weights") : nlohmann::json("equal");
    if (w.is_string()) {
      if (w.get<std::string>() != "equal") throw ConfigError("objective: weights must be a list or \"equal\"");
      return ObjectiveSpec::equal_weights(m, gate);
    }
    auto weights = w.get<std::vector<double>>();
    if (weights.size() != m) throw ConfigError("objective: weight count does not match m");
    return gate ? ObjectiveSpec::gated(std::move(weights), *gate) : ObjectiveSpec::plain(std::move(weights));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("objective JSON: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json to_json(const ObjectiveSpec& spec) {
  nlohmann::json j = {{"kind", kind_name(spec.kind())},
                      {"weights", std::vector<double>(spec.weights().begin(), spec.weights().end())}};
  if (spec.gate()) j["gate"] = *spec.gate();
  return j;
}

std::string kind_name(ObjectiveKind kind) { return kind == ObjectiveKind::plain ? "plain" : "gated"; }

DecisionMatrix::DecisionMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw StructuralError("decision matrix: size does not match rows x cols");
}

DecisionMatrix decide_all(const Graph& g, const PValuePanel& panel, unsigned threads) {
  check_graph_for_panel(g, panel.cols());
  DecisionMatrix d(panel.rows(), panel.cols());
  const std::size_t tasks = (panel.rows() + kRowsPerTask - 1) / kRowsPerTask;
  detail::parallel_for(tasks, threads, [&](std::size_t task) {
    ProcedureWorkspace ws(g.size());
    const std::size_t end = std::min(panel.rows(), (task + 1) * kRowsPerTask);
    for (std::size_t r = task * kRowsPerTask; r < end; ++r) {
      run_procedure_unchecked(g, panel.row(r).data(), ws, d.row_data(r));
    }
  });
  return d;
}

namespace {

void tally_row(std::span<const std::uint8_t> row, std::optional<std::size_t> gate, RejectionCounts& c) {
  bool any = false;
  const bool gate_rejected = gate && row[*gate];
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!row[i]) continue;
    any = true;
    ++c.rejected[i];
    if (gate_rejected) ++c.rejected_with_gate[i];
  }
  if (any) ++c.any_rejected;
}

RejectionCounts empty_counts(std::size_t rows, std::size_t cols) {
  RejectionCounts c;
  c.rows = rows;
  c.rejected.assign(cols, 0);
  c.rejected_with_gate.assign(cols, 0);
  return c;
}

}  // namespace

RejectionCounts count_rejections(const DecisionMatrix& d, std::optional<std::size_t> gate) {
  if (gate && *gate >= d.cols()) throw InputError("count_rejections: gate index out of range");
  RejectionCounts c = empty_counts(d.rows(), d.cols());
  for (std::size_t r = 0; r < d.rows(); ++r) tally_row(d.row(r), gate, c);
  return c;
}

RejectionCounts count_rejections(const Graph& g, const PValuePanel& panel, std::optional<std::size_t> gate,
                                 unsigned threads) {
  check_graph_for_panel(g, panel.cols());
  if (gate && *gate >= panel.cols()) throw InputError("count_rejections: gate index out of range");
  const std::size_t m = panel.cols();
  const std::size_t tasks = (panel.rows() + kRowsPerTask - 1) / kRowsPerTask;
  std::vector<RejectionCounts> partial(tasks, empty_counts(0, m));
  detail::parallel_for(tasks, threads, [&](std::size_t task) {
    ProcedureWorkspace ws(m);
    std::vector<std::uint8_t> row(m);
    const std::size_t end = std::min(panel.rows(), (task + 1) * kRowsPerTask);
    for (std::size_t r = task * kRowsPerTask; r < end; ++r) {
      run_procedure_unchecked(g, panel.row(r).data(), ws, row.data());
      tally_row(row, gate, partial[task]);
    }
  });
  RejectionCounts total = empty_counts(panel.rows(), m);
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < m; ++i) {
      total.rejected[i] += p.rejected[i];
      total.rejected_with_gate[i] += p.rejected_with_gate[i];
    }
    total.any_rejected += p.any_rejected;
  }
  return total;
}

double empirical_objective(const RejectionCounts& counts, const ObjectiveSpec& spec) {
  if (counts.rows == 0) throw InputError("empirical_objective: undefined on an empty panel");
  if (counts.rejected.size() != spec.size()) throw InputError("empirical_objective: weight count does not match m");
  const auto& tally = spec.kind() == ObjectiveKind::gated ? counts.rejected_with_gate : counts.rejected;
  double sum = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) sum += spec.weights()[i] * static_cast<double>(tally[i]);
  return sum / static_cast<double>(counts.rows);
}

double empirical_objective(const DecisionMatrix& d, const ObjectiveSpec& spec) {
  if (d.cols() != spec.size()) throw InputError("empirical_objective: weight count does not match m");
  return empirical_objective(count_rejections(d, spec.gate()), spec);
}

double evaluate_objective(const Graph& g, const PValuePanel& panel, const ObjectiveSpec& spec, unsigned threads) {
  if (spec.size() != panel.cols()) throw InputError("evaluate_objective: weight count does not match panel width");
  return empirical_objective(count_rejections(g, panel, spec.gate(), threads), spec);
}

double fwer_estimate(const Graph& g, const PValuePanel& null_panel, unsigned threads) {
  const auto counts = count_rejections(g, null_panel, std::nullopt, threads);
  if (counts.rows == 0) throw InputError("fwer_estimate: undefined on an empty panel");
  return static_cast<double>(counts.any_rejected) / static_cast<double>(counts.rows);
}

double monte_carlo_se(double value, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(std::max(0.0, value * (1.0 - value)) / static_cast<double>(n));
}

std::string objective_csv_header() { return "scenario_digest,graph_digest,kind,n,value,se"; }

std::string objective_csv_row(const std::string& scenario_digest, const Graph& g, const ObjectiveSpec& spec,
                              std::size_t n, double value) {
  char buf[160];
  std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g", n, value, monte_carlo_se(value, n));
  return scenario_digest + "," + graph_digest(g) + "," + kind_name(spec.kind()) + buf;
}

}  // namespace graphopt
