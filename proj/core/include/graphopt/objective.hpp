#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphopt/graph.hpp"
#include "graphopt/trial_sim.hpp"

namespace graphopt {

enum class ObjectiveKind { plain, gated };

/// Weighted adjusted power. The gated form only counts endpoint i on rows
/// where the gate hypothesis is rejected as well; the gate carries weight 0.
class ObjectiveSpec {
 public:
  /// Weights must be nonnegative and sum to 1 within 1e-12.
  static ObjectiveSpec plain(std::vector<double> weights);
  /// Additionally requires weights[gate] == 0.
  static ObjectiveSpec gated(std::vector<double> weights, std::size_t gate);
  /// Equal weights over all endpoints (plain) or all non-gate endpoints (gated).
  static ObjectiveSpec equal_weights(std::size_t m, std::optional<std::size_t> gate = std::nullopt);

  ObjectiveKind kind() const { return kind_; }
  std::span<const double> weights() const { return weights_; }
  std::optional<std::size_t> gate() const { return gate_; }
  std::size_t size() const { return weights_.size(); }

 private:
  ObjectiveKind kind_ = ObjectiveKind::plain;
  std::vector<double> weights_;
  std::optional<std::size_t> gate_;
};

/// {"kind": "plain" | "gated", "weights": [..] | "equal", "gate": i}
ObjectiveSpec objective_from_json(const nlohmann::json& j, std::size_t m);
nlohmann::json to_json(const ObjectiveSpec& spec);
std::string kind_name(ObjectiveKind kind);

/// n x m reject/retain decisions, one row per p-value vector.
class DecisionMatrix {
 public:
  DecisionMatrix() = default;
  DecisionMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
  DecisionMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j] != 0; }
  std::span<const std::uint8_t> row(std::size_t i) const {
    return std::span<const std::uint8_t>(data_).subspan(i * cols_, cols_);
  }
  std::uint8_t* row_data(std::size_t i) { return data_.data() + i * cols_; }

  bool operator==(const DecisionMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Integer rejection tallies; every estimator is a reduction of these, so
/// results do not depend on how rows were partitioned across workers.
struct RejectionCounts {
  std::size_t rows = 0;
  std::vector<std::uint64_t> rejected;           // rows rejecting H_i
  std::vector<std::uint64_t> rejected_with_gate;  // rows rejecting H_i and the gate
  std::uint64_t any_rejected = 0;                 // rows with at least one rejection
};

/// Row i is run_procedure(g, panel.row(i)). Throws InputError on a size
/// mismatch or a graph failing validate_graph(g, 1.0).
DecisionMatrix decide_all(const Graph& g, const PValuePanel& panel, unsigned threads = 1);

RejectionCounts count_rejections(const DecisionMatrix& d, std::optional<std::size_t> gate = std::nullopt);

/// Fused decide_all + count_rejections without materialising the matrix.
RejectionCounts count_rejections(const Graph& g, const PValuePanel& panel, std::optional<std::size_t> gate,
                                 unsigned threads = 1);

/// (1/n) * sum_i v_i * sum_j d_ji, with d_ji gated when spec is gated.
/// Throws InputError when n == 0 or the widths disagree.
double empirical_objective(const DecisionMatrix& d, const ObjectiveSpec& spec);
double empirical_objective(const RejectionCounts& counts, const ObjectiveSpec& spec);

/// Monte Carlo objective of g on a panel (fused path).
double evaluate_objective(const Graph& g, const PValuePanel& panel, const ObjectiveSpec& spec, unsigned threads = 1);

/// Fraction of rows with at least one rejection; meaningful on a global-null panel.
double fwer_estimate(const Graph& g, const PValuePanel& null_panel, unsigned threads = 1);

/// sqrt(v (1 - v) / n).
double monte_carlo_se(double value, std::size_t n);

/// CSV report: scenario_digest,graph_digest,kind,n,value,se
std::string objective_csv_header();
std::string objective_csv_row(const std::string& scenario_digest, const Graph& g, const ObjectiveSpec& spec,
                              std::size_t n, double value);

}  // namespace graphopt
