#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphopt/constraints.hpp"
#include "graphopt/fnn.hpp"
#include "graphopt/graph.hpp"
#include "graphopt/graph_space.hpp"
#include "graphopt/objective.hpp"
#include "graphopt/trial_sim.hpp"

namespace graphopt {

using ValueFn = std::function<double(std::span<const double>)>;
/// Returns f(x) and writes the gradient into the second argument.
using GradientFn = std::function<double(std::span<const double>, std::span<double>)>;
using StartSampler = std::function<std::vector<FreeVector>(std::size_t count, std::uint64_t seed)>;

/// maximize f(x) subject to c_k(x) <= 0. Optimizers work on x / scale.
struct OptProblem {
  ValueFn value;
  GradientFn value_and_gradient;  // optional
  ConstraintSet constraints;
  std::vector<double> scale;      // positive, one per coordinate
  const ParamSpace* space = nullptr;  // set when x decodes to a graph
  StartSampler sampler;           // optional feasible-start generator

  std::size_t dimension() const { return constraints.dimension(); }
  bool has_gradient() const { return static_cast<bool>(value_and_gradient); }
  /// Throws StructuralError if the pieces disagree on dimension.
  void check() const;
  /// Feasible starting points: the sampler when present, otherwise uniform
  /// draws in the bounding box projected onto the constraints.
  std::vector<FreeVector> starts(std::size_t count, std::uint64_t seed) const;
};

/// Problem over a ParamSpace: constraints, scale = upper bounds, sampler =
/// sample_uniform.
OptProblem make_problem(const ParamSpace& space, ValueFn value, GradientFn gradient = {});

/// Surrogate f(x) = net.forward(x) with its analytic input gradient.
OptProblem surrogate_problem(const ParamSpace& space, std::shared_ptr<const Network> net);

/// Monte Carlo objective on one fixed panel. Points outside the feasible set
/// are evaluated at their projection onto it.
OptProblem true_objective_problem(const ParamSpace& space, std::shared_ptr<const PValuePanel> panel,
                                  ObjectiveSpec spec, unsigned threads = 1);

/// Analytic concave quadratic toy problem: maximize -sum_i w_i (x_i - t_i)^2.
OptProblem quadratic_problem(std::vector<double> target, std::vector<double> weights, ConstraintSet constraints);

struct TracePoint {
  double value = 0.0;
  double max_violation = 0.0;
};

struct OptResult {
  std::string method;
  FreeVector x_star;
  std::optional<Graph> graph;
  double value = 0.0;
  std::size_t evaluations = 0;
  double elapsed = 0.0;
  bool converged = false;
  std::vector<TracePoint> trace;
  std::vector<double> start_values;          // multi-start methods
  std::optional<std::size_t> dataset_row;    // brute force
};

struct ALConfig {
  double xtol_rel = 1e-5;
  double xtol_abs = 1e-10;
  std::size_t max_iterations = 100000;  // per start, inner iterations
  double initial_penalty = 1e-1;        // mu_0
  double penalty_growth = 10.0;         // mu <- mu / growth
  double feasibility_tol = 1e-9;
  std::size_t multi_start = 16;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool record_trace = false;
};

struct RefineConfig {
  double xtol_rel = 1e-4;
  double xtol_abs = 1e-8;
  std::size_t max_evaluations = 10000;
  double initial_step = 0.1;  // in units of scale
  bool record_trace = false;
};

struct IsresConfig {
  std::size_t population = 0;  // 0: min(20 d, 400)
  double pf = 0.45;
  double gamma = 0.85;
  double smoothing = 0.2;
  std::size_t max_evaluations = 0;  // 0: wall-time budget only
  double sigma_tol = 1e-10;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool record_trace = false;
};

/// Multi-start augmented Lagrangian ascent on a differentiable objective.
/// Returns the best start after projecting onto the feasible set; throws
/// InputError without a gradient and InfeasibleError when no start ends
/// feasible.
OptResult augmented_lagrangian(const OptProblem& p, const ALConfig& cfg);

/// Derivative-free constrained pattern search from a feasible x0. Polls
/// +-e_i plus generators of the tangent cone of nearly active constraints,
/// truncating steps at the boundary and accepting strict improvements only.
/// Throws InputError when x0 is infeasible.
OptResult local_refine(const OptProblem& p, std::span<const double> x0, const RefineConfig& cfg);

/// Improved stochastic ranking evolution strategy under a wall-time budget.
OptResult isres_baseline(const OptProblem& p, double budget_seconds, const IsresConfig& cfg);

/// Row of the dataset with maximal Y (lowest index on ties), decoded.
OptResult brute_force_baseline(const Dataset& ds, const ParamSpace& space);

nlohmann::json to_json(const ALConfig& cfg);
ALConfig al_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RefineConfig& cfg);
RefineConfig refine_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IsresConfig& cfg);
IsresConfig isres_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OptResult& r);
OptResult opt_result_from_json(const nlohmann::json& j);

}  // namespace graphopt
