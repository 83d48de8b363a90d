#include <algorithm>
#include <cmath>
#include <limits>

#include "graphopt/error.hpp"
#include "graphopt/optimize.hpp"
#include "graphopt/rng.hpp"

namespace graphopt {

void OptProblem::check() const {
  if (!value) throw InputError("optimizer: problem has no objective");
  if (scale.size() != dimension()) throw StructuralError("optimizer: scale length differs from constraint dimension");
  for (double s : scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("optimizer: scale entries must be positive");
  }
  if (space != nullptr && space->dimension() != dimension()) {
    throw StructuralError("optimizer: constraint dimension differs from parameter space");
  }
}

std::vector<FreeVector> OptProblem::starts(std::size_t count, std::uint64_t seed) const {
  if (sampler) return sampler(count, seed);
  const std::size_t d = dimension();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo(d, -inf);
  std::vector<double> hi(d, inf);
  for (const auto& c : constraints.constraints()) {
    if (c.terms.size() != 1 || c.terms[0].second == 0.0) continue;
    const auto [i, a] = c.terms[0];
    const double bound = -c.offset / a;
    if (a > 0.0) {
      hi[i] = std::min(hi[i], bound);
    } else {
      lo[i] = std::max(lo[i], bound);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(lo[i]) && !std::isfinite(hi[i])) {
      lo[i] = -scale[i];
      hi[i] = scale[i];
    } else if (!std::isfinite(lo[i])) {
      lo[i] = hi[i] - 2.0 * scale[i];
    } else if (!std::isfinite(hi[i])) {
      hi[i] = lo[i] + 2.0 * scale[i];
    }
  }
  std::vector<FreeVector> out;
  for (std::size_t b = 0; b < count; ++b) {
    Rng rng(seed, b);
    FreeVector x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform();
    if (!constraints.project(x)) throw InfeasibleError("optimizer: could not project a start onto the constraints");
    out.push_back(std::move(x));
  }
  return out;
}

OptProblem make_problem(const ParamSpace& space, ValueFn value, GradientFn gradient) {
  OptProblem p;
  p.value = std::move(value);
  p.value_and_gradient = std::move(gradient);
  p.constraints = space.constraints();
  p.scale = space.upper_bounds();
  p.space = &space;
  p.sampler = [&space](std::size_t count, std::uint64_t seed) { return sample_uniform(space, count, seed); };
  return p;
}

OptProblem surrogate_problem(const ParamSpace& space, std::shared_ptr<const Network> net) {
  if (net->input_dimension() != space.dimension()) {
    throw StructuralError("surrogate: network input dimension differs from parameter space");
  }
  return make_problem(
      space, [net](std::span<const double> x) { return net->forward(x); },
      [net](std::span<const double> x, std::span<double> g) { return net->value_and_gradient(x, g); });
}

OptProblem true_objective_problem(const ParamSpace& space, std::shared_ptr<const PValuePanel> panel,
                                  ObjectiveSpec spec, unsigned threads) {
  if (panel->cols() != space.m() || spec.size() != space.m()) {
    throw StructuralError("objective: panel, spec and family disagree on m");
  }
  const ParamSpace* sp = &space;
  return make_problem(space, [sp, panel, spec = std::move(spec), threads](std::span<const double> x) {
    if (sp->constraints().feasible(x, kDecodeTol)) return evaluate_objective(decode(x, *sp), *panel, spec, threads);
    FreeVector y(x.begin(), x.end());
    sp->constraints().project(y);
    return evaluate_objective(decode(y, *sp), *panel, spec, threads);
  });
}

OptProblem quadratic_problem(std::vector<double> target, std::vector<double> weights, ConstraintSet constraints) {
  if (target.size() != weights.size() || target.size() != constraints.dimension()) {
    throw StructuralError("quadratic problem: dimension mismatch");
  }
  OptProblem p;
  p.value = [target, weights](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v -= weights[i] * (x[i] - target[i]) * (x[i] - target[i]);
    return v;
  };
  p.value_and_gradient = [target, weights](std::span<const double> x, std::span<double> g) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      v -= weights[i] * (x[i] - target[i]) * (x[i] - target[i]);
      g[i] = -2.0 * weights[i] * (x[i] - target[i]);
    }
    return v;
  };
  p.scale.assign(target.size(), 1.0);
  p.constraints = std::move(constraints);
  return p;
}

OptResult brute_force_baseline(const Dataset& ds, const ParamSpace& space) {
  if (ds.size() == 0) throw InputError("brute force: empty dataset");
  if (ds.dimension() != space.dimension()) throw StructuralError("brute force: dataset dimension differs from family");
  Eigen::Index best = 0;
  for (Eigen::Index b = 1; b < ds.Y.size(); ++b) {
    if (ds.Y(b) > ds.Y(best)) best = b;
  }
  OptResult r;
  r.method = "max";
  r.x_star.resize(ds.dimension());
  for (std::size_t k = 0; k < ds.dimension(); ++k) r.x_star[k] = ds.X(best, static_cast<Eigen::Index>(k));
  r.graph = decode(r.x_star, space);
  r.value = ds.Y(best);
  r.evaluations = ds.size();
  r.converged = true;
  r.dataset_row = static_cast<std::size_t>(best);
  return r;
}

nlohmann::json to_json(const ALConfig& c) {
  return {{"xtol_rel", c.xtol_rel},
          {"xtol_abs", c.xtol_abs},
          {"max_iterations", c.max_iterations},
          {"initial_penalty", c.initial_penalty},
          {"penalty_growth", c.penalty_growth},
          {"feasibility_tol", c.feasibility_tol},
          {"multi_start", c.multi_start},
          {"seed", c.seed}};
}

ALConfig al_config_from_json(const nlohmann::json& j) {
  ALConfig c;
  c.xtol_rel = j.value("xtol_rel", c.xtol_rel);
  c.xtol_abs = j.value("xtol_abs", c.xtol_abs);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.initial_penalty = j.value("initial_penalty", c.initial_penalty);
  c.penalty_growth = j.value("penalty_growth", c.penalty_growth);
  c.feasibility_tol = j.value("feasibility_tol", c.feasibility_tol);
  c.multi_start = j.value("multi_start", c.multi_start);
  c.seed = j.value("seed", c.seed);
  if (!(c.xtol_rel > 0.0)) throw ConfigError("augmented Lagrangian: xtol_rel must be positive");
  if (!(c.penalty_growth > 1.0)) throw ConfigError("augmented Lagrangian: penalty_growth must exceed 1");
  if (!(c.initial_penalty > 0.0)) throw ConfigError("augmented Lagrangian: initial_penalty must be positive");
  return c;
}

nlohmann::json to_json(const RefineConfig& c) {
  return {{"xtol_rel", c.xtol_rel},
          {"xtol_abs", c.xtol_abs},
          {"max_evaluations", c.max_evaluations},
          {"initial_step", c.initial_step}};
}

RefineConfig refine_config_from_json(const nlohmann::json& j) {
  RefineConfig c;
  c.xtol_rel = j.value("xtol_rel", c.xtol_rel);
  c.xtol_abs = j.value("xtol_abs", c.xtol_abs);
  c.max_evaluations = j.value("max_evaluations", c.max_evaluations);
  c.initial_step = j.value("initial_step", c.initial_step);
  if (!(c.xtol_rel > 0.0)) throw ConfigError("refine: xtol_rel must be positive");
  if (!(c.initial_step > 0.0)) throw ConfigError("refine: initial_step must be positive");
  return c;
}

nlohmann::json to_json(const IsresConfig& c) {
  return {{"population", c.population}, {"pf", c.pf},
          {"gamma", c.gamma},           {"smoothing", c.smoothing},
          {"max_evaluations", c.max_evaluations}, {"sigma_tol", c.sigma_tol},
          {"seed", c.seed}};
}

IsresConfig isres_config_from_json(const nlohmann::json& j) {
  IsresConfig c;
  c.population = j.value("population", c.population);
  c.pf = j.value("pf", c.pf);
  c.gamma = j.value("gamma", c.gamma);
  c.smoothing = j.value("smoothing", c.smoothing);
  c.max_evaluations = j.value("max_evaluations", c.max_evaluations);
  c.sigma_tol = j.value("sigma_tol", c.sigma_tol);
  c.seed = j.value("seed", c.seed);
  if (!(c.pf >= 0.0 && c.pf <= 1.0)) throw ConfigError("isres: pf must lie in [0, 1]");
  return c;
}

nlohmann::json to_json(const OptResult& r) {
  nlohmann::json j = {{"method", r.method},
                      {"x_star", r.x_star},
                      {"value", r.value},
                      {"evaluations", r.evaluations},
                      {"elapsed", r.elapsed},
                      {"converged", r.converged},
                      {"start_values", r.start_values}};
  if (r.graph) j["graph"] = to_json(*r.graph);
  if (r.dataset_row) j["dataset_row"] = *r.dataset_row;
  if (!r.trace.empty()) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& p : r.trace) t.push_back({p.value, p.max_violation});
    j["trace"] = t;
  }
  return j;
}

OptResult opt_result_from_json(const nlohmann::json& j) {
  try {
    OptResult r;
    r.method = j.at("method").get<std::string>();
    r.x_star = j.at("x_star").get<std::vector<double>>();
    r.value = j.at("value").get<double>();
    r.evaluations = j.at("evaluations").get<std::size_t>();
    r.elapsed = j.at("elapsed").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.start_values = j.value("start_values", std::vector<double>{});
    if (j.contains("graph")) r.graph = graph_from_json(j.at("graph"));
    if (j.contains("dataset_row")) r.dataset_row = j.at("dataset_row").get<std::size_t>();
    if (j.contains("trace")) {
      for (const auto& t : j.at("trace")) r.trace.push_back({t.at(0).get<double>(), t.at(1).get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("optimizer result JSON: ") + e.what());
  }
}

}  // namespace graphopt
