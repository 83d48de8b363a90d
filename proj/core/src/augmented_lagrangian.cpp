#include <algorithm>
#include <cmath>
#include <limits>

#include "graphopt/error.hpp"
#include "graphopt/optimize.hpp"
#include "parallel.hpp"
#include "scaled_system.hpp"

namespace graphopt {
namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;
constexpr double kMinPenalty = 1e-12;

struct StartOutcome {
  FreeVector x;
  double value = -std::numeric_limits<double>::infinity();
  bool feasible = false;
  bool converged = false;
  std::size_t evaluations = 0;
  std::vector<TracePoint> trace;
};

/// L(y) = -f(x) + (1/2mu) sum_k [max(0, lambda_k mu + c_k)^2 - (lambda_k mu)^2]
class Lagrangian {
 public:
  Lagrangian(const OptProblem& p, const detail::ScaledSystem& sys)
      : p_(p), sys_(sys), lambda_(sys.size(), 0.0), x_(p.dimension()), gx_(p.dimension()) {}

  double mu = 1.0;
  std::vector<double>& multipliers() { return lambda_; }
  std::size_t evaluations = 0;

  double operator()(std::span<const double> y, std::span<double> grad) {
    for (std::size_t i = 0; i < y.size(); ++i) x_[i] = y[i] * p_.scale[i];
    const double f = p_.value_and_gradient(x_, gx_);
    ++evaluations;
    if (!std::isfinite(f)) throw NumericalError("augmented Lagrangian: objective is not finite");
    double l = -f;
    for (std::size_t i = 0; i < y.size(); ++i) grad[i] = -gx_[i] * p_.scale[i];
    for (std::size_t k = 0; k < sys_.size(); ++k) {
      const double lm = lambda_[k] * mu;
      const double s = lm + sys_.value(k, y);
      if (s > 0.0) {
        l += (s * s - lm * lm) / (2.0 * mu);
        for (const auto& [i, a] : sys_.row(k).terms) grad[i] += (s / mu) * a;
      } else {
        l -= lm * lm / (2.0 * mu);
      }
    }
    return l;
  }

 private:
  const OptProblem& p_;
  const detail::ScaledSystem& sys_;
  std::vector<double> lambda_;
  std::vector<double> x_;
  std::vector<double> gx_;
};

StartOutcome run_start(const OptProblem& p, const detail::ScaledSystem& sys, const FreeVector& x0,
                       const ALConfig& cfg) {
  const std::size_t d = p.dimension();
  StartOutcome out;
  Lagrangian lag(p, sys);
  lag.mu = cfg.initial_penalty;

  std::vector<double> y = detail::to_scaled(x0, p.scale);
  std::vector<double> g(d), y_try(d), g_try(d), x_old(d), x_new(d);
  std::vector<double> y_outer = y;
  double prev_violation = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;

  while (iterations < cfg.max_iterations) {
    // Inner problem: gradient descent, Barzilai-Borwein trial step, Armijo backtracking.
    double l = lag(y, g);
    double step = 0.0;
    while (iterations < cfg.max_iterations) {
      double gg = 0.0;
      for (double v : g) gg += v * v;
      if (gg == 0.0) break;
      if (!(step > 0.0)) step = 1.0 / std::sqrt(gg);
      double t = step;
      bool accepted = false;
      double l_try = 0.0;
      for (int h = 0; h < kMaxHalvings; ++h) {
        for (std::size_t i = 0; i < d; ++i) y_try[i] = y[i] - t * g[i];
        l_try = lag(y_try, g_try);
        if (l_try <= l - kArmijo * t * gg) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
      ++iterations;
      double ss = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double s = y_try[i] - y[i];
        ss += s * s;
        sy += s * (g_try[i] - g[i]);
        x_old[i] = y[i] * p.scale[i];
        x_new[i] = y_try[i] * p.scale[i];
      }
      step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : 2.0 * t;
      y.swap(y_try);
      g.swap(g_try);
      l = l_try;
      if (detail::small_change(x_old, x_new, cfg.xtol_rel, cfg.xtol_abs)) break;
    }

    // Multiplier and penalty updates.
    const double violation = std::max(0.0, sys.max_violation(y));
    auto& lambda = lag.multipliers();
    for (std::size_t k = 0; k < sys.size(); ++k) lambda[k] = std::max(0.0, lambda[k] + sys.value(k, y) / lag.mu);
    if (violation > cfg.feasibility_tol && violation > 0.25 * prev_violation) {
      lag.mu = std::max(kMinPenalty, lag.mu / cfg.penalty_growth);
    }
    prev_violation = violation;
    if (cfg.record_trace) {
      const auto x = detail::from_scaled(y, p.scale);
      out.trace.push_back({p.value(x), p.constraints.max_violation(x)});
    }

    const auto xa = detail::from_scaled(y_outer, p.scale);
    const auto xb = detail::from_scaled(y, p.scale);
    if (violation <= cfg.feasibility_tol && detail::small_change(xa, xb, cfg.xtol_rel, cfg.xtol_abs)) {
      out.converged = true;
      break;
    }
    y_outer = y;
    ++iterations;
  }

  out.x = detail::from_scaled(y, p.scale);
  out.feasible = p.constraints.project(out.x);
  out.evaluations = lag.evaluations;
  if (out.feasible) {
    out.value = p.value(out.x);
    ++out.evaluations;
  }
  return out;
}

}  // namespace

OptResult augmented_lagrangian(const OptProblem& p, const ALConfig& cfg) {
  p.check();
  if (!p.has_gradient()) throw InputError("augmented Lagrangian: objective has no gradient");
  if (!(cfg.xtol_rel > 0.0) || !(cfg.penalty_growth > 1.0) || !(cfg.initial_penalty > 0.0)) {
    throw InputError("augmented Lagrangian: invalid configuration");
  }
  if (cfg.multi_start == 0) throw InputError("augmented Lagrangian: need at least one start");
  detail::Stopwatch clock;
  const detail::ScaledSystem sys(p.constraints, p.scale);
  const auto starts = p.starts(cfg.multi_start, cfg.seed);

  std::vector<StartOutcome> outcomes(starts.size());
  detail::parallel_for(starts.size(), cfg.threads, [&](std::size_t k) { outcomes[k] = run_start(p, sys, starts[k], cfg); });

  OptResult r;
  r.method = "augmented_lagrangian";
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    r.evaluations += outcomes[k].evaluations;
    r.start_values.push_back(outcomes[k].value);
    if (outcomes[k].feasible && (!best || outcomes[k].value > outcomes[*best].value)) best = k;
  }
  if (!best) throw InfeasibleError("augmented Lagrangian: no start reached a feasible point");
  auto& win = outcomes[*best];
  r.x_star = std::move(win.x);
  r.value = win.value;
  r.converged = win.converged;
  r.trace = std::move(win.trace);
  if (p.space != nullptr) r.graph = decode(r.x_star, *p.space);
  r.elapsed = clock.seconds();
  return r;
}

}  // namespace graphopt
