#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "graphopt/error.hpp"
#include "graphopt/optimize.hpp"
#include "graphopt/rng.hpp"
#include "parallel.hpp"
#include "scaled_system.hpp"

namespace graphopt {
namespace {

constexpr double kFeasibleTol = 1e-12;
constexpr int kBoxRetries = 10;

struct Individual {
  std::vector<double> y;
  std::vector<double> sigma;
  double value = 0.0;
  double penalty = 0.0;  // sum of squared violations
};

}  // namespace

OptResult isres_baseline(const OptProblem& p, double budget_seconds, const IsresConfig& cfg) {
  p.check();
  if (!(budget_seconds >= 0.0)) throw InputError("isres: budget must be nonnegative");
  detail::Stopwatch clock;
  const std::size_t d = p.dimension();
  if (d == 0) throw InputError("isres: empty problem");
  const detail::ScaledSystem sys(p.constraints, p.scale);
  const std::size_t lambda = cfg.population > 0 ? cfg.population : std::min<std::size_t>(20 * d, 400);
  const std::size_t mu = std::max<std::size_t>(1, lambda / 7);
  const double tau = 1.0 / std::sqrt(2.0 * std::sqrt(static_cast<double>(d)));
  const double tau_prime = 1.0 / std::sqrt(2.0 * static_cast<double>(d));

  // Box from single-variable rows, in scaled units.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo(d, -inf), hi(d, inf);
  for (std::size_t k = 0; k < sys.size(); ++k) {
    const auto& row = sys.row(k);
    if (row.terms.size() != 1 || row.terms[0].second == 0.0) continue;
    const auto [i, a] = row.terms[0];
    const double b = -row.offset / a;
    if (a > 0.0) {
      hi[i] = std::min(hi[i], b);
    } else {
      lo[i] = std::max(lo[i], b);
    }
  }
  const auto in_box = [&](const std::vector<double>& y) {
    for (std::size_t i = 0; i < d; ++i) {
      if (y[i] < lo[i] || y[i] > hi[i]) return false;
    }
    return true;
  };

  Rng rng(cfg.seed, 0x15E5);
  OptResult r;
  r.method = "isres";
  std::vector<double> best_x;
  double best_value = -inf;

  std::vector<Individual> pop(lambda);
  {
    const auto starts = p.starts(lambda, cfg.seed);
    for (std::size_t k = 0; k < lambda; ++k) {
      pop[k].y = detail::to_scaled(starts[k], p.scale);
      pop[k].sigma.resize(d);
      for (std::size_t i = 0; i < d; ++i) {
        const double width = std::isfinite(hi[i] - lo[i]) ? hi[i] - lo[i] : 1.0;
        pop[k].sigma[i] = width / std::sqrt(static_cast<double>(d));
      }
    }
  }

  const auto evaluate = [&](std::vector<Individual>& group) {
    detail::parallel_for(group.size(), cfg.threads, [&](std::size_t k) {
      const auto x = detail::from_scaled(group[k].y, p.scale);
      group[k].value = p.value(x);
      group[k].penalty = sys.squared_violation(group[k].y);
    });
    for (auto& ind : group) {
      ++r.evaluations;
      const auto x = detail::from_scaled(ind.y, p.scale);
      if (ind.value > best_value && p.constraints.feasible(x, kFeasibleTol)) {
        best_value = ind.value;
        best_x = x;
      }
    }
  };
  evaluate(pop);

  std::vector<std::size_t> order(lambda);
  while (true) {
    if (clock.seconds() >= budget_seconds) break;
    if (cfg.max_evaluations > 0 && r.evaluations >= cfg.max_evaluations) break;
    double max_sigma = 0.0;
    for (const auto& ind : pop) max_sigma = std::max(max_sigma, *std::max_element(ind.sigma.begin(), ind.sigma.end()));
    if (max_sigma < cfg.sigma_tol) {
      r.converged = true;
      break;
    }

    // Stochastic ranking (bubble-sort sweeps).
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t sweep = 0; sweep < lambda; ++sweep) {
      bool swapped = false;
      for (std::size_t j = 0; j + 1 < lambda; ++j) {
        const auto& a = pop[order[j]];
        const auto& b = pop[order[j + 1]];
        const double u = rng.uniform();
        const bool by_value = (a.penalty == 0.0 && b.penalty == 0.0) || u < cfg.pf;
        if (by_value ? a.value < b.value : a.penalty > b.penalty) {
          std::swap(order[j], order[j + 1]);
          swapped = true;
        }
      }
      if (!swapped) break;
    }

    std::vector<Individual> next(lambda);
    for (std::size_t k = 0; k < lambda; ++k) {
      const Individual& parent = pop[order[k % mu]];
      Individual& child = next[k];
      child.sigma.resize(d);
      child.y.resize(d);
      bool placed = false;
      if (k + 1 < mu) {
        // Differential variation towards the best individual.
        const auto& first = pop[order[0]].y;
        const auto& after = pop[order[k + 1]].y;
        for (std::size_t i = 0; i < d; ++i) child.y[i] = parent.y[i] + cfg.gamma * (first[i] - after[i]);
        child.sigma = parent.sigma;
        placed = in_box(child.y);
      }
      if (!placed) {
        const double common = tau_prime * rng.normal();
        std::vector<double> sigma_new(d);
        for (std::size_t i = 0; i < d; ++i) sigma_new[i] = parent.sigma[i] * std::exp(common + tau * rng.normal());
        for (int attempt = 0; attempt < kBoxRetries && !placed; ++attempt) {
          for (std::size_t i = 0; i < d; ++i) child.y[i] = parent.y[i] + sigma_new[i] * rng.normal();
          placed = in_box(child.y);
        }
        if (!placed) child.y = parent.y;
        for (std::size_t i = 0; i < d; ++i) {
          child.sigma[i] = parent.sigma[i] + cfg.smoothing * (sigma_new[i] - parent.sigma[i]);
        }
      }
    }
    evaluate(next);
    pop = std::move(next);
    if (cfg.record_trace) r.trace.push_back({best_value, 0.0});
  }

  if (best_x.empty()) throw InfeasibleError("isres: no feasible individual found");
  r.x_star = std::move(best_x);
  r.value = p.value(r.x_star);
  if (p.space != nullptr) r.graph = decode(r.x_star, *p.space);
  r.elapsed = clock.seconds();
  return r;
}

}  // namespace graphopt
