#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "graphopt/error.hpp"
#include "graphopt/optimize.hpp"
#include "scaled_system.hpp"

namespace graphopt {
namespace {

constexpr double kStartTol = 1e-9;
constexpr double kTrialTol = 1e-12;
constexpr double kMinStep = 1e-15;

/// Poll directions: generators of the cone {d : a_k . d <= 0} over the
/// nearly active rows (a linearly independent subset), then +-e_i.
std::vector<std::vector<double>> poll_directions(const detail::ScaledSystem& sys, std::span<const double> y,
                                                 double radius) {
  const auto d = static_cast<Eigen::Index>(y.size());
  std::vector<Eigen::VectorXd> normals;
  Eigen::MatrixXd kept(d, 0);
  for (std::size_t k = 0; k < sys.size() && static_cast<Eigen::Index>(normals.size()) < d; ++k) {
    if (sys.row(k).terms.empty() || sys.value(k, y) < -radius) continue;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d);
    for (const auto& [i, v] : sys.row(k).terms) a(static_cast<Eigen::Index>(i)) = v;
    Eigen::MatrixXd trial(d, kept.cols() + 1);
    trial << kept, a;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() == trial.cols()) {
      kept = std::move(trial);
      normals.push_back(std::move(a));
    }
  }

  std::vector<std::vector<double>> dirs;
  auto push = [&](const Eigen::VectorXd& v) {
    const double n = v.norm();
    if (n < 1e-12) return;
    std::vector<double> u(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) u[static_cast<std::size_t>(i)] = v(i) / n;
    dirs.push_back(std::move(u));
  };
  const auto r = kept.cols();
  if (r > 0) {
    // Null space of N (tangent to every kept row) from a full QR of N^T.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(kept);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index c = r; c < d; ++c) {
      push(q.col(c));
      push(-q.col(c));
    }
    // Columns of -N^T (N N^T)^{-1}: leave one row, stay on the others.
    const Eigen::MatrixXd gram = kept.transpose() * kept;
    const Eigen::MatrixXd v = -kept * gram.ldlt().solve(Eigen::MatrixXd::Identity(r, r));
    for (Eigen::Index c = 0; c < r; ++c) push(v.col(c));
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e(i) = 1.0;
    push(e);
    push(-e);
  }
  return dirs;
}

double max_step(const detail::ScaledSystem& sys, std::span<const double> y, std::span<const double> dir) {
  double t = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sys.size(); ++k) {
    const double ad = sys.dot(k, dir);
    if (ad > 1e-15) t = std::min(t, std::max(0.0, -sys.value(k, y)) / ad);
  }
  return t;
}

}  // namespace

OptResult local_refine(const OptProblem& p, std::span<const double> x0, const RefineConfig& cfg) {
  p.check();
  if (x0.size() != p.dimension()) throw InputError("refine: start has wrong dimension");
  if (!(cfg.xtol_rel > 0.0) || !(cfg.initial_step > 0.0)) throw InputError("refine: invalid configuration");
  if (!p.constraints.feasible(x0, kStartTol)) throw InputError("refine: start point is infeasible");
  detail::Stopwatch clock;
  const detail::ScaledSystem sys(p.constraints, p.scale);
  const std::size_t d = p.dimension();

  std::vector<double> y = detail::to_scaled(x0, p.scale);
  std::vector<double> x(x0.begin(), x0.end());
  OptResult r;
  r.method = "local_refine";
  double best = p.value(x);
  r.evaluations = 1;
  double radius = cfg.initial_step;
  std::vector<double> last_dir;
  std::vector<double> trial(d), x_trial(d);

  const auto resolved = [&] {
    for (std::size_t i = 0; i < d; ++i) {
      if (!(radius * p.scale[i] < cfg.xtol_rel * std::abs(x[i]) + cfg.xtol_abs)) return false;
    }
    return true;
  };

  while (r.evaluations < cfg.max_evaluations) {
    if (resolved()) {
      r.converged = true;
      break;
    }
    auto dirs = poll_directions(sys, y, radius);
    if (!last_dir.empty()) dirs.insert(dirs.begin(), last_dir);
    bool improved = false;
    for (std::size_t k = 0; k < dirs.size() && r.evaluations < cfg.max_evaluations; ++k) {
      const auto& dir = dirs[k];
      const double t = std::min(radius, max_step(sys, y, dir));
      if (!(t > kMinStep)) continue;
      for (std::size_t i = 0; i < d; ++i) {
        trial[i] = y[i] + t * dir[i];
        x_trial[i] = trial[i] * p.scale[i];
      }
      if (sys.max_violation(trial) > kTrialTol || !p.constraints.feasible(x_trial, kTrialTol)) continue;
      const double v = p.value(x_trial);
      ++r.evaluations;
      if (v > best) {
        best = v;
        y = trial;
        x = x_trial;
        improved = true;
        last_dir = dir;
        break;
      }
    }
    if (!improved) {
      radius *= 0.5;
      last_dir.clear();
    }
    if (cfg.record_trace) r.trace.push_back({best, p.constraints.max_violation(x)});
  }

  r.x_star = std::move(x);
  r.value = best;
  if (p.space != nullptr) r.graph = decode(r.x_star, *p.space);
  r.elapsed = clock.seconds();
  return r;
}

}  // namespace graphopt
