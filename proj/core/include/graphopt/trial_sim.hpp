#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace graphopt {

/// Test statistics Z ~ MVN(means, correlation) with unit variances; one-sided
/// p-values p = 1 - Phi(Z).
class Scenario {
 public:
  /// Validates (finite means, symmetric unit-diagonal correlation, PSD) and
  /// factorises. Throws InputError / NumericalError.
  Scenario(std::vector<double> means, std::vector<double> correlation, double alpha_one_sided = 0.025);

  /// Means from marginal powers via power_to_mean.
  static Scenario from_powers(std::span<const double> powers, std::vector<double> correlation,
                              double alpha_one_sided = 0.025);

  std::size_t size() const { return means_.size(); }
  std::span<const double> means() const { return means_; }
  /// Row-major m x m.
  std::span<const double> correlation() const { return correlation_; }
  /// Lower-triangular factor, row-major.
  std::span<const double> cholesky() const { return factor_; }
  double alpha_one_sided() const { return alpha_; }

 private:
  std::vector<double> means_;
  std::vector<double> correlation_;
  std::vector<double> factor_;
  double alpha_;
};

/// z_{1-alpha} + z_{power}: the statistic mean giving `power` at one-sided
/// level alpha. Requires 0 < power < 1 and 0 < alpha < 0.5.
double power_to_mean(double power, double alpha_one_sided);

/// Phi(mean - z_{1-alpha}).
double mean_to_power(double mean, double alpha_one_sided);

/// Compound-symmetry correlation matrix, row-major.
std::vector<double> exchangeable_correlation(std::size_t m, double rho);

/// Cholesky factor (row-major lower triangle) without pivoting. A zero pivot
/// is accepted when the rest of its column is also zero (PSD rank
/// deficiency); a negative pivot, or a zero pivot with a nonzero column,
/// throws NumericalError naming the pivot.
std::vector<double> cholesky_lower(std::span<const double> matrix, std::size_t m);

/// Accepts {"m", "marginal_powers" | "means", "correlation", "alpha"} where
/// correlation is "exchangeable:<rho>" or a full matrix.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
std::string scenario_digest(const Scenario& s);

/// n x m p-values, stored row-major (one Monte Carlo replicate per row).
class PValuePanel {
 public:
  PValuePanel() = default;
  /// Throws InputError if values.size() != rows * cols or an entry is outside [0, 1].
  PValuePanel(std::size_t rows, std::size_t cols, std::vector<double> values, std::uint64_t seed,
              std::string scenario_digest);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * cols_, cols_);
  }
  double at(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  std::span<const double> values() const { return values_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& scenario_digest() const { return scenario_digest_; }

  /// Rows [begin, end) as a new panel (same seed and digest).
  PValuePanel slice(std::size_t begin, std::size_t end) const;

  bool operator==(const PValuePanel&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::uint64_t seed_ = 0;
  std::string scenario_digest_;
};

/// Rows per independently seeded block. Block k draws from Rng(seed, k).
inline constexpr std::size_t kPanelBlockRows = 4096;

/// Z = means + L * N(0, I) per row, p = 1 - Phi(Z). Bit-identical for a
/// given (scenario, n, seed) regardless of `threads`.
PValuePanel sample_pvalues(const Scenario& s, std::size_t n, std::uint64_t seed, unsigned threads = 1);

/// Binary: 8-byte magic "GOPVAL01", then n*m little-endian float64 in
/// column-major order. A JSON sidecar "<path>.json" carries n, m, seed and
/// the scenario digest.
void save_panel(const PValuePanel& panel, const std::filesystem::path& path);
PValuePanel load_panel(const std::filesystem::path& path);

}  // namespace graphopt
