#include "graphopt/trial_sim.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "graphopt/digest.hpp"
#include "graphopt/error.hpp"
#include "graphopt/normal.hpp"
#include "graphopt/rng.hpp"
#include "parallel.hpp"

namespace graphopt {
namespace {

static_assert(std::endian::native == std::endian::little, "panel persistence assumes a little-endian host");

constexpr std::array<char, 8> kPanelMagic = {'G', 'O', 'P', 'V', 'A', 'L', '0', '1'};
constexpr double kSymmetryTol = 1e-12;

void check_correlation(std::span<const double> c, std::size_t m) {
  if (c.size() != m * m) {
    throw StructuralError("scenario: correlation has " + std::to_string(c.size()) + " entries for m = " +
                          std::to_string(m));
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (std::abs(c[i * m + i] - 1.0) > kSymmetryTol) {
      throw InputError("scenario: correlation diagonal entry " + std::to_string(i) + " is not 1");
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double v = c[i * m + j];
      if (!std::isfinite(v) || std::abs(v) > 1.0 + kSymmetryTol) {
        throw InputError("scenario: correlation entries must be finite and within [-1, 1]");
      }
      if (std::abs(v - c[j * m + i]) > kSymmetryTol) throw InputError("scenario: correlation is not symmetric");
    }
  }
}

}  // namespace

std::vector<double> cholesky_lower(std::span<const double> a, std::size_t m) {
  if (a.size() != m * m) throw StructuralError("cholesky: matrix is not m x m");
  constexpr double kPivotTol = 1e-12;
  std::vector<double> l(m * m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double d = a[j * m + j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j * m + k] * l[j * m + k];
    if (d < -kPivotTol) {
      std::ostringstream msg;
      msg << "cholesky: matrix is not positive semi-definite (pivot " << j << " = " << d << ")";
      throw NumericalError(msg.str());
    }
    if (d <= kPivotTol) {
      // Rank-deficient direction: the remaining column must vanish too.
      for (std::size_t i = j + 1; i < m; ++i) {
        double s = a[i * m + j];
        for (std::size_t k = 0; k < j; ++k) s -= l[i * m + k] * l[j * m + k];
        if (std::abs(s) > 1e-9) {
          std::ostringstream msg;
          msg << "cholesky: matrix is not positive semi-definite (zero pivot " << j << " with nonzero column)";
          throw NumericalError(msg.str());
        }
      }
      continue;
    }
    const double ljj = std::sqrt(d);
    l[j * m + j] = ljj;
    for (std::size_t i = j + 1; i < m; ++i) {
      double s = a[i * m + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * m + k] * l[j * m + k];
      l[i * m + j] = s / ljj;
    }
  }
  return l;
}

Scenario::Scenario(std::vector<double> means, std::vector<double> correlation, double alpha_one_sided)
    : means_(std::move(means)), correlation_(std::move(correlation)), alpha_(alpha_one_sided) {
  if (means_.empty()) throw InputError("scenario: need at least one endpoint");
  for (double mu : means_) {
    if (!std::isfinite(mu)) throw InputError("scenario: means must be finite");
  }
  if (!(alpha_ > 0.0 && alpha_ < 0.5)) throw InputError("scenario: alpha must lie in (0, 0.5)");
  check_correlation(correlation_, means_.size());
  factor_ = cholesky_lower(correlation_, means_.size());
}

Scenario Scenario::from_powers(std::span<const double> powers, std::vector<double> correlation,
                               double alpha_one_sided) {
  std::vector<double> means;
  means.reserve(powers.size());
  for (double p : powers) means.push_back(power_to_mean(p, alpha_one_sided));
  return Scenario(std::move(means), std::move(correlation), alpha_one_sided);
}

double power_to_mean(double power, double alpha_one_sided) {
  if (!(power > 0.0 && power < 1.0)) throw InputError("power_to_mean: power must lie strictly in (0, 1)");
  if (!(alpha_one_sided > 0.0 && alpha_one_sided < 0.5)) {
    throw InputError("power_to_mean: alpha must lie in (0, 0.5)");
  }
  return standard_normal_quantile(1.0 - alpha_one_sided) + standard_normal_quantile(power);
}

double mean_to_power(double mean, double alpha_one_sided) {
  return standard_normal_cdf(mean - standard_normal_quantile(1.0 - alpha_one_sided));
}

std::vector<double> exchangeable_correlation(std::size_t m, double rho) {
  std::vector<double> c(m * m, rho);
  for (std::size_t i = 0; i < m; ++i) c[i * m + i] = 1.0;
  return c;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    const double alpha = j.value("alpha", 0.025);
    std::vector<double> means;
    if (j.contains("means")) {
      means = j.at("means").get<std::vector<double>>();
    } else if (j.contains("marginal_powers")) {
      for (double p : j.at("marginal_powers").get<std::vector<double>>()) means.push_back(power_to_mean(p, alpha));
    } else {
      throw ConfigError("scenario: need \"means\" or \"marginal_powers\"");
    }
    const std::size_t m = j.contains("m") ? j.at("m").get<std::size_t>() : means.size();
    if (m != means.size()) {
      throw ConfigError("scenario: m = " + std::to_string(m) + " but " + std::to_string(means.size()) +
                        " means/powers given");
    }
    std::vector<double> corr;
    const auto& cj = j.contains("correlation") ? j.at("correlation") : nlohmann::json("exchangeable:0");
    if (cj.is_string()) {
      const std::string spec = cj.get<std::string>();
      const std::string prefix = "exchangeable:";
      if (spec.rfind(prefix, 0) != 0) throw ConfigError("scenario: unknown correlation form \"" + spec + "\"");
      corr = exchangeable_correlation(m, std::stod(spec.substr(prefix.size())));
    } else if (cj.is_number()) {
      corr = exchangeable_correlation(m, cj.get<double>());
    } else {
      for (const auto& row : cj) {
        auto r = row.get<std::vector<double>>();
        corr.insert(corr.end(), r.begin(), r.end());
      }
    }
    return Scenario(std::move(means), std::move(corr), alpha);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario JSON: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("scenario: malformed exchangeable correlation");
  }
}

nlohmann::json to_json(const Scenario& s) {
  const std::size_t m = s.size();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m; ++i) {
    rows.push_back(std::vector<double>(s.correlation().begin() + static_cast<std::ptrdiff_t>(i * m),
                                       s.correlation().begin() + static_cast<std::ptrdiff_t>((i + 1) * m)));
  }
  return {{"m", m},
          {"means", std::vector<double>(s.means().begin(), s.means().end())},
          {"correlation", rows},
          {"alpha", s.alpha_one_sided()}};
}

std::string scenario_digest(const Scenario& s) { return content_digest(to_json(s)); }

PValuePanel::PValuePanel(std::size_t rows, std::size_t cols, std::vector<double> values, std::uint64_t seed,
                         std::string scenario_digest)
    : rows_(rows), cols_(cols), values_(std::move(values)), seed_(seed), scenario_digest_(std::move(scenario_digest)) {
  if (values_.size() != rows_ * cols_) throw StructuralError("panel: value count does not match rows x cols");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("panel: p-values must lie in [0, 1]");
  }
}

PValuePanel PValuePanel::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw InputError("panel: slice out of range");
  std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                        values_.begin() + static_cast<std::ptrdiff_t>(end * cols_));
  return PValuePanel(end - begin, cols_, std::move(v), seed_, scenario_digest_);
}

PValuePanel sample_pvalues(const Scenario& s, std::size_t n, std::uint64_t seed, unsigned threads) {
  const std::size_t m = s.size();
  std::vector<double> values(n * m);
  const std::size_t blocks = (n + kPanelBlockRows - 1) / kPanelBlockRows;
  const auto means = s.means();
  const auto l = s.cholesky();
  detail::parallel_for(blocks, threads, [&](std::size_t block) {
    Rng rng(seed, block);
    std::vector<double> z(m);
    const std::size_t begin = block * kPanelBlockRows;
    const std::size_t end = std::min(n, begin + kPanelBlockRows);
    for (std::size_t r = begin; r < end; ++r) {
      for (auto& zi : z) zi = rng.normal();
      double* out = values.data() + r * m;
      for (std::size_t i = 0; i < m; ++i) {
        double stat = means[i];
        for (std::size_t k = 0; k <= i; ++k) stat += l[i * m + k] * z[k];
        out[i] = standard_normal_sf(stat);
      }
    }
  });
  return PValuePanel(n, m, std::move(values), seed, scenario_digest(s));
}

void save_panel(const PValuePanel& panel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write panel to " + path.string());
  out.write(kPanelMagic.data(), kPanelMagic.size());
  std::vector<double> column(panel.rows());
  for (std::size_t j = 0; j < panel.cols(); ++j) {
    for (std::size_t i = 0; i < panel.rows(); ++i) column[i] = panel.at(i, j);
    out.write(reinterpret_cast<const char*>(column.data()), static_cast<std::streamsize>(column.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("short write to " + path.string());

  const nlohmann::json sidecar = {{"n", panel.rows()},
                                  {"m", panel.cols()},
                                  {"seed", panel.seed()},
                                  {"scenario_digest", panel.scenario_digest()},
                                  {"format", "float64-le-colmajor"}};
  std::ofstream meta(path.string() + ".json", std::ios::trunc);
  meta << sidecar.dump(2) << '\n';
}

PValuePanel load_panel(const std::filesystem::path& path) {
  std::ifstream meta(path.string() + ".json");
  if (!meta) throw ConfigError("missing panel sidecar " + path.string() + ".json");
  nlohmann::json sidecar;
  try {
    meta >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("panel sidecar: " + std::string(e.what()));
  }
  const auto n = sidecar.at("n").get<std::size_t>();
  const auto m = sidecar.at("m").get<std::size_t>();

  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read panel " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kPanelMagic) throw ConfigError("panel " + path.string() + ": bad magic header");
  std::vector<double> column(n);
  std::vector<double> values(n * m);
  for (std::size_t j = 0; j < m; ++j) {
    in.read(reinterpret_cast<char*>(column.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ConfigError("panel " + path.string() + ": truncated data");
    for (std::size_t i = 0; i < n; ++i) values[i * m + j] = column[i];
  }
  return PValuePanel(n, m, std::move(values), sidecar.at("seed").get<std::uint64_t>(),
                     sidecar.at("scenario_digest").get<std::string>());
}

}  // namespace graphopt
