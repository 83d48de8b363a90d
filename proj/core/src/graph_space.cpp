#include "graphopt/graph_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "graphopt/error.hpp"
#include "graphopt/rng.hpp"

namespace graphopt {
namespace {

std::string entry_name(bool is_alpha, std::size_t row, std::size_t col) {
  return is_alpha ? "alpha[" + std::to_string(col) + "]"
                  : "t[" + std::to_string(row) + "][" + std::to_string(col) + "]";
}

// Validates one group mask and returns its remaining budget.
double check_group(const GroupMask& g, std::size_t m, bool is_alpha, std::size_t row, double budget) {
  std::set<std::size_t> seen;
  const auto claim = [&](std::size_t j) {
    if (j >= m) throw ConfigError(entry_name(is_alpha, row, j) + ": index out of range");
    if (!is_alpha && j == row) throw ConfigError(entry_name(false, row, j) + ": diagonal entries are fixed at 0");
    if (!seen.insert(j).second) throw ConfigError(entry_name(is_alpha, row, j) + ": entry listed twice");
  };
  for (std::size_t j : g.free) claim(j);
  if (g.remainder) claim(*g.remainder);
  double fixed_sum = 0.0;
  for (const auto& [j, v] : g.fixed) {
    claim(j);
    if (!(v >= 0.0 && v <= budget + kFeasibilityTol)) {
      throw ConfigError(entry_name(is_alpha, row, j) + ": fixed value out of range");
    }
    fixed_sum += v;
  }
  if (fixed_sum > budget + kFeasibilityTol) {
    throw ConfigError((is_alpha ? std::string("alpha") : "row " + std::to_string(row)) +
                      ": fixed entries exceed the budget");
  }
  return std::max(0.0, budget - fixed_sum);
}

GroupMask parse_row(const nlohmann::json& r) {
  GroupMask g;
  if (r.is_null()) return g;
  if (r.contains("free")) g.free = r.at("free").get<std::vector<std::size_t>>();
  if (r.contains("fixed")) {
    for (const auto& [key, value] : r.at("fixed").items()) g.fixed[std::stoul(key)] = value.get<double>();
  }
  if (r.contains("remainder") && !r.at("remainder").is_null()) g.remainder = r.at("remainder").get<std::size_t>();
  return g;
}

nlohmann::json row_to_json(const GroupMask& g) {
  nlohmann::json j = nlohmann::json::object();
  j["free"] = g.free;
  nlohmann::json fixed = nlohmann::json::object();
  for (const auto& [k, v] : g.fixed) fixed[std::to_string(k)] = v;
  j["fixed"] = fixed;
  if (g.remainder) j["remainder"] = *g.remainder;
  return j;
}

}  // namespace

std::string Coordinate::name() const { return entry_name(kind == Kind::alpha, row, col); }

ParamSpace::ParamSpace(FamilyConfig config) : config_(std::move(config)) {
  const std::size_t m = config_.m;
  if (m < 1) throw ConfigError("family: m must be at least 1");
  if (!(config_.alpha_total > 0.0 && config_.alpha_total <= 1.0)) throw ConfigError("family: alpha_total must lie in (0, 1]");
  if (config_.rows.size() != m) {
    throw ConfigError("family: expected " + std::to_string(m) + " row masks, got " + std::to_string(config_.rows.size()));
  }

  fixed_part_ = Graph::zero(m);
  const auto add_group = [&](GroupMask& mask, bool is_alpha, std::size_t row, double budget) {
    std::sort(mask.free.begin(), mask.free.end());
    BudgetGroup group;
    group.is_alpha = is_alpha;
    group.row = row;
    group.remainder = mask.remainder;
    group.limit = check_group(mask, m, is_alpha, row, budget);
    for (const auto& [j, v] : mask.fixed) {
      (is_alpha ? fixed_part_.alpha(j) : fixed_part_.transition(row, j)) = v;
    }
    for (std::size_t j : mask.free) {
      group.coords.push_back(coords_.size());
      coords_.push_back({is_alpha ? Coordinate::Kind::alpha : Coordinate::Kind::transition, row, j, group.limit});
    }
    groups_.push_back(std::move(group));
  };
  add_group(config_.alpha, true, 0, config_.alpha_total);
  for (std::size_t i = 0; i < m; ++i) add_group(config_.rows[i], false, i, 1.0);

  if (coords_.empty()) throw ConfigError("family: no free parameters (dimension 0)");

  constraints_ = ConstraintSet(coords_.size());
  for (std::size_t k = 0; k < coords_.size(); ++k) constraints_.add_bounds(k, 0.0, coords_[k].upper, coords_[k].name());
  for (const auto& g : groups_) {
    if (g.coords.size() < 2) continue;
    constraints_.add_sum_limit(g.coords, g.limit, g.is_alpha ? "alpha.sum" : "row[" + std::to_string(g.row) + "].sum");
  }
}

ParamSpace ParamSpace::fully_free(std::size_t m, double alpha_total) {
  if (m < 2) throw ConfigError("family: the fully free preset needs m >= 2");
  FamilyConfig f;
  f.m = m;
  f.alpha_total = alpha_total;
  for (std::size_t j = 0; j + 1 < m; ++j) f.alpha.free.push_back(j);
  f.alpha.remainder = m - 1;
  f.rows.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t last = (i == m - 1) ? m - 2 : m - 1;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i && j != last) f.rows[i].free.push_back(j);
    }
    f.rows[i].remainder = last;
  }
  return ParamSpace(std::move(f));
}

std::vector<double> ParamSpace::upper_bounds() const {
  std::vector<double> hi;
  hi.reserve(coords_.size());
  for (const auto& c : coords_) hi.push_back(c.upper);
  return hi;
}

Graph decode(std::span<const double> x, const ParamSpace& space) {
  if (x.size() != space.dimension()) {
    throw StructuralError("decode: free vector has " + std::to_string(x.size()) + " entries, expected " +
                          std::to_string(space.dimension()));
  }
  Graph g = space.fixed_part_;
  const auto& coords = space.coordinates();
  std::vector<double> values;
  for (const auto& group : space.groups()) {
    values.clear();
    double sum = 0.0;
    for (std::size_t k : group.coords) {
      double v = x[k];
      if (std::isnan(v) || v < -kDecodeTol || v > group.limit + kDecodeTol) {
        throw InfeasibleError("decode: " + coords[k].name() + " = " + std::to_string(v) + " is outside its bounds");
      }
      v = std::clamp(v, 0.0, group.limit);
      values.push_back(v);
      sum += v;
    }
    if (sum > group.limit + kDecodeTol) {
      throw InfeasibleError(std::string("decode: ") + (group.is_alpha ? "alpha" : "row " + std::to_string(group.row)) +
                            " budget exceeded by " + std::to_string(sum - group.limit));
    }
    if (sum > group.limit) {
      const double scale = group.limit / sum;
      sum = 0.0;
      for (double& v : values) {
        v *= scale;
        sum += v;
      }
    }
    for (std::size_t n = 0; n < group.coords.size(); ++n) {
      const auto& c = coords[group.coords[n]];
      (group.is_alpha ? g.alpha(c.col) : g.transition(c.row, c.col)) = values[n];
    }
    if (group.remainder) {
      const double rest = std::max(0.0, group.limit - sum);
      (group.is_alpha ? g.alpha(*group.remainder) : g.transition(group.row, *group.remainder)) = rest;
    }
  }
  return g;
}

FreeVector encode(const Graph& g, const ParamSpace& space) {
  const std::size_t m = space.m();
  if (g.size() != m) throw StructuralError("encode: graph size does not match the family");
  FreeVector x(space.dimension(), 0.0);
  const auto& coords = space.coordinates();
  const FamilyConfig& cfg = space.config();

  for (const auto& group : space.groups()) {
    const GroupMask& mask = group.is_alpha ? cfg.alpha : cfg.rows[group.row];
    const auto entry = [&](std::size_t j) { return group.is_alpha ? g.alpha(j) : g.transition(group.row, j); };
    double free_sum = 0.0;
    std::vector<bool> listed(m, false);
    for (std::size_t k : group.coords) {
      x[k] = entry(coords[k].col);
      free_sum += x[k];
      listed[coords[k].col] = true;
    }
    for (const auto& [j, v] : mask.fixed) {
      listed[j] = true;
      if (std::abs(entry(j) - v) > kDecodeTol) {
        throw InputError("encode: " + entry_name(group.is_alpha, group.row, j) + " = " + std::to_string(entry(j)) +
                         " conflicts with fixed value " + std::to_string(v));
      }
    }
    if (group.remainder) {
      listed[*group.remainder] = true;
      const double expected = group.limit - free_sum;
      if (std::abs(entry(*group.remainder) - expected) > kDecodeTol) {
        throw InputError("encode: " + entry_name(group.is_alpha, group.row, *group.remainder) +
                         " does not equal the remaining budget " + std::to_string(expected));
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (!listed[j] && std::abs(entry(j)) > kDecodeTol) {
        throw InputError("encode: " + entry_name(group.is_alpha, group.row, j) + " must be 0 in this family");
      }
    }
  }
  return x;
}

std::vector<double> constraint_values(std::span<const double> x, const ParamSpace& space) {
  return space.constraints().values(x);
}

std::vector<FreeVector> sample_uniform(const ParamSpace& space, std::size_t count, std::uint64_t seed) {
  std::vector<FreeVector> out;
  out.reserve(count);
  std::vector<double> e;
  for (std::size_t b = 0; b < count; ++b) {
    Rng rng(seed, b);
    FreeVector x(space.dimension(), 0.0);
    for (const auto& group : space.groups()) {
      const std::size_t k = group.coords.size();
      if (k == 0) continue;
      // k free entries plus one remainder/slack component.
      e.resize(k + 1);
      double total = 0.0;
      for (double& v : e) {
        v = rng.exponential();
        total += v;
      }
      for (std::size_t n = 0; n < k; ++n) x[group.coords[n]] = group.limit * (e[n] / total);
    }
    out.push_back(std::move(x));
  }
  return out;
}

FamilyConfig family_from_json(const nlohmann::json& j) {
  try {
    const auto m = j.at("m").get<std::size_t>();
    const double alpha_total = j.value("alpha_total", 0.025);
    if (j.value("preset", std::string()) == "full") return ParamSpace::fully_free(m, alpha_total).config();
    if (j.contains("preset")) throw ConfigError("family: unknown preset");

    FamilyConfig f;
    f.m = m;
    f.alpha_total = alpha_total;
    const auto alpha = j.at("alpha").get<std::vector<nlohmann::json>>();
    if (alpha.size() != m) throw ConfigError("family: \"alpha\" must list m entries");
    for (std::size_t i = 0; i < m; ++i) {
      const auto& a = alpha[i];
      if (a.is_number()) {
        f.alpha.fixed[i] = a.get<double>();
        continue;
      }
      const auto s = a.get<std::string>();
      if (s == "free") {
        f.alpha.free.push_back(i);
      } else if (s == "remainder") {
        if (f.alpha.remainder) throw ConfigError("family: more than one alpha remainder");
        f.alpha.remainder = i;
      } else if (s.rfind("fixed:", 0) == 0) {
        f.alpha.fixed[i] = std::stod(s.substr(6));
      } else {
        throw ConfigError("family: unknown alpha status \"" + s + "\"");
      }
    }
    const auto& rows = j.at("rows");
    if (rows.size() != m) throw ConfigError("family: \"rows\" must list m row masks");
    for (const auto& r : rows) {
      if (r.is_object() && r.contains("remainder") && r.at("remainder").is_array()) {
        throw ConfigError("family: at most one remainder per row");
      }
      f.rows.push_back(parse_row(r));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("family JSON: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("family JSON: malformed number");
  }
}

nlohmann::json to_json(const FamilyConfig& f) {
  nlohmann::json alpha = nlohmann::json::array();
  for (std::size_t i = 0; i < f.m; ++i) {
    if (std::find(f.alpha.free.begin(), f.alpha.free.end(), i) != f.alpha.free.end()) {
      alpha.push_back("free");
    } else if (f.alpha.remainder == i) {
      alpha.push_back("remainder");
    } else {
      const auto it = f.alpha.fixed.find(i);
      alpha.push_back(it == f.alpha.fixed.end() ? 0.0 : it->second);
    }
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : f.rows) rows.push_back(row_to_json(r));
  return {{"m", f.m}, {"alpha_total", f.alpha_total}, {"alpha", alpha}, {"rows", rows}};
}

void save_training_csv(const std::filesystem::path& path, const std::vector<FreeVector>& x, std::span<const double> y) {
  if (x.size() != y.size()) throw StructuralError("training CSV: row count mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  const std::size_t d = x.empty() ? 0 : x.front().size();
  for (std::size_t k = 0; k < d; ++k) out << 'x' << k << ',';
  out << "Y\n";
  char buf[32];
  for (std::size_t b = 0; b < x.size(); ++b) {
    for (double v : x[b]) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", y[b]);
    out << buf;
  }
}

void load_training_csv(const std::filesystem::path& path, std::vector<FreeVector>& x, std::vector<double>& y) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  x.clear();
  y.clear();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) fields.push_back(std::strtod(cell.c_str(), nullptr));
    if (fields.empty()) continue;
    y.push_back(fields.back());
    fields.pop_back();
    x.push_back(std::move(fields));
  }
}

}  // namespace graphopt
