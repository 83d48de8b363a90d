#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphopt/constraints.hpp"
#include "graphopt/graph.hpp"

namespace graphopt {

/// Stacked free coordinates of a graph family: free alphas first (index
/// order), then free transitions row-major.
using FreeVector = std::vector<double>;

/// Declarative description of one budget group (the alpha vector or one
/// transition row). Entries not mentioned are fixed at 0.
struct GroupMask {
  std::vector<std::size_t> free;
  std::map<std::size_t, double> fixed;
  std::optional<std::size_t> remainder;
};

struct FamilyConfig {
  std::size_t m = 0;
  double alpha_total = 0.025;
  GroupMask alpha;
  std::vector<GroupMask> rows;
};

/// Where a free coordinate lives in the graph.
struct Coordinate {
  enum class Kind { alpha, transition } kind = Kind::alpha;
  std::size_t row = 0;  // hypothesis for alphas, source row for transitions
  std::size_t col = 0;  // target for transitions
  double upper = 0.0;
  std::string name() const;
};

/// One budget: its free coordinate indices into the FreeVector, optional
/// remainder entry, and the budget left after fixed entries.
struct BudgetGroup {
  bool is_alpha = false;
  std::size_t row = 0;
  std::vector<std::size_t> coords;
  std::optional<std::size_t> remainder;
  double limit = 0.0;
};

/// Constrained free-parameter space of a graph family. Each group's free
/// entries are bounded by [0, limit] and their sum by limit; the remainder
/// entry (if any) absorbs limit - sum.
class ParamSpace {
 public:
  /// Validates masks; throws ConfigError for inconsistent families.
  explicit ParamSpace(FamilyConfig config);

  /// Every alpha free except the last (remainder); in each row every
  /// off-diagonal entry free except the last (remainder).
  static ParamSpace fully_free(std::size_t m, double alpha_total);

  std::size_t m() const { return config_.m; }
  double alpha_total() const { return config_.alpha_total; }
  std::size_t dimension() const { return coords_.size(); }
  const FamilyConfig& config() const { return config_; }
  const std::vector<Coordinate>& coordinates() const { return coords_; }
  const std::vector<BudgetGroup>& groups() const { return groups_; }
  const ConstraintSet& constraints() const { return constraints_; }

  std::vector<double> lower_bounds() const { return std::vector<double>(dimension(), 0.0); }
  std::vector<double> upper_bounds() const;

 private:
  FamilyConfig config_;
  std::vector<Coordinate> coords_;
  std::vector<BudgetGroup> groups_;
  ConstraintSet constraints_;
  Graph fixed_part_;
  friend Graph decode(std::span<const double>, const ParamSpace&);
};

/// Tolerance on bounds and group sums accepted by decode/encode.
inline constexpr double kDecodeTol = 1e-9;

/// Fills free entries from x and remainders from the group budgets. Values
/// within kDecodeTol outside their bounds are clamped; a group whose sum
/// exceeds its limit by at most kDecodeTol is rescaled onto the limit.
/// Throws InfeasibleError beyond that tolerance.
Graph decode(std::span<const double> x, const ParamSpace& space);

/// Extracts the free coordinates. Throws InputError naming the first fixed
/// or remainder entry of g that disagrees with the family (tolerance 1e-9).
FreeVector encode(const Graph& g, const ParamSpace& space);

/// c_k(x) for every constraint; feasible iff all <= 1e-12.
std::vector<double> constraint_values(std::span<const double> x, const ParamSpace& space);

/// B feasible points: each group is drawn from a flat Dirichlet over its free
/// entries plus its remainder (or plus a slack term when it has none),
/// scaled by the group limit. Sample b uses Rng(seed, b).
std::vector<FreeVector> sample_uniform(const ParamSpace& space, std::size_t count, std::uint64_t seed);

/// {"m", "alpha_total", "preset": "full"} or
/// {"m", "alpha_total", "alpha": ["free" | "fixed:v" | "remainder", ...],
///  "rows": [{"free": [...], "fixed": {"j": v}, "remainder": j}, ...]}
/// Indices are 0-based.
FamilyConfig family_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FamilyConfig& f);

/// Training-set CSV: header x0..x{d-1},Y then one row per graph.
void save_training_csv(const std::filesystem::path& path, const std::vector<FreeVector>& x, std::span<const double> y);
void load_training_csv(const std::filesystem::path& path, std::vector<FreeVector>& x, std::vector<double>& y);

}  // namespace graphopt
