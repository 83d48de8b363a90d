#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphopt/fnn.hpp"
#include "graphopt/graph_space.hpp"
#include "graphopt/objective.hpp"
#include "graphopt/optimize.hpp"
#include "graphopt/trial_sim.hpp"

namespace graphopt {

/// Sub-seeds of one run, all derived from a base seed unless given explicitly.
struct RunSeeds {
  std::uint64_t panel = 0;
  std::uint64_t eval_panel = 0;
  std::uint64_t sample = 0;
  std::uint64_t train = 0;
  std::uint64_t optimize = 0;
  std::uint64_t isres = 0;

  static RunSeeds derive(std::uint64_t base);
};

struct FnnSettings {
  std::vector<NetworkSpec> candidates;
  std::size_t folds = 5;
  std::size_t cv_epochs = 1000;
  TrainConfig train;  // final training; train.seed is overridden by seeds.train
};

/// Methods reported next to the surrogate pipeline.
struct BaselineSettings {
  bool max = true;
  bool isres = false;
  bool refine_only = false;
  double isres_budget_factor = 1.5;
  std::size_t refine_only_starts = 4;
};

struct RunConfig {
  std::string name = "run";
  nlohmann::json scenario;
  FamilyConfig family;
  nlohmann::json objective;
  std::size_t B = 2000;
  std::size_t n = 100000;
  std::size_t eval_n = 100000;
  std::uint64_t seed = 1;
  RunSeeds seeds;
  FnnSettings fnn;
  ALConfig al;
  RefineConfig refine;
  IsresConfig isres;
  BaselineSettings baselines;
  unsigned threads = 1;
  std::filesystem::path out = "out";

  /// Parses and cross-checks m across scenario, family and objective.
  /// Throws ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Digest of every field that affects results (not threads or out).
  std::string digest() const;

  Scenario make_scenario() const;
  ObjectiveSpec make_objective() const;
  /// Re-derives seeds from a new base seed (the --seed flag).
  void reseed(std::uint64_t base);
};

RunConfig load_run_config(const std::filesystem::path& path);

enum class Stage { simulate, sample, cv, train, optimize, refine, baseline, report };
Stage stage_from_name(const std::string& name);
std::string stage_name(Stage s);

struct MethodRow {
  std::string method;
  std::optional<double> surrogate_value;
  double train_value = 0.0;  // training panel
  double eval_value = 0.0;   // held-out panel
  double eval_se = 0.0;
  double elapsed = 0.0;
  bool converged = false;
  std::size_t evaluations = 0;
  FreeVector x;
  Graph graph;
};

struct Report {
  std::string name;
  std::string config_digest;
  std::vector<MethodRow> rows;
  std::optional<CvResult> cv;
  std::optional<double> dataset_max;
  std::vector<double> dataset_values;  // Y of every sampled graph, for plots
  double pipeline_seconds = 0.0;
  double isres_budget = 0.0;
  std::size_t n = 0;
  std::size_t eval_n = 0;
  std::vector<std::pair<std::string, std::string>> artifacts;  // stage, relative path

  const MethodRow* find(const std::string& method) const;
  nlohmann::json to_json() const;
};

struct PipelineOptions {
  Stage until = Stage::report;
  /// When false every stage must already be on disk.
  bool compute = true;
  /// Also write <out>/compare.csv (method, value, se, time).
  bool compare_csv = false;
  std::function<void(const std::string&)> log;
};

/// Runs (or resumes) the staged pipeline under cfg.out. Each stage's
/// artifact is named by the digest of the inputs feeding it and verified
/// against its recorded SHA-256 before reuse. Holds <out>/.lock for the
/// duration and rewrites <out>/manifest.json after every stage.
Report run_pipeline(const RunConfig& cfg, const PipelineOptions& opts = {});

/// Full pipeline plus every baseline; also writes compare.csv and
/// plot_data.csv.
Report compare_methods(RunConfig cfg, const PipelineOptions& opts = {});

struct Evaluation {
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string graph_digest;
};

/// Monte Carlo objective of g on a fresh panel of n rows.
Evaluation evaluate_graph(const Graph& g, const Scenario& s, const ObjectiveSpec& spec, std::size_t n,
                          std::uint64_t seed, unsigned threads = 1);

/// report.json, report.csv and plot_data.csv under dir.
void write_report_files(const Report& r, const std::filesystem::path& dir);

/// Exclusive per-directory lock (<dir>/.lock holding the owner's pid). A
/// lock left by a dead process is taken over.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace graphopt
