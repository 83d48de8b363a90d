#include "graphopt/pipeline.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "graphopt/digest.hpp"
#include "graphopt/error.hpp"
#include "graphopt/rng.hpp"
#include "parallel.hpp"
#include "scaled_system.hpp"

namespace graphopt {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Re-throws with the stage name prefixed, keeping the error category.
template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  const auto tag = [&](const std::exception& e) { return "stage " + stage + ": " + e.what(); };
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e));
  } catch (const NumericalError& e) {
    throw NumericalError(tag(e));
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(tag(e));
  } catch (const StructuralError& e) {
    throw StructuralError(tag(e));
  } catch (const InputError& e) {
    throw InputError(tag(e));
  }
}

class Workspace {
 public:
  Workspace(const RunConfig& cfg, const PipelineOptions& opts) : cfg_(cfg), opts_(opts), root_(cfg.out) {
    const fs::path manifest = root_ / "manifest.json";
    if (fs::exists(manifest)) {
      try {
        manifest_ = read_json(manifest);
      } catch (const ConfigError&) {
        manifest_ = nlohmann::json::object();
      }
    }
    if (!manifest_.is_object() || !manifest_.contains("artifacts")) manifest_ = {{"artifacts", nlohmann::json::object()}};
    manifest_["config_digest"] = cfg.digest();
    manifest_["config"] = cfg.to_json();
  }

  void log(const std::string& msg) const {
    if (opts_.log) opts_.log(msg);
  }

  fs::path path(const std::string& dir, const std::string& stem, const std::string& key, const std::string& ext) const {
    fs::create_directories(root_ / dir);
    return root_ / dir / (stem + "-" + key + ext);
  }

  /// True when the artifact and its meta file exist and the SHA-256 matches.
  bool cached(const fs::path& file, double& elapsed) {
    const fs::path meta = file.string() + ".meta.json";
    if (!fs::exists(file) || !fs::exists(meta)) return false;
    const auto m = read_json(meta);
    if (m.value("sha256", std::string()) != sha256_hex(read_file(file))) {
      log("digest mismatch for " + file.string() + "; recomputing");
      return false;
    }
    elapsed = m.value("elapsed", 0.0);
    artifacts_.emplace_back(m.value("entry", std::string()), relative(file));
    return true;
  }

  void require_compute(const std::string& stage, const fs::path& file) const {
    if (!opts_.compute) {
      throw ConfigError("artifact " + relative(file) + " is missing; run `graphopt " + stage + "` first");
    }
  }

  void record(const std::string& entry, const std::string& key, const fs::path& file, double elapsed) {
    const std::string sha = sha256_hex(read_file(file));
    write_file(file.string() + ".meta.json",
               nlohmann::json{{"entry", entry}, {"key", key}, {"sha256", sha}, {"elapsed", elapsed}}.dump(2));
    manifest_["artifacts"][entry] = {{"path", relative(file)}, {"key", key}, {"sha256", sha}, {"elapsed", elapsed}};
    artifacts_.emplace_back(entry, relative(file));
    flush();
  }

  void flush() const { write_file(root_ / "manifest.json", manifest_.dump(2)); }

  std::string relative(const fs::path& p) const { return fs::relative(p, root_).generic_string(); }
  const std::vector<std::pair<std::string, std::string>>& artifacts() const { return artifacts_; }
  nlohmann::json& manifest() { return manifest_; }

 private:
  const RunConfig& cfg_;
  const PipelineOptions& opts_;
  fs::path root_;
  nlohmann::json manifest_;
  std::vector<std::pair<std::string, std::string>> artifacts_;
};

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const MethodRow* Report::find(const std::string& method) const {
  for (const auto& r : rows) {
    if (r.method == method) return &r;
  }
  return nullptr;
}

nlohmann::json Report::to_json() const {
  nlohmann::json rj = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = {{"method", r.method},
                          {"train_value", r.train_value},
                          {"eval_value", r.eval_value},
                          {"eval_se", r.eval_se},
                          {"elapsed", r.elapsed},
                          {"converged", r.converged},
                          {"evaluations", r.evaluations},
                          {"x", r.x},
                          {"graph", graphopt::to_json(r.graph)}};
    if (r.surrogate_value) row["surrogate_value"] = *r.surrogate_value;
    rj.push_back(std::move(row));
  }
  nlohmann::json arts = nlohmann::json::object();
  for (const auto& [k, v] : artifacts) arts[k] = v;
  nlohmann::json j = {{"name", name},           {"config_digest", config_digest},
                      {"rows", rj},             {"pipeline_seconds", pipeline_seconds},
                      {"isres_budget", isres_budget}, {"n", n},
                      {"eval_n", eval_n},       {"artifacts", arts}};
  if (cv) j["cv"] = graphopt::to_json(*cv);
  if (dataset_max) j["dataset_max"] = *dataset_max;
  return j;
}

Report run_pipeline(const RunConfig& cfg, const PipelineOptions& opts) {
  fs::create_directories(cfg.out);
  DirectoryLock lock(cfg.out);
  Workspace ws(cfg, opts);
  ws.flush();

  Report report;
  report.name = cfg.name;
  report.config_digest = cfg.digest();
  report.n = cfg.n;
  report.eval_n = cfg.eval_n;
  const auto done = [&](Stage s) {
    if (opts.until != s) return false;
    report.artifacts = ws.artifacts();
    return true;
  };

  const Scenario scenario = cfg.make_scenario();
  const ObjectiveSpec spec = cfg.make_objective();
  const ParamSpace space(cfg.family);
  const std::string sdig = scenario_digest(scenario);
  const nlohmann::json objective_json = to_json(spec);
  const nlohmann::json family_json = to_json(cfg.family);

  // 1. Monte Carlo panels: one for training, one held out for reporting.
  const auto make_panel = [&](const std::string& entry, std::size_t n, std::uint64_t seed, double& elapsed) {
    const std::string key = content_digest({{"scenario", sdig}, {"n", n}, {"seed", seed}});
    const fs::path file = ws.path("panels", entry, key, ".bin");
    if (ws.cached(file, elapsed)) return std::make_pair(key, std::make_shared<const PValuePanel>(load_panel(file)));
    ws.require_compute("simulate", file);
    ws.log("simulating " + entry + " (n = " + std::to_string(n) + ")");
    detail::Stopwatch clock;
    auto panel = std::make_shared<const PValuePanel>(sample_pvalues(scenario, n, seed, cfg.threads));
    elapsed = clock.seconds();
    save_panel(*panel, file);
    ws.record(entry, key, file, elapsed);
    return std::make_pair(key, panel);
  };
  double t_panel = 0.0, t_eval_panel = 0.0;
  const auto [panel_key, panel] =
      staged("simulate", [&] { return make_panel("panel", cfg.n, cfg.seeds.panel, t_panel); });
  const auto eval_panel =
      staged("simulate", [&] { return make_panel("eval_panel", cfg.eval_n, cfg.seeds.eval_panel, t_eval_panel); })
          .second;
  if (done(Stage::simulate)) return report;

  // 2. Random feasible graphs and their objective values.
  double t_sample = 0.0;
  const std::string ds_key = content_digest(
      {{"panel", panel_key}, {"family", family_json}, {"objective", objective_json}, {"B", cfg.B}, {"seed", cfg.seeds.sample}});
  const Dataset ds = staged("sample", [&] {
    const fs::path file = ws.path("datasets", "dataset", ds_key, ".csv");
    std::vector<FreeVector> xs;
    std::vector<double> ys;
    if (ws.cached(file, t_sample)) {
      load_training_csv(file, xs, ys);
    } else {
      ws.require_compute("sample", file);
      ws.log("evaluating " + std::to_string(cfg.B) + " sampled graphs");
      detail::Stopwatch clock;
      xs = sample_uniform(space, cfg.B, cfg.seeds.sample);
      ys.assign(xs.size(), 0.0);
      detail::parallel_for(xs.size(), cfg.threads,
                           [&](std::size_t b) { ys[b] = evaluate_objective(decode(xs[b], space), *panel, spec, 1); });
      t_sample = clock.seconds();
      save_training_csv(file, xs, ys);
      ws.record("dataset", ds_key, file, t_sample);
    }
    return Dataset::from_rows(xs, ys);
  });
  report.dataset_max = ds.Y.maxCoeff();
  report.dataset_values.assign(ds.Y.data(), ds.Y.data() + ds.Y.size());
  if (done(Stage::sample)) return report;

  // 3. Structure selection by k-fold cross-validation.
  double t_cv = 0.0;
  TrainConfig cv_train = cfg.fnn.train;
  cv_train.epochs = cfg.fnn.cv_epochs;
  nlohmann::json cand_json = nlohmann::json::array();
  for (const auto& c : cfg.fnn.candidates) cand_json.push_back(to_json(c));
  const std::string cv_key = content_digest(
      {{"dataset", ds_key}, {"candidates", cand_json}, {"folds", cfg.fnn.folds}, {"train", to_json(cv_train)}});
  report.cv = staged("cv", [&] {
    const fs::path file = ws.path("cv", "cv", cv_key, ".json");
    if (ws.cached(file, t_cv)) return cv_result_from_json(read_json(file));
    ws.require_compute("cv", file);
    ws.log("cross-validating " + std::to_string(cfg.fnn.candidates.size()) + " candidate networks");
    detail::Stopwatch clock;
    CvResult cv = cross_validate(ds, cfg.fnn.candidates, cfg.fnn.folds, cv_train);
    t_cv = clock.seconds();
    write_file(file, to_json(cv).dump(2));
    ws.record("cv", cv_key, file, t_cv);
    return cv;
  });
  if (done(Stage::cv)) return report;

  // 4. Final training of the chosen structure.
  double t_train = 0.0;
  const std::string model_key =
      content_digest({{"dataset", ds_key}, {"spec", to_json(report.cv->chosen_spec())}, {"train", to_json(cfg.fnn.train)}});
  const auto net = staged("train", [&] {
    const fs::path file = ws.path("models", "model", model_key, ".json");
    if (ws.cached(file, t_train)) return std::make_shared<const Network>(network_from_json(read_json(file)));
    ws.require_compute("train", file);
    ws.log("training final network");
    detail::Stopwatch clock;
    auto trained = std::make_shared<const Network>(train(ds, report.cv->chosen_spec(), cfg.fnn.train));
    t_train = clock.seconds();
    write_file(file, to_json(*trained).dump());
    ws.record("model", model_key, file, t_train);
    return trained;
  });
  if (done(Stage::train)) return report;

  const auto opt_stage = [&](const std::string& stage, const std::string& entry, const std::string& key,
                             double& elapsed, auto&& compute) {
    return staged(stage, [&] {
      const fs::path file = ws.path("opt", entry, key, ".json");
      if (ws.cached(file, elapsed)) return opt_result_from_json(read_json(file));
      ws.require_compute(stage, file);
      ws.log("running " + entry);
      OptResult r = compute();
      elapsed = r.elapsed;
      write_file(file, to_json(r).dump(2));
      ws.record(entry, key, file, elapsed);
      return r;
    });
  };

  // 5. Augmented Lagrangian on the surrogate; 6. refinement on the panel.
  const bool run_fnn = cfg.al.multi_start > 0 && cfg.al.max_iterations > 0;
  std::optional<OptResult> al_result, refined;
  double t_al = 0.0, t_refine = 0.0;
  ALConfig al_cfg = cfg.al;
  al_cfg.threads = cfg.threads;
  const std::string al_key = content_digest({{"model", model_key}, {"al", to_json(cfg.al)}});
  if (run_fnn) {
    al_result = opt_stage("optimize", "augmented_lagrangian", al_key, t_al,
                          [&] { return augmented_lagrangian(surrogate_problem(space, net), al_cfg); });
  }
  if (done(Stage::optimize)) return report;
  const OptProblem true_problem = true_objective_problem(space, panel, spec, cfg.threads);
  const std::string refine_key = content_digest(
      {{"start", al_key}, {"panel", panel_key}, {"objective", objective_json}, {"refine", to_json(cfg.refine)}});
  if (run_fnn) {
    refined = opt_stage("refine", "refine", refine_key, t_refine,
                        [&] { return local_refine(true_problem, al_result->x_star, cfg.refine); });
  }
  report.pipeline_seconds = t_panel + t_sample + t_cv + t_train + t_al + t_refine;
  if (done(Stage::refine)) return report;

  // Baselines.
  std::vector<std::pair<OptResult, std::optional<double>>> methods;
  if (refined) methods.emplace_back(*refined, al_result->value);
  if (cfg.baselines.isres && cfg.baselines.isres_budget_factor > 0.0) {
    report.isres_budget = cfg.baselines.isres_budget_factor * report.pipeline_seconds;
    IsresConfig icfg = cfg.isres;
    icfg.threads = cfg.threads;
    const std::string key = content_digest({{"panel", panel_key},
                                            {"family", family_json},
                                            {"objective", objective_json},
                                            {"isres", to_json(cfg.isres)},
                                            {"factor", cfg.baselines.isres_budget_factor},
                                            {"pipeline", refine_key}});
    double t = 0.0;
    methods.emplace_back(opt_stage("baseline", "isres", key, t,
                                   [&] { return isres_baseline(true_problem, report.isres_budget, icfg); }),
                         std::nullopt);
  }
  if (cfg.baselines.refine_only && cfg.baselines.refine_only_starts > 0) {
    const std::uint64_t seed = mix_seed(cfg.seeds.optimize, 7);
    const std::string key = content_digest({{"panel", panel_key},
                                            {"family", family_json},
                                            {"objective", objective_json},
                                            {"refine", to_json(cfg.refine)},
                                            {"starts", cfg.baselines.refine_only_starts},
                                            {"seed", seed}});
    double t = 0.0;
    methods.emplace_back(opt_stage("baseline", "refine_only", key, t,
                                   [&] {
                                     detail::Stopwatch clock;
                                     std::optional<OptResult> best;
                                     std::size_t evals = 0;
                                     std::vector<double> values;
                                     for (const auto& x0 : sample_uniform(space, cfg.baselines.refine_only_starts, seed)) {
                                       OptResult r = local_refine(true_problem, x0, cfg.refine);
                                       evals += r.evaluations;
                                       values.push_back(r.value);
                                       if (!best || r.value > best->value) best = std::move(r);
                                     }
                                     best->method = "refine_only";
                                     best->evaluations = evals;
                                     best->start_values = std::move(values);
                                     best->elapsed = clock.seconds();
                                     return *best;
                                   }),
                         std::nullopt);
  }
  if (cfg.baselines.max) {
    OptResult r = brute_force_baseline(ds, space);
    r.elapsed = t_sample;
    methods.emplace_back(std::move(r), std::nullopt);
  }
  if (done(Stage::baseline)) return report;

  // Report: every value recomputed from the decoded graph.
  for (const auto& [r, surrogate] : methods) {
    MethodRow row;
    row.method = r.method == "local_refine" ? "fnn" : r.method;
    row.surrogate_value = surrogate;
    row.x = r.x_star;
    row.graph = r.graph ? *r.graph : decode(r.x_star, space);
    row.train_value = evaluate_objective(row.graph, *panel, spec, cfg.threads);
    row.eval_value = evaluate_objective(row.graph, *eval_panel, spec, cfg.threads);
    row.eval_se = monte_carlo_se(row.eval_value, cfg.eval_n);
    row.elapsed = row.method == "fnn" ? report.pipeline_seconds : r.elapsed;
    row.converged = r.converged;
    row.evaluations = r.evaluations;
    report.rows.push_back(std::move(row));
  }
  report.artifacts = ws.artifacts();
  write_report_files(report, cfg.out);
  std::vector<std::string> files = {"report.json", "report.csv", "plot_data.csv"};
  if (opts.compare_csv) {
    std::string csv = "method,value,se,train_value,time_seconds,converged\n";
    for (const auto& row : report.rows) {
      csv += row.method + "," + csv_number(row.eval_value) + "," + csv_number(row.eval_se) + "," +
             csv_number(row.train_value) + "," + csv_number(row.elapsed) + "," + (row.converged ? "1" : "0") + "\n";
    }
    write_file(cfg.out / "compare.csv", csv);
    files.push_back("compare.csv");
  }
  for (const auto& f : files) ws.manifest()["reports"][f] = sha256_hex(read_file(cfg.out / f));
  ws.flush();
  return report;
}

Report compare_methods(RunConfig cfg, const PipelineOptions& opts) {
  cfg.baselines.max = true;
  cfg.baselines.isres = true;
  cfg.baselines.refine_only = true;
  PipelineOptions o = opts;
  o.until = Stage::report;
  o.compare_csv = true;
  return run_pipeline(cfg, o);
}

Evaluation evaluate_graph(const Graph& g, const Scenario& s, const ObjectiveSpec& spec, std::size_t n,
                          std::uint64_t seed, unsigned threads) {
  if (g.size() != s.size() || spec.size() != s.size()) {
    throw InputError("evaluate: graph has m = " + std::to_string(g.size()) + " but scenario has m = " +
                     std::to_string(s.size()));
  }
  if (n == 0) throw InputError("evaluate: n must be positive");
  const PValuePanel panel = sample_pvalues(s, n, seed, threads);
  Evaluation e;
  e.value = evaluate_objective(g, panel, spec, threads);
  e.se = monte_carlo_se(e.value, n);
  e.n = n;
  e.seed = seed;
  e.graph_digest = graph_digest(g);
  return e;
}

void write_report_files(const Report& r, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "report.json", r.to_json().dump(2));
  std::string csv = "method,eval_value,eval_se,train_value,surrogate_value,elapsed_seconds,converged,evaluations\n";
  std::string plot = "series,index,value,se,time_seconds\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    csv += row.method + "," + csv_number(row.eval_value) + "," + csv_number(row.eval_se) + "," +
           csv_number(row.train_value) + "," + (row.surrogate_value ? csv_number(*row.surrogate_value) : "") + "," +
           csv_number(row.elapsed) + "," + (row.converged ? "1" : "0") + "," + std::to_string(row.evaluations) + "\n";
    plot += row.method + "," + std::to_string(i) + "," + csv_number(row.eval_value) + "," + csv_number(row.eval_se) +
            "," + csv_number(row.elapsed) + "\n";
  }
  for (std::size_t b = 0; b < r.dataset_values.size(); ++b) {
    plot += "dataset," + std::to_string(b) + "," + csv_number(r.dataset_values[b]) + ",,\n";
  }
  write_file(dir / "report.csv", csv);
  write_file(dir / "plot_data.csv", plot);
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      const auto written = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      if (written != static_cast<ssize_t>(pid.size())) throw ConfigError("cannot write lock file " + path_.string());
      return;
    }
    if (errno != EEXIST) throw ConfigError("cannot create lock file " + path_.string());
    long owner = 0;
    {
      std::ifstream in(path_);
      in >> owner;
    }
    if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno != ESRCH)) {
      throw ConfigError("output directory " + dir.string() + " is locked by process " + std::to_string(owner));
    }
    fs::remove(path_);
  }
  throw ConfigError("cannot acquire lock " + path_.string());
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace graphopt
