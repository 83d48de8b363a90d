#include <fstream>
#include <sstream>

#include "graphopt/digest.hpp"
#include "graphopt/error.hpp"
#include "graphopt/pipeline.hpp"
#include "graphopt/rng.hpp"

namespace graphopt {
namespace {

std::vector<NetworkSpec> default_candidates(std::size_t m) {
  const std::size_t width = m <= 3 ? 40 : (m <= 6 ? 60 : 140);
  std::vector<NetworkSpec> out;
  for (double rate : {0.0, 0.3}) {
    for (std::size_t depth : {2, 3, 4}) out.push_back({std::vector<std::size_t>(depth, width), rate});
  }
  return out;
}

nlohmann::json seeds_json(const RunSeeds& s) {
  return {{"panel", s.panel},       {"eval_panel", s.eval_panel}, {"sample", s.sample},
          {"train", s.train},       {"optimize", s.optimize},     {"isres", s.isres}};
}

}  // namespace

RunSeeds RunSeeds::derive(std::uint64_t base) {
  RunSeeds s;
  s.panel = mix_seed(base, 1);
  s.eval_panel = mix_seed(base, 2);
  s.sample = mix_seed(base, 3);
  s.train = mix_seed(base, 4);
  s.optimize = mix_seed(base, 5);
  s.isres = mix_seed(base, 6);
  return s;
}

void RunConfig::reseed(std::uint64_t base) {
  seed = base;
  seeds = RunSeeds::derive(base);
  fnn.train.seed = seeds.train;
  al.seed = seeds.optimize;
  isres.seed = seeds.isres;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  try {
    RunConfig c;
    c.name = j.value("name", c.name);
    c.scenario = j.at("scenario");
    c.family = family_from_json(j.at("family"));
    c.objective = j.value("objective", nlohmann::json{{"kind", "plain"}, {"weights", "equal"}});
    c.B = j.value("B", c.B);
    c.n = j.value("n", c.n);
    c.eval_n = j.value("eval_n", c.n);
    if (c.B == 0 || c.n == 0 || c.eval_n == 0) throw ConfigError("run config: B, n and eval_n must be positive");

    const auto& fj = j.value("fnn", nlohmann::json::object());
    if (fj.contains("candidates")) {
      for (const auto& cj : fj.at("candidates")) c.fnn.candidates.push_back(network_spec_from_json(cj));
    } else {
      c.fnn.candidates = default_candidates(c.family.m);
    }
    c.fnn.folds = fj.value("folds", c.fnn.folds);
    c.fnn.cv_epochs = fj.value("cv_epochs", c.fnn.cv_epochs);
    c.fnn.train.epochs = fj.value("epochs", c.fnn.train.epochs);
    c.fnn.train.batch_size = fj.value("batch_size", c.fnn.train.batch_size);
    c.fnn.train.learning_rate = fj.value("learning_rate", c.fnn.train.learning_rate);
    c.fnn.train.decay_rho = fj.value("decay_rho", c.fnn.train.decay_rho);
    c.fnn.train.epsilon_delta = fj.value("epsilon_delta", c.fnn.train.epsilon_delta);
    if (c.fnn.candidates.empty()) throw ConfigError("run config: fnn.candidates is empty");

    const auto& oj = j.value("optimizer", nlohmann::json::object());
    c.al = al_config_from_json(oj.value("augmented_lagrangian", nlohmann::json::object()));
    c.refine = refine_config_from_json(oj.value("refine", nlohmann::json::object()));
    c.isres = isres_config_from_json(oj.value("isres", nlohmann::json::object()));

    const auto& bj = j.value("baselines", nlohmann::json::object());
    c.baselines.max = bj.value("max", c.baselines.max);
    c.baselines.isres = bj.value("isres", c.baselines.isres);
    c.baselines.refine_only = bj.value("refine_only", c.baselines.refine_only);
    c.baselines.isres_budget_factor = bj.value("isres_budget_factor", c.baselines.isres_budget_factor);
    c.baselines.refine_only_starts = bj.value("refine_only_starts", c.baselines.refine_only_starts);

    c.threads = j.value("threads", 1u);
    c.out = j.value("out", std::string("out"));

    c.reseed(j.value("seed", std::uint64_t{1}));
    if (j.contains("seeds")) {
      const auto& sj = j.at("seeds");
      c.seeds.panel = sj.value("panel", c.seeds.panel);
      c.seeds.eval_panel = sj.value("eval_panel", c.seeds.eval_panel);
      c.seeds.sample = sj.value("sample", c.seeds.sample);
      c.seeds.train = sj.value("train", c.seeds.train);
      c.seeds.optimize = sj.value("optimize", c.seeds.optimize);
      c.seeds.isres = sj.value("isres", c.seeds.isres);
      c.fnn.train.seed = c.seeds.train;
      c.al.seed = c.seeds.optimize;
      c.isres.seed = c.seeds.isres;
    }

    // Cross-checks: every component must agree on m.
    const Scenario s = c.make_scenario();
    if (s.size() != c.family.m) {
      throw ConfigError("run config: scenario has m = " + std::to_string(s.size()) + " but family has m = " +
                        std::to_string(c.family.m));
    }
    (void)c.make_objective();
    (void)ParamSpace(c.family);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& spec : fnn.candidates) cands.push_back(graphopt::to_json(spec));
  return {{"name", name},
          {"scenario", scenario},
          {"family", graphopt::to_json(family)},
          {"objective", objective},
          {"B", B},
          {"n", n},
          {"eval_n", eval_n},
          {"seed", seed},
          {"seeds", seeds_json(seeds)},
          {"fnn",
           {{"candidates", cands},
            {"folds", fnn.folds},
            {"cv_epochs", fnn.cv_epochs},
            {"epochs", fnn.train.epochs},
            {"batch_size", fnn.train.batch_size},
            {"learning_rate", fnn.train.learning_rate},
            {"decay_rho", fnn.train.decay_rho},
            {"epsilon_delta", fnn.train.epsilon_delta}}},
          {"optimizer",
           {{"augmented_lagrangian", graphopt::to_json(al)},
            {"refine", graphopt::to_json(refine)},
            {"isres", graphopt::to_json(isres)}}},
          {"baselines",
           {{"max", baselines.max},
            {"isres", baselines.isres},
            {"refine_only", baselines.refine_only},
            {"isres_budget_factor", baselines.isres_budget_factor},
            {"refine_only_starts", baselines.refine_only_starts}}},
          {"threads", threads},
          {"out", out.string()}};
}

std::string RunConfig::digest() const {
  auto j = to_json();
  j.erase("threads");
  j.erase("out");
  j.erase("name");
  return content_digest(j);
}

Scenario RunConfig::make_scenario() const { return scenario_from_json(scenario); }

ObjectiveSpec RunConfig::make_objective() const { return objective_from_json(objective, family.m); }

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

Stage stage_from_name(const std::string& name) {
  static const std::pair<const char*, Stage> table[] = {
      {"simulate", Stage::simulate}, {"sample", Stage::sample},     {"cv", Stage::cv},
      {"train", Stage::train},       {"optimize", Stage::optimize}, {"refine", Stage::refine},
      {"baseline", Stage::baseline}, {"report", Stage::report}};
  for (const auto& [n, s] : table) {
    if (name == n) return s;
  }
  throw ConfigError("unknown stage \"" + name + "\"");
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::simulate: return "simulate";
    case Stage::sample: return "sample";
    case Stage::cv: return "cv";
    case Stage::train: return "train";
    case Stage::optimize: return "optimize";
    case Stage::refine: return "refine";
    case Stage::baseline: return "baseline";
    case Stage::report: return "report";
  }
  return "unknown";
}

}  // namespace graphopt
