#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "graphopt/error.hpp"
#include "graphopt/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kInfeasible = 4 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 0;
  bool quiet = false;
};

graphopt::RunConfig load(const Globals& g) {
  if (g.config.empty()) throw graphopt::ConfigError("--config is required");
  auto cfg = graphopt::load_run_config(g.config);
  if (g.seed) cfg.reseed(*g.seed);
  if (g.out) cfg.out = *g.out;
  if (g.threads > 0) cfg.threads = g.threads;
  return cfg;
}

graphopt::PipelineOptions options(const Globals& g, graphopt::Stage until, bool compute = true) {
  graphopt::PipelineOptions o;
  o.until = until;
  o.compute = compute;
  if (!g.quiet) o.log = [](const std::string& m) { std::cerr << "[graphopt] " << m << "\n"; };
  return o;
}

void print_report(const graphopt::Report& r) {
  if (r.dataset_max) std::printf("dataset max (training panel): %.4f\n", *r.dataset_max);
  if (r.cv) {
    const auto& e = r.cv->table[r.cv->chosen];
    std::string widths;
    for (auto w : e.spec.hidden_widths) widths += (widths.empty() ? "" : "x") + std::to_string(w);
    std::printf("chosen network: %s dropout %.2f (cv mse %.3g)\n", widths.c_str(), e.spec.dropout_rate, e.mean_mse);
  }
  if (r.rows.empty()) return;
  std::printf("%-12s %10s %10s %10s %12s %9s\n", "method", "held-out", "se", "train", "time (s)", "converged");
  for (const auto& row : r.rows) {
    std::printf("%-12s %10.4f %10.5f %10.4f %12.2f %9s\n", row.method.c_str(), row.eval_value, row.eval_se,
                row.train_value, row.elapsed, row.converged ? "yes" : "no");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graphical multiple-testing procedure optimiser"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Base seed; re-derives every stage seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads");
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress messages");

  struct StageCommand {
    const char* name;
    const char* help;
    graphopt::Stage until;
  };
  const StageCommand stages[] = {
      {"simulate", "Simulate the training and held-out p-value panels", graphopt::Stage::simulate},
      {"sample", "Sample random graphs and build the training dataset", graphopt::Stage::sample},
      {"cv", "Cross-validate the candidate network structures", graphopt::Stage::cv},
      {"train", "Train the chosen network", graphopt::Stage::train},
      {"optimize", "Augmented Lagrangian search on the surrogate", graphopt::Stage::optimize},
      {"refine", "Refine the surrogate optimum on the Monte Carlo objective", graphopt::Stage::refine},
      {"baseline", "Run the configured baselines", graphopt::Stage::baseline},
  };
  std::string chosen;
  for (const auto& s : stages) {
    app.add_subcommand(s.name, s.help)->callback([&chosen, name = s.name] { chosen = name; });
  }
  auto* report_cmd = app.add_subcommand("report", "Write the report from existing artifacts");
  report_cmd->callback([&] { chosen = "report"; });
  auto* compare_cmd = app.add_subcommand("compare", "Run the pipeline and every baseline");
  compare_cmd->callback([&] { chosen = "compare"; });
  auto* eval_cmd = app.add_subcommand("evaluate", "Monte Carlo objective of a graph file");
  std::string graph_file;
  std::optional<std::size_t> eval_n;
  eval_cmd->add_option("--graph", graph_file, "Graph JSON {alphas, transitions}")->required();
  eval_cmd->add_option("--n", eval_n, "Monte Carlo rows (default: eval_n from the config)");
  eval_cmd->callback([&] { chosen = "evaluate"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    auto cfg = load(g);
    if (chosen == "evaluate") {
      std::ifstream in(graph_file);
      if (!in) throw graphopt::ConfigError("cannot open graph file " + graph_file);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw graphopt::ConfigError(graph_file + ": " + e.what());
      }
      const auto graph = graphopt::graph_from_json(j.contains("graph") ? j.at("graph") : j);
      if (graph.size() == cfg.family.m) {
        const auto report = graphopt::validate_graph(graph, cfg.family.alpha_total);
        if (!report.feasible()) {
          throw graphopt::InfeasibleError("graph violates " + report.violations().front().constraint);
        }
      }
      const std::uint64_t seed = g.seed ? *g.seed : cfg.seeds.eval_panel;
      const auto e = graphopt::evaluate_graph(graph, cfg.make_scenario(), cfg.make_objective(),
                                              eval_n.value_or(cfg.eval_n), seed, cfg.threads);
      std::filesystem::create_directories(cfg.out);
      graphopt::DirectoryLock lock(cfg.out);
      std::ofstream(cfg.out / "evaluate.json")
          << nlohmann::json{{"value", e.value}, {"se", e.se}, {"n", e.n}, {"seed", e.seed}, {"graph_digest", e.graph_digest}}
                 .dump(2)
          << "\n";
      std::printf("%.6f +- %.6f (n = %zu)\n", e.value, e.se, e.n);
      return kOk;
    }
    graphopt::Report r;
    if (chosen == "compare") {
      r = graphopt::compare_methods(cfg, options(g, graphopt::Stage::report));
    } else if (chosen == "report") {
      r = graphopt::run_pipeline(cfg, options(g, graphopt::Stage::report, false));
    } else {
      r = graphopt::run_pipeline(cfg, options(g, graphopt::stage_from_name(chosen)));
    }
    print_report(r);
    return kOk;
  } catch (const graphopt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const graphopt::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const graphopt::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const graphopt::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
