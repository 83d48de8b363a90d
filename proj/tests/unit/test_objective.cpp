#include <cmath>

#include <gtest/gtest.h>

#include "graphopt/error.hpp"
#include "graphopt/objective.hpp"
#include "graphopt/procedure.hpp"
#include "support.hpp"

using namespace graphopt;
using graphopt::testing::two_dose_graph;
using graphopt::testing::random_graph;

namespace {

PValuePanel panel_of(std::size_t cols, const std::vector<std::vector<double>>& rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return PValuePanel(rows.size(), cols, v, 0, "");
}

DecisionMatrix random_decisions(std::size_t n, std::size_t m, Rng& rng) {
  DecisionMatrix d(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) d.row_data(i)[j] = rng.uniform() < 0.6;
  }
  return d;
}

std::vector<double> random_weights(std::size_t m, Rng& rng) {
  std::vector<double> w(m);
  double s = 0.0;
  for (auto& v : w) s += (v = rng.exponential());
  for (auto& v : w) v /= s;
  // Renormalise the last entry so the sum is 1 to the last bit.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i) head += w[i];
  w.back() = 1.0 - head;
  return w;
}

}  // namespace

TEST(DecideAll, HolmTwoRows) {
  const auto d = decide_all(holm_graph(3, 0.025), panel_of(3, {{0.001, 0.02, 0.011}, {1, 1, 1}}));
  EXPECT_EQ(d, DecisionMatrix(2, 3, {1, 1, 1, 0, 0, 0}));
}

TEST(DecideAll, EmptyPanel) {
  const auto d = decide_all(holm_graph(3, 0.025), PValuePanel(0, 3, {}, 0, ""));
  EXPECT_EQ(d.rows(), 0u);
  EXPECT_EQ(d.cols(), 3u);
}

TEST(DecideAll, TwoDoseSingleRow) {
  const auto d = decide_all(two_dose_graph(), panel_of(4, {{0.001, 0.05, 0.03, 0.1}}));
  EXPECT_EQ(d, DecisionMatrix(1, 4, {1, 0, 0, 0}));
}

TEST(DecideAll, RejectsMismatchAndInfeasibleGraph) {
  EXPECT_THROW(decide_all(holm_graph(2, 0.025), panel_of(3, {{0.1, 0.1, 0.1}})), InputError);
  Graph bad = holm_graph(3, 0.025);
  bad.alpha(0) = -0.1;
  EXPECT_THROW(decide_all(bad, panel_of(3, {{0.1, 0.1, 0.1}})), InputError);
}

TEST(DecideAll, ThreadCountDoesNotMatter) {
  const Scenario s = Scenario::from_powers(std::vector<double>{0.8, 0.9, 0.95}, exchangeable_correlation(3, 0.3));
  const PValuePanel panel = sample_pvalues(s, 20000, 1);
  const Graph g = holm_graph(3, 0.025);
  EXPECT_EQ(decide_all(g, panel, 1), decide_all(g, panel, 3));
}

TEST(EmpiricalObjective, HandValues) {
  EXPECT_DOUBLE_EQ(empirical_objective(DecisionMatrix(2, 3, std::vector<std::uint8_t>(6, 1)),
                                       ObjectiveSpec::plain({0.2, 0.3, 0.5})),
                   1.0);
  EXPECT_NEAR(empirical_objective(DecisionMatrix(1, 3, {1, 0, 0}), ObjectiveSpec::equal_weights(3)), 1.0 / 3, 1e-15);
  const auto gated = ObjectiveSpec::gated({0.0, 0.5, 0.5}, 0);
  EXPECT_DOUBLE_EQ(empirical_objective(DecisionMatrix(2, 3, {0, 1, 1, 1, 1, 0}), gated), 0.25);
}

TEST(EmpiricalObjective, EmptyAndMismatch) {
  EXPECT_THROW(empirical_objective(DecisionMatrix(0, 3), ObjectiveSpec::equal_weights(3)), InputError);
  EXPECT_THROW(empirical_objective(DecisionMatrix(1, 2), ObjectiveSpec::equal_weights(3)), InputError);
}

TEST(ObjectiveSpec, Validation) {
  EXPECT_THROW(ObjectiveSpec::plain({0.5, 0.6}), InputError);
  EXPECT_THROW(ObjectiveSpec::plain({1.5, -0.5}), InputError);
  EXPECT_THROW(ObjectiveSpec::gated({0.5, 0.5}, 0), InputError);
  EXPECT_THROW(ObjectiveSpec::gated({0.0, 1.0}, 2), InputError);
  const auto g = ObjectiveSpec::equal_weights(4, 0);
  EXPECT_EQ(g.weights()[0], 0.0);
  EXPECT_NEAR(g.weights()[3], 1.0 / 3, 1e-15);
}

TEST(ObjectiveSpec, JsonForms) {
  const auto a = objective_from_json({{"kind", "plain"}, {"weights", {0.4, 0.2, 0.3, 0.1}}}, 4);
  EXPECT_EQ(a.kind(), ObjectiveKind::plain);
  EXPECT_EQ(a.weights()[0], 0.4);
  const auto b = objective_from_json({{"kind", "gated"}, {"weights", "equal"}, {"gate", 0}}, 3);
  EXPECT_EQ(b.kind(), ObjectiveKind::gated);
  EXPECT_EQ(*b.gate(), 0u);
  const auto c = objective_from_json(to_json(b), 3);
  EXPECT_EQ(c.gate(), b.gate());
  EXPECT_THROW(objective_from_json({{"kind", "plain"}, {"weights", {0.5, 0.5}}}, 3), ConfigError);
  EXPECT_THROW(objective_from_json({{"kind", "maxmin"}, {"weights", "equal"}}, 3), ConfigError);
}

TEST(EvaluateObjective, ZeroGraphIsZero) {
  const Scenario s = Scenario::from_powers(std::vector<double>{0.9, 0.9, 0.9}, exchangeable_correlation(3, 0.0));
  const PValuePanel panel = sample_pvalues(s, 10000, 2);
  EXPECT_EQ(evaluate_objective(Graph::zero(3), panel, ObjectiveSpec::equal_weights(3)), 0.0);
}

TEST(EvaluateObjective, GateNeverRejectedIsZero) {
  // Gate endpoint has no alpha and no incoming edge.
  Graph g = Graph::zero(3);
  g.alpha(1) = 0.0125;
  g.alpha(2) = 0.0125;
  g.transition(1, 2) = 1.0;
  g.transition(2, 1) = 1.0;
  const Scenario s = Scenario::from_powers(std::vector<double>{0.9, 0.9, 0.9}, exchangeable_correlation(3, 0.0));
  const PValuePanel panel = sample_pvalues(s, 10000, 3);
  EXPECT_EQ(evaluate_objective(g, panel, ObjectiveSpec::equal_weights(3, 0)), 0.0);
  EXPECT_GT(evaluate_objective(g, panel, ObjectiveSpec::equal_weights(3)), 0.5);
}

TEST(EvaluateObjective, FusedPathMatchesDecisionMatrix) {
  Rng rng(4);
  const Scenario s = Scenario::from_powers(std::vector<double>{0.8, 0.85, 0.9, 0.95}, exchangeable_correlation(4, 0.5));
  const PValuePanel panel = sample_pvalues(s, 5000, 4);
  for (int rep = 0; rep < 20; ++rep) {
    const Graph g = random_graph(4, 0.025, rng);
    const auto w = random_weights(4, rng);
    const auto d = decide_all(g, panel);
    EXPECT_EQ(evaluate_objective(g, panel, ObjectiveSpec::plain(w), 2), empirical_objective(d, ObjectiveSpec::plain(w)));
    std::vector<double> gw = w;
    gw[1] = 0.0;
    double s2 = 0.0;
    for (double v : gw) s2 += v;
    for (auto& v : gw) v /= s2;
    gw[3] = 1.0 - gw[0] - gw[2];
    const auto gated = ObjectiveSpec::gated(gw, 1);
    EXPECT_NEAR(evaluate_objective(g, panel, gated), empirical_objective(d, gated), 1e-15);
  }
}

TEST(EmpiricalObjective, HalfPanelsAverageToWhole) {
  Rng rng(5);
  const Scenario s = Scenario::from_powers(std::vector<double>{0.8, 0.9, 0.95}, exchangeable_correlation(3, 0.3));
  const PValuePanel panel = sample_pvalues(s, 9999, 5);
  const auto spec = ObjectiveSpec::equal_weights(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Graph g = random_graph(3, 0.025, rng);
    const std::size_t cut = 1 + rng.below(panel.rows() - 1);
    const double whole = evaluate_objective(g, panel, spec);
    const double a = evaluate_objective(g, panel.slice(0, cut), spec);
    const double b = evaluate_objective(g, panel.slice(cut, panel.rows()), spec);
    EXPECT_NEAR((a * cut + b * (panel.rows() - cut)) / panel.rows(), whole, 1e-14);
  }
}

TEST(EmpiricalObjective, GatingDominatedByPlain) {
  Rng rng(6);
  for (int rep = 0; rep < 200; ++rep) {
    const auto d = random_decisions(50, 4, rng);
    std::vector<double> w = random_weights(3, rng);
    w.insert(w.begin(), 0.0);
    EXPECT_LE(empirical_objective(d, ObjectiveSpec::gated(w, 0)), empirical_objective(d, ObjectiveSpec::plain(w)) + 1e-15);
  }
}

TEST(EmpiricalObjective, LinearInWeightsAndBounded) {
  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const auto d = random_decisions(40, 5, rng);
    const auto w1 = random_weights(5, rng);
    const auto w2 = random_weights(5, rng);
    const double lam = rng.uniform();
    std::vector<double> w(5);
    for (std::size_t i = 0; i < 5; ++i) w[i] = lam * w1[i] + (1 - lam) * w2[i];
    double head = 0.0;
    for (std::size_t i = 0; i < 4; ++i) head += w[i];
    w[4] = 1.0 - head;
    const double blended = empirical_objective(d, ObjectiveSpec::plain(w));
    const double a = empirical_objective(d, ObjectiveSpec::plain(w1));
    const double b = empirical_objective(d, ObjectiveSpec::plain(w2));
    EXPECT_NEAR(blended, lam * a + (1 - lam) * b, 1e-12);
    EXPECT_GE(blended, 0.0);
    EXPECT_LE(blended, 1.0);
  }
}

TEST(Fwer, HolmOnNullPanel) {
  const std::size_t n = 1000000;
  const Scenario s({0.0, 0.0, 0.0}, exchangeable_correlation(3, 0.0));
  const PValuePanel null_panel = sample_pvalues(s, n, 8);
  EXPECT_LE(fwer_estimate(holm_graph(3, 0.025), null_panel), 0.025 + 3 * 1.56e-4);
  const std::size_t order[] = {0, 1, 2};
  EXPECT_NEAR(fwer_estimate(fixed_sequence_graph(order, 0.025), null_panel), 0.025,
              3 * std::sqrt(0.025 * 0.975 / n));
  EXPECT_EQ(fwer_estimate(Graph::zero(3), null_panel), 0.0);
}

TEST(MonteCarloSe, Formula) {
  EXPECT_DOUBLE_EQ(monte_carlo_se(0.5, 100), 0.05);
  EXPECT_EQ(monte_carlo_se(1.0, 100), 0.0);
}

TEST(ObjectiveCsv, RowLayout) {
  EXPECT_EQ(objective_csv_header(), "scenario_digest,graph_digest,kind,n,value,se");
  const std::string row = objective_csv_row("abc", holm_graph(2, 0.025), ObjectiveSpec::equal_weights(2), 100, 0.5);
  EXPECT_EQ(row.rfind("abc," + graph_digest(holm_graph(2, 0.025)) + ",plain,100,", 0), 0u);
}
