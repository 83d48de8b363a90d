#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "graphopt/error.hpp"
#include "graphopt/graph_space.hpp"
#include "graphopt/procedure.hpp"
#include "support.hpp"

using namespace graphopt;
using graphopt::testing::two_dose_family;
using graphopt::testing::two_dose_graph;

namespace {

/// Gatekeeping family: H1 holds all alpha and may pass to the ten
/// secondaries; secondaries share among themselves but never back to H1.
FamilyConfig gatekeeping_family() {
  FamilyConfig f;
  f.m = 11;
  f.alpha_total = 0.025;
  f.alpha.fixed[0] = 0.025;
  f.rows.resize(11);
  for (std::size_t j = 1; j < 10; ++j) f.rows[0].free.push_back(j);
  f.rows[0].remainder = 10;
  for (std::size_t i = 1; i <= 10; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 1; j <= 10; ++j) {
      if (j != i) others.push_back(j);
    }
    f.rows[i].remainder = others.back();
    others.pop_back();
    f.rows[i].free = others;
  }
  return f;
}

}  // namespace

TEST(ParamSpace, Dimensions) {
  EXPECT_EQ(ParamSpace::fully_free(6, 0.025).dimension(), 29u);
  EXPECT_EQ(ParamSpace::fully_free(3, 0.025).dimension(), 5u);
  EXPECT_EQ(ParamSpace(gatekeeping_family()).dimension(), 89u);
  EXPECT_EQ(ParamSpace(two_dose_family()).dimension(), 5u);
}

TEST(ParamSpace, CoordinateOrderForThreeEndpoints) {
  const ParamSpace space = ParamSpace::fully_free(3, 0.025);
  const auto& c = space.coordinates();
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0].kind, Coordinate::Kind::alpha);
  EXPECT_EQ(c[0].name(), "alpha[0]");
  EXPECT_EQ(c[1].name(), "alpha[1]");
  EXPECT_EQ(c[2].kind, Coordinate::Kind::transition);
  EXPECT_EQ(c[2].name(), "t[0][1]");
  EXPECT_EQ(c[3].name(), "t[1][0]");
  EXPECT_EQ(c[4].name(), "t[2][0]");
  EXPECT_DOUBLE_EQ(c[0].upper, 0.025);
  EXPECT_DOUBLE_EQ(c[4].upper, 1.0);
}

TEST(Decode, ThreeEndpointExample) {
  const ParamSpace space = ParamSpace::fully_free(3, 0.025);
  const Graph g = decode(std::vector<double>{0.01, 0.005, 0.8, 0.6, 0.2}, space);
  EXPECT_NEAR(g.alpha(2), 0.01, 1e-15);
  EXPECT_NEAR(g.transition(0, 2), 0.2, 1e-15);
  EXPECT_NEAR(g.transition(1, 2), 0.4, 1e-15);
  EXPECT_NEAR(g.transition(2, 1), 0.8, 1e-15);
  EXPECT_TRUE(validate_graph(g, 0.025).feasible());
}

TEST(Decode, ZeroVectorFillsRemainders) {
  const ParamSpace space = ParamSpace::fully_free(4, 0.025);
  const Graph g = decode(std::vector<double>(space.dimension(), 0.0), space);
  EXPECT_EQ(g.alpha(3), 0.025);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t rem = i == 3 ? 2 : 3;
    EXPECT_EQ(g.transition(i, rem), 1.0);
  }
}

TEST(Decode, ToleranceAndInfeasibility) {
  const ParamSpace space = ParamSpace::fully_free(3, 0.025);
  const Graph g = decode(std::vector<double>{-5e-10, 0.025 + 5e-10, 0.5, 0.5, 0.5}, space);
  EXPECT_EQ(g.alpha(0), 0.0);
  EXPECT_TRUE(validate_graph(g, 0.025).feasible());
  EXPECT_THROW(decode(std::vector<double>{-1e-6, 0.01, 0.5, 0.5, 0.5}, space), InfeasibleError);
  EXPECT_THROW(decode(std::vector<double>{0.02, 0.02, 0.5, 0.5, 0.5}, space), InfeasibleError);
  EXPECT_THROW(decode(std::vector<double>{0.02, 0.02}, space), StructuralError);
}

TEST(Encode, TwoDose) {
  const ParamSpace space(two_dose_family());
  const auto x = encode(two_dose_graph(), space);
  const std::vector<double> expected = {0.0125, 0.8, 0.6, 0.2, 0.6};
  ASSERT_EQ(x.size(), expected.size());
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(x[k], expected[k], 1e-15);
  const Graph back = decode(x, space);
  const Graph g = two_dose_graph();
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(back.alpha(i), g.alpha(i), 1e-15);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(back.transition(i, j), g.transition(i, j), 1e-15);
  }
}

TEST(Encode, HolmThree) {
  const auto x = encode(holm_graph(3, 0.025), ParamSpace::fully_free(3, 0.025));
  const std::vector<double> expected = {0.025 / 3, 0.025 / 3, 0.5, 0.5, 0.5};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(x[k], expected[k], 1e-15);
}

TEST(Encode, NamesOffendingEntry) {
  const ParamSpace space(two_dose_family());
  Graph g = two_dose_graph();
  g.transition(0, 3) = 0.1;
  g.transition(0, 1) = 0.7;
  try {
    encode(g, space);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("t[0][3]"), std::string::npos) << e.what();
  }
}

TEST(RoundTrip, RandomGraphsAndVectors) {
  for (std::size_t m : {2, 3, 4, 6}) {
    const ParamSpace space = ParamSpace::fully_free(m, 0.025);
    for (const auto& x : sample_uniform(space, 1000, m)) {
      const Graph g = decode(x, space);
      const auto y = encode(g, space);
      for (std::size_t k = 0; k < x.size(); ++k) ASSERT_NEAR(y[k], x[k], 1e-12);
      const Graph h = decode(y, space);
      for (std::size_t k = 0; k < m * m; ++k) ASSERT_NEAR(h.transitions()[k], g.transitions()[k], 1e-12);
      for (std::size_t k = 0; k < m; ++k) ASSERT_NEAR(h.alpha(k), g.alpha(k), 1e-12);
    }
  }
}

TEST(SampleUniform, AllFeasible) {
  const ParamSpace space = ParamSpace::fully_free(3, 0.025);
  for (const auto& x : sample_uniform(space, 10000, 1)) {
    ASSERT_TRUE(space.constraints().feasible(x));
    ASSERT_TRUE(validate_graph(decode(x, space), 0.025).feasible());
  }
  const ParamSpace gk(gatekeeping_family());
  for (const auto& x : sample_uniform(gk, 200, 2)) ASSERT_TRUE(validate_graph(decode(x, gk), 0.025).feasible());
}

TEST(SampleUniform, SingleFreeAlphaIsUniform) {
  const ParamSpace space(two_dose_family());
  const std::size_t n = 20000;
  std::vector<std::size_t> bins(4, 0);
  double mean = 0.0;
  for (const auto& x : sample_uniform(space, n, 3)) {
    mean += x[0];
    bins[std::min<std::size_t>(3, static_cast<std::size_t>(x[0] / 0.025 * 4))]++;
  }
  EXPECT_NEAR(mean / n, 0.0125, 3 * 0.025 / std::sqrt(12.0 * n));
  for (std::size_t b : bins) EXPECT_NEAR(static_cast<double>(b) / n, 0.25, 3 * std::sqrt(0.25 * 0.75 / n));
}

TEST(SampleUniform, DirichletMeans) {
  const ParamSpace space = ParamSpace::fully_free(4, 1.0);
  const std::size_t n = 20000;
  const auto xs = sample_uniform(space, n, 4);
  for (std::size_t k = 0; k < space.dimension(); ++k) {
    double mean = 0.0, sq = 0.0;
    for (const auto& x : xs) {
      mean += x[k];
      sq += x[k] * x[k];
    }
    mean /= n;
    const double sd = std::sqrt(sq / n - mean * mean);
    // alpha splits over 4 entries, every transition row over 3.
    const double expected = space.coordinates()[k].name().starts_with("alpha") ? 0.25 : 1.0 / 3.0;
    EXPECT_NEAR(mean, expected, 3 * sd / std::sqrt(static_cast<double>(n))) << space.coordinates()[k].name();
  }
}

TEST(SampleUniform, SlackGroupsStayBelowLimit) {
  FamilyConfig f;
  f.m = 3;
  f.alpha_total = 0.025;
  f.alpha.free = {0, 1, 2};
  f.rows.resize(3);
  f.rows[0].free = {1, 2};
  f.rows[1].free = {0};
  f.rows[2].free = {0, 1};
  const ParamSpace space(f);
  double alpha_sum = 0.0;
  const std::size_t n = 20000;
  for (const auto& x : sample_uniform(space, n, 5)) {
    ASSERT_TRUE(space.constraints().feasible(x));
    alpha_sum += x[0] + x[1] + x[2];
  }
  // Dirichlet(1,1,1,1) with one slack term: expected used share 3/4.
  EXPECT_NEAR(alpha_sum / n, 0.75 * 0.025, 0.001);
}

TEST(SampleUniform, Deterministic) {
  const ParamSpace space = ParamSpace::fully_free(4, 0.025);
  EXPECT_EQ(sample_uniform(space, 50, 9), sample_uniform(space, 50, 9));
  EXPECT_NE(sample_uniform(space, 50, 9), sample_uniform(space, 50, 10));
  const auto a = sample_uniform(space, 50, 9);
  const auto b = sample_uniform(space, 10, 9);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(ConstraintValues, HandExamples) {
  const ParamSpace space = ParamSpace::fully_free(3, 0.025);
  const auto v = constraint_values(std::vector<double>{0.02, 0.02, 0.5, 0.5, 0.5}, space);
  EXPECT_NEAR(*std::max_element(v.begin(), v.end()), 0.015, 1e-15);
  const auto w = constraint_values(std::vector<double>{0.01, 0.01, -0.01, 0.5, 0.5}, space);
  EXPECT_NEAR(*std::max_element(w.begin(), w.end()), 0.01, 1e-15);
  for (const auto& x : sample_uniform(space, 100, 6)) {
    const auto c = constraint_values(x, space);
    EXPECT_LE(*std::max_element(c.begin(), c.end()), 1e-12);
  }
}

TEST(ConstraintValues, AffineAndConvex) {
  const ParamSpace space = ParamSpace::fully_free(4, 0.025);
  const auto xs = sample_uniform(space, 200, 7);
  Rng rng(7);
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    const double lam = rng.uniform();
    std::vector<double> z(xs[i].size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = lam * xs[i][k] + (1 - lam) * xs[i + 1][k];
    const auto cz = constraint_values(z, space);
    const auto ca = constraint_values(xs[i], space);
    const auto cb = constraint_values(xs[i + 1], space);
    for (std::size_t k = 0; k < cz.size(); ++k) EXPECT_NEAR(cz[k], lam * ca[k] + (1 - lam) * cb[k], 1e-15);
    EXPECT_TRUE(space.constraints().feasible(z));
  }
}

TEST(ConstraintSet, ProjectLandsInside) {
  const ParamSpace space = ParamSpace::fully_free(4, 0.025);
  Rng rng(8);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(space.dimension());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = (2 * rng.uniform() - 0.5) * space.upper_bounds()[k];
    ASSERT_TRUE(space.constraints().project(x));
    EXPECT_TRUE(space.constraints().feasible(x));
  }
}

TEST(FamilyJson, MaskLanguage) {
  const nlohmann::json j = {{"m", 4},
                            {"alpha_total", 0.025},
                            {"alpha", {"free", "fixed:0", "remainder", "fixed:0"}},
                            {"rows",
                             {{{"free", {1}}, {"remainder", 2}},
                              {{"free", {2}}, {"remainder", 3}},
                              {{"free", {0}}, {"remainder", 3}},
                              {{"free", {0}}, {"remainder", 1}}}}};
  const ParamSpace space(family_from_json(j));
  EXPECT_EQ(space.dimension(), 5u);
  EXPECT_EQ(encode(two_dose_graph(), space), encode(two_dose_graph(), ParamSpace(two_dose_family())));
  const ParamSpace again(family_from_json(to_json(space.config())));
  EXPECT_EQ(again.dimension(), 5u);
  EXPECT_EQ(ParamSpace(family_from_json({{"m", 6}, {"alpha_total", 0.025}, {"preset", "full"}})).dimension(), 29u);
}

TEST(FamilyJson, RejectsBadMasks) {
  EXPECT_THROW(family_from_json({{"m", 2}, {"preset", "banana"}}), ConfigError);
  auto bad_diag = ParamSpace::fully_free(3, 0.025).config();
  bad_diag.rows[0].free = {0};
  EXPECT_THROW(ParamSpace{bad_diag}, ConfigError);
  auto over = ParamSpace::fully_free(3, 0.025).config();
  over.alpha.free = {0};
  over.alpha.remainder.reset();
  over.alpha.fixed = {{1, 0.02}, {2, 0.02}};
  EXPECT_THROW(ParamSpace{over}, ConfigError);
  FamilyConfig empty;
  empty.m = 2;
  empty.rows.resize(2);
  EXPECT_THROW(ParamSpace{empty}, ConfigError);
}

TEST(TrainingCsv, RoundTripIsExact) {
  const ParamSpace space = ParamSpace::fully_free(3, 0.025);
  const auto xs = sample_uniform(space, 20, 11);
  std::vector<double> ys;
  for (std::size_t i = 0; i < xs.size(); ++i) ys.push_back(1.0 / (3.0 + i));
  const auto path = std::filesystem::temp_directory_path() / "graphopt_training_roundtrip.csv";
  save_training_csv(path, xs, ys);
  std::vector<FreeVector> xr;
  std::vector<double> yr;
  load_training_csv(path, xr, yr);
  EXPECT_EQ(xr, xs);
  EXPECT_EQ(yr, ys);
  std::filesystem::remove(path);
}
