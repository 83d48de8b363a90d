#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "graphopt/error.hpp"
#include "graphopt/fnn.hpp"
#include "graphopt/optimize.hpp"
#include "graphopt/rng.hpp"
#include "support.hpp"

using namespace graphopt;
using graphopt::testing::random_network;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Dataset synthetic(std::size_t B, std::size_t d, std::uint64_t seed, double (*f)(const std::vector<double>&)) {
  Rng rng(seed);
  std::vector<std::vector<double>> x(B, std::vector<double>(d));
  std::vector<double> y(B);
  for (std::size_t b = 0; b < B; ++b) {
    for (auto& v : x[b]) v = 2.0 * rng.uniform() - 1.0;
    y[b] = f(x[b]);
  }
  return Dataset::from_rows(x, y);
}

double smooth_bump(const std::vector<double>& x) {
  return 0.5 + 0.2 * std::sin(2.0 * x[0]) * std::cos(1.5 * x[1]) + 0.1 * x[0] * x[1];
}

}  // namespace

TEST(Forward, ZeroNetworkIsOneHalf) {
  std::vector<DenseLayer> layers = {{Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4)},
                                    {Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1)}};
  const Network net({{4}, 0.0}, layers, Standardizer::identity(3), {});
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> x = {rng.normal(), rng.normal(), rng.normal()};
    EXPECT_EQ(net.forward(x), 0.5);
    for (double g : net.input_gradient(x)) EXPECT_EQ(g, 0.0);
  }
}

TEST(Forward, SingleHiddenNodeIgnoresInput) {
  const double b1 = -0.7, w = 2.3;
  std::vector<DenseLayer> layers = {{Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Constant(1, b1)},
                                    {Eigen::MatrixXd::Constant(1, 1, w), Eigen::VectorXd::Zero(1)}};
  const Network net({{1}, 0.0}, layers, Standardizer::identity(2), {});
  const double expected = sigmoid(w * sigmoid(b1));
  EXPECT_NEAR(net.forward(std::vector<double>{0.0, 0.0}), expected, 1e-15);
  EXPECT_NEAR(net.forward(std::vector<double>{5.0, -3.0}), expected, 1e-15);
}

TEST(Forward, DimensionMismatch) {
  Rng rng(2);
  const Network net = random_network(3, rng);
  EXPECT_THROW(net.forward(std::vector<double>{1.0, 2.0}), InputError);
}

TEST(Network, RejectsBadShapes) {
  std::vector<DenseLayer> layers = {{Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4)},
                                    {Eigen::MatrixXd::Zero(1, 5), Eigen::VectorXd::Zero(1)}};
  EXPECT_THROW(Network({{4}, 0.0}, layers, Standardizer::identity(3), {}), StructuralError);
  layers[1].weights = Eigen::MatrixXd::Zero(1, 4);
  EXPECT_THROW(Network({{4}, 0.0}, layers, Standardizer::identity(3), {-1.0, 0.0}), InputError);
}

TEST(InputGradient, LinearChainClosedForm) {
  const double w1 = 0.8, b1 = 0.1, w2 = -1.7, b2 = 0.4, mu = 0.3, sd = 2.0, a = 3.0, c = -1.0;
  std::vector<DenseLayer> layers = {{Eigen::MatrixXd::Constant(1, 1, w1), Eigen::VectorXd::Constant(1, b1)},
                                    {Eigen::MatrixXd::Constant(1, 1, w2), Eigen::VectorXd::Constant(1, b2)}};
  Standardizer st{Eigen::VectorXd::Constant(1, mu), Eigen::VectorXd::Constant(1, sd)};
  const Network net({{1}, 0.0}, layers, st, {a, c});
  const double x = 1.3;
  const double h1 = sigmoid(w1 * (x - mu) / sd + b1);
  const double out = sigmoid(w2 * h1 + b2);
  EXPECT_NEAR(net.forward(std::vector<double>{x}), a * out + c, 1e-14);
  const double expected = a * out * (1 - out) * w2 * h1 * (1 - h1) * w1 / sd;
  EXPECT_NEAR(net.input_gradient(std::vector<double>{x})[0], expected, 1e-15);
}

TEST(InputGradient, MatchesCentralDifferences) {
  Rng rng(3);
  const double h = 1e-5;
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const std::size_t d = 1 + rng.below(8);
    const Network net = random_network(d, rng);
    for (int k = 0; k < 10; ++k) {
      std::vector<double> x(d);
      for (auto& v : x) v = rng.normal();
      std::vector<double> grad(d);
      const double value = net.value_and_gradient(x, grad);
      EXPECT_EQ(value, net.forward(x));
      for (std::size_t i = 0; i < d; ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (net.forward(xp) - net.forward(xm)) / (2 * h);
        const double err = std::abs(fd - grad[i]) / std::max(std::abs(grad[i]), 1e-6);
        worst = std::max(worst, err);
      }
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Standardizer, RoundTripAndConstantColumn) {
  Rng rng(4);
  Eigen::MatrixXd X(50, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = rng.normal() * 1e-3;
    X(i, 1) = 7.0;
    X(i, 2) = 100.0 + 50.0 * rng.uniform();
  }
  const Standardizer st = Standardizer::fit(X);
  EXPECT_EQ(st.sd[1], 1.0);
  EXPECT_LE((st.restore(st.apply(X)) - X).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd Z = st.apply(X);
  EXPECT_NEAR(Z.col(0).mean(), 0.0, 1e-12);
  EXPECT_NEAR(Z.col(2).squaredNorm() / 50.0, 1.0, 1e-12);
}

TEST(Train, LearnsRepresentableFunction) {
  const Dataset ds = synthetic(512, 1, 5, [](const std::vector<double>& x) { return sigmoid(3.0 * x[0]); });
  TrainConfig cfg;
  cfg.epochs = 10000;
  cfg.seed = 5;
  const Network net = train(ds, {{1}, 0.0}, cfg);
  EXPECT_LT(mean_squared_error(net, ds), 1e-6);
}

TEST(Train, NoisyConstantConvergesToMean) {
  Rng rng(6);
  std::vector<std::vector<double>> x(512, std::vector<double>(2));
  std::vector<double> y(512);
  double mean = 0.0;
  for (std::size_t b = 0; b < x.size(); ++b) {
    x[b] = {rng.uniform(), rng.uniform()};
    y[b] = 0.6 + 0.01 * (rng.uniform() - 0.5);
    mean += y[b];
  }
  mean /= y.size();
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= y.size();
  const Dataset ds = Dataset::from_rows(x, y);
  TrainConfig cfg;
  cfg.epochs = 300;
  const Network net = train(ds, {{4}, 0.0}, cfg);
  EXPECT_NEAR(net.forward(std::vector<double>{0.5, 0.5}), mean, 0.002);
  EXPECT_LT(mean_squared_error(net, ds), 1.5 * var);
}

TEST(Train, DegenerateTargetsAndSmallData) {
  const Dataset flat = synthetic(200, 2, 7, [](const std::vector<double>&) { return 0.3; });
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train(flat, {{4}, 0.0}, cfg), NumericalError);
  const Dataset tiny = synthetic(64, 2, 7, smooth_bump);
  EXPECT_THROW(train(tiny, {{4}, 0.0}, cfg), InputError);
  const Dataset ok = synthetic(200, 2, 7, smooth_bump);
  EXPECT_THROW(train(ok, {{}, 0.0}, cfg), InputError);
  EXPECT_THROW(train(ok, {{4}, 1.0}, cfg), InputError);
}

TEST(Train, BitIdenticalUnderFixedSeed) {
  const Dataset ds = synthetic(300, 2, 8, smooth_bump);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 99;
  for (double rate : {0.0, 0.3}) {
    const Network a = train(ds, {{10, 6}, rate}, cfg);
    const Network b = train(ds, {{10, 6}, rate}, cfg);
    ASSERT_EQ(a.layers().size(), b.layers().size());
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
      EXPECT_TRUE(a.layers()[l].weights == b.layers()[l].weights);
      EXPECT_TRUE(a.layers()[l].bias == b.layers()[l].bias);
    }
    cfg.seed = 100;
    const Network c = train(ds, {{10, 6}, rate}, cfg);
    EXPECT_FALSE(a.layers()[0].weights == c.layers()[0].weights);
    cfg.seed = 99;
  }
}

TEST(Train, OutputAffineMapsTargetRange) {
  const Dataset ds = synthetic(256, 2, 9, smooth_bump);
  TrainConfig cfg;
  cfg.epochs = 1;
  const Network net = train(ds, {{4}, 0.0}, cfg);
  const double lo = ds.Y.minCoeff(), hi = ds.Y.maxCoeff();
  EXPECT_NEAR(net.output_affine().scale * kTargetLow + net.output_affine().offset, lo, 1e-12);
  EXPECT_NEAR(net.output_affine().scale * kTargetHigh + net.output_affine().offset, hi, 1e-12);
}

TEST(Train, DropoutNetworkStillFits) {
  const Dataset ds = synthetic(512, 2, 10, smooth_bump);
  TrainConfig cfg;
  cfg.epochs = 2000;
  const Network net = train(ds, {{20, 20}, 0.3}, cfg);
  const double var = (ds.Y.array() - ds.Y.mean()).square().mean();
  EXPECT_LT(mean_squared_error(net, ds), 0.2 * var);
  // Inference is deterministic.
  const std::vector<double> x = {0.1, -0.2};
  EXPECT_EQ(net.forward(x), net.forward(x));
}

TEST(Folds, SizesAndCoverage) {
  const auto folds = make_folds(10000, 5, 1);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> seen(10000, 0);
  for (const auto& f : folds) {
    EXPECT_EQ(f.size(), 2000u);
    for (auto i : f) seen[i]++;
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  const auto uneven = make_folds(11, 3, 1);
  EXPECT_EQ(uneven[0].size(), 4u);
  EXPECT_EQ(uneven[1].size(), 4u);
  EXPECT_EQ(uneven[2].size(), 3u);
  EXPECT_THROW(make_folds(10, 1, 1), InputError);
  EXPECT_THROW(make_folds(2, 3, 1), InputError);
}

TEST(CrossValidate, SingleCandidate) {
  const Dataset ds = synthetic(400, 2, 11, smooth_bump);
  TrainConfig cfg;
  cfg.epochs = 20;
  const std::vector<NetworkSpec> cands = {{{6}, 0.0}};
  const CvResult cv = cross_validate(ds, cands, 3, cfg);
  EXPECT_EQ(cv.chosen, 0u);
  ASSERT_EQ(cv.table.size(), 1u);
  EXPECT_EQ(cv.chosen_spec(), cands[0]);
  EXPECT_EQ(cv.table[0].fold_mse.size(), 3u);
  EXPECT_EQ(cv.table[0].parameters, cands[0].parameter_count(2));
  EXPECT_THROW(cross_validate(ds, std::vector<NetworkSpec>{}, 3, cfg), InputError);
}

TEST(CrossValidate, PrefersAdequateCapacity) {
  const Dataset ds = synthetic(1024, 2, 12, smooth_bump);
  TrainConfig cfg;
  cfg.epochs = 400;
  const std::vector<NetworkSpec> cands = {{{1}, 0.0}, {{16, 16}, 0.0}};
  EXPECT_EQ(cross_validate(ds, cands, 4, cfg).chosen, 1u);
}

TEST(CrossValidate, TiesGoToEarlierCandidate) {
  const Dataset ds = synthetic(400, 2, 13, smooth_bump);
  TrainConfig cfg;
  cfg.epochs = 10;
  const std::vector<NetworkSpec> cands = {{{5}, 0.0}, {{5}, 0.0}};
  const CvResult cv = cross_validate(ds, cands, 2, cfg);
  EXPECT_EQ(cv.table[0].mean_mse, cv.table[1].mean_mse);
  EXPECT_EQ(cv.chosen, 0u);
}

TEST(ParameterCount, Formula) {
  EXPECT_EQ((NetworkSpec{{40, 40}, 0.0}).parameter_count(5), 5u * 40 + 40 + 40 * 40 + 40 + 40 + 1);
}

TEST(NetworkJson, RoundTripIsExact) {
  Rng rng(14);
  const Network net = random_network(4, rng);
  const Network back = network_from_json(nlohmann::json::parse(to_json(net).dump()));
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    EXPECT_EQ(back.forward(x), net.forward(x));
  }
  EXPECT_EQ(back.spec(), net.spec());
  EXPECT_THROW(network_from_json({{"layers", 3}}), ConfigError);
}

TEST(SpecJson, ShorthandAndFull) {
  EXPECT_EQ(network_spec_from_json({{"layers", 3}, {"width", 20}, {"dropout", 0.3}}), (NetworkSpec{{20, 20, 20}, 0.3}));
  const NetworkSpec s{{7, 3}, 0.1};
  EXPECT_EQ(network_spec_from_json(to_json(s)), s);
}

TEST(CvJson, RoundTrip) {
  CvResult cv;
  cv.table = {{{{4}, 0.0}, {0.1, 0.2}, 0.15, 17}, {{{8}, 0.3}, {0.05, 0.07}, 0.06, 33}};
  cv.chosen = 1;
  const CvResult back = cv_result_from_json(to_json(cv));
  EXPECT_EQ(back.chosen, 1u);
  EXPECT_EQ(back.chosen_spec(), cv.chosen_spec());
  EXPECT_EQ(back.table[0].fold_mse, cv.table[0].fold_mse);
}

TEST(OutputMap, IncreasingAffineKeepsMaximizer) {
  // Surrogate of a bump with an interior maximum on [-1, 1]^2.
  const Dataset ds = synthetic(512, 2, 15, [](const std::vector<double>& x) {
    return 0.8 - 0.3 * (x[0] - 0.2) * (x[0] - 0.2) - 0.2 * (x[1] + 0.3) * (x[1] + 0.3);
  });
  TrainConfig tcfg;
  tcfg.epochs = 1500;
  const auto net = std::make_shared<const Network>(train(ds, {{12}, 0.0}, tcfg));
  const auto mapped = std::make_shared<const Network>(net->with_output_map(2.5, -0.7));
  EXPECT_NEAR(mapped->forward(std::vector<double>{0.1, 0.1}), 2.5 * net->forward(std::vector<double>{0.1, 0.1}) - 0.7,
              1e-14);

  ConstraintSet box(2);
  box.add_bounds(0, -1.0, 1.0, "x0");
  box.add_bounds(1, -1.0, 1.0, "x1");
  const auto problem = [&](std::shared_ptr<const Network> n) {
    OptProblem p;
    p.value = [n](std::span<const double> x) { return n->forward(x); };
    p.value_and_gradient = [n](std::span<const double> x, std::span<double> g) { return n->value_and_gradient(x, g); };
    p.constraints = box;
    p.scale = {1.0, 1.0};
    return p;
  };
  ALConfig cfg;
  cfg.multi_start = 4;
  cfg.xtol_rel = 1e-12;
  cfg.xtol_abs = 1e-14;
  const OptResult a = augmented_lagrangian(problem(net), cfg);
  const OptResult b = augmented_lagrangian(problem(mapped), cfg);
  EXPECT_NEAR(a.x_star[0], b.x_star[0], 1e-6);
  EXPECT_NEAR(a.x_star[1], b.x_star[1], 1e-6);
  EXPECT_LT(std::abs(a.x_star[0]), 0.99);
  EXPECT_LT(std::abs(a.x_star[1]), 0.99);
}
