#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace graphopt {

/// Fully connected sigmoid network with a single sigmoid output unit.
struct NetworkSpec {
  std::vector<std::size_t> hidden_widths;
  double dropout_rate = 0.0;

  std::size_t parameter_count(std::size_t input_dim) const;
  bool operator==(const NetworkSpec&) const = default;
};

/// RMSProp: r <- rho r + (1 - rho) g^2 ; theta <- theta - lr g / sqrt(r + delta).
struct TrainConfig {
  std::size_t epochs = 10000;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  double decay_rho = 0.9;
  double epsilon_delta = 1e-8;
  std::uint64_t seed = 1;
};

/// B rows of free vectors with their objective values.
struct Dataset {
  Eigen::MatrixXd X;  // B x d
  Eigen::VectorXd Y;  // B

  static Dataset from_rows(const std::vector<std::vector<double>>& x, std::span<const double> y);
  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(X.cols()); }
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  /// Column means and population standard deviations; a constant column
  /// gets sd = 1.
  static Standardizer fit(const Eigen::MatrixXd& X);
  static Standardizer identity(std::size_t d);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd restore(const Eigen::MatrixXd& Z) const;
};

/// objective = scale * sigmoid_output + offset, scale > 0.
struct OutputAffine {
  double scale = 1.0;
  double offset = 0.0;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

class Network {
 public:
  Network() = default;
  /// Checks that layer shapes chain from the standardizer's dimension to a
  /// single output and that scale and sd are positive.
  Network(NetworkSpec spec, std::vector<DenseLayer> layers, Standardizer standardizer, OutputAffine affine);

  /// Evaluation-mode prediction in objective units.
  double forward(std::span<const double> x) const;
  /// Same value; writes d forward / d x into grad.
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const;
  std::vector<double> input_gradient(std::span<const double> x) const;
  /// Row-wise predictions for a B x d matrix.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  std::size_t input_dimension() const { return static_cast<std::size_t>(standardizer_.mean.size()); }
  const NetworkSpec& spec() const { return spec_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const OutputAffine& output_affine() const { return affine_; }

  /// Returns a copy whose output map is composed with y -> a y + b (a > 0).
  Network with_output_map(double a, double b) const;

  std::string train_config_digest;

 private:
  NetworkSpec spec_;
  std::vector<DenseLayer> layers_;
  Standardizer standardizer_;
  OutputAffine affine_;
};

/// Targets are mapped so [min Y, max Y] -> [0.3, 0.7].
inline constexpr double kTargetLow = 0.3;
inline constexpr double kTargetHigh = 0.7;

/// Standardises X, rescales Y onto [kTargetLow, kTargetHigh], initialises
/// weights uniform(+-sqrt(6 / (fan_in + fan_out))) and minimises MSE with
/// RMSProp over shuffled mini-batches, with inverted dropout on hidden
/// activations. Bit-identical for identical inputs. Throws NumericalError if
/// Y is constant and InputError if B < batch_size.
Network train(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg);

/// Mean squared error in objective units.
double mean_squared_error(const Network& net, const Dataset& ds);

struct CvEntry {
  NetworkSpec spec;
  std::vector<double> fold_mse;
  double mean_mse = 0.0;
  std::size_t parameters = 0;
};

struct CvResult {
  std::size_t chosen = 0;
  std::vector<CvEntry> table;
  const NetworkSpec& chosen_spec() const { return table[chosen].spec; }
};

/// Row permutation (Rng(seed, 0x5EED)) cut into k contiguous folds; the first
/// B mod k folds get one extra row.
std::vector<std::vector<std::size_t>> make_folds(std::size_t rows, std::size_t k, std::uint64_t seed);

/// k-fold CV over the candidates; picks the lowest mean held-out MSE, ties
/// going to fewer parameters, then to the earlier candidate.
CvResult cross_validate(const Dataset& ds, std::span<const NetworkSpec> candidates, std::size_t k,
                        const TrainConfig& cfg);

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CvResult& cv);
CvResult cv_result_from_json(const nlohmann::json& j);

}  // namespace graphopt
