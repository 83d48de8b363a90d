#include "graphopt/fnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphopt/digest.hpp"
#include "graphopt/error.hpp"
#include "graphopt/rng.hpp"

namespace graphopt {
namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

std::size_t NetworkSpec::parameter_count(std::size_t input_dim) const {
  std::size_t total = 0;
  std::size_t in = input_dim;
  for (std::size_t w : hidden_widths) {
    total += (in + 1) * w;
    in = w;
  }
  return total + in + 1;
}

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& x, std::span<const double> y) {
  if (x.size() != y.size()) throw StructuralError("dataset: X and Y row counts differ");
  const std::size_t d = x.empty() ? 0 : x.front().size();
  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(d));
  ds.Y.resize(static_cast<Eigen::Index>(y.size()));
  for (std::size_t b = 0; b < x.size(); ++b) {
    if (x[b].size() != d) throw StructuralError("dataset: ragged X rows");
    for (std::size_t k = 0; k < d; ++k) ds.X(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = x[b][k];
    ds.Y(static_cast<Eigen::Index>(b)) = y[b];
  }
  return ds;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.Y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    out.Y(static_cast<Eigen::Index>(i)) = Y(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
  Standardizer s;
  const auto n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean().transpose();
  s.sd.resize(X.cols());
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    const double var = (X.col(k).array() - s.mean(k)).square().sum() / n;
    s.sd(k) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t d) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d))};
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  return ((X.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array()).matrix();
}

Eigen::MatrixXd Standardizer::restore(const Eigen::MatrixXd& Z) const {
  return ((Z.array().rowwise() * sd.transpose().array()).rowwise() + mean.transpose().array()).matrix();
}

Network::Network(NetworkSpec spec, std::vector<DenseLayer> layers, Standardizer standardizer, OutputAffine affine)
    : spec_(std::move(spec)), layers_(std::move(layers)), standardizer_(std::move(standardizer)), affine_(affine) {
  if (layers_.empty()) throw StructuralError("network: no layers");
  if (standardizer_.mean.size() != standardizer_.sd.size()) throw StructuralError("network: standardizer size mismatch");
  if ((standardizer_.sd.array() <= 0.0).any()) throw InputError("network: standardizer sd must be positive");
  if (!(affine_.scale > 0.0)) throw InputError("network: output scale must be positive");
  Eigen::Index in = standardizer_.mean.size();
  for (const auto& layer : layers_) {
    if (layer.weights.cols() != in || layer.bias.size() != layer.weights.rows()) {
      throw StructuralError("network: layer shapes do not chain");
    }
    in = layer.weights.rows();
  }
  if (in != 1) throw StructuralError("network: output layer must have one unit");
}

double Network::forward(std::span<const double> x) const {
  if (x.size() != input_dimension()) throw InputError("network: input dimension mismatch");
  Eigen::VectorXd h = (Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) -
                       standardizer_.mean)
                          .cwiseQuotient(standardizer_.sd);
  for (const auto& layer : layers_) h = sigmoid(layer.weights * h + layer.bias);
  return affine_.scale * h(0) + affine_.offset;
}

double Network::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
  if (x.size() != input_dimension() || grad.size() != x.size()) throw InputError("network: input dimension mismatch");
  std::vector<Eigen::VectorXd> acts;
  acts.reserve(layers_.size() + 1);
  acts.push_back((Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) -
                  standardizer_.mean)
                     .cwiseQuotient(standardizer_.sd));
  for (const auto& layer : layers_) acts.push_back(sigmoid(layer.weights * acts.back() + layer.bias));
  const double s = acts.back()(0);

  Eigen::VectorXd delta(1);
  delta(0) = affine_.scale * s * (1.0 - s);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    Eigen::VectorXd up = layers_[l].weights.transpose() * delta;
    if (l == 0) {
      delta = std::move(up);
      break;
    }
    const auto& a = acts[l].array();
    delta = (up.array() * a * (1.0 - a)).matrix();
  }
  for (std::size_t k = 0; k < grad.size(); ++k) {
    grad[k] = delta(static_cast<Eigen::Index>(k)) / standardizer_.sd(static_cast<Eigen::Index>(k));
  }
  return affine_.scale * s + affine_.offset;
}

std::vector<double> Network::input_gradient(std::span<const double> x) const {
  std::vector<double> g(x.size());
  value_and_gradient(x, g);
  return g;
}

Eigen::VectorXd Network::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != input_dimension()) throw InputError("network: input dimension mismatch");
  Eigen::MatrixXd h = standardizer_.apply(X).transpose();
  for (const auto& layer : layers_) h = sigmoid((layer.weights * h).colwise() + layer.bias);
  return (affine_.scale * h.row(0).transpose().array() + affine_.offset).matrix();
}

Network Network::with_output_map(double a, double b) const {
  if (!(a > 0.0)) throw InputError("network: output map must be increasing");
  Network copy = *this;
  copy.affine_.scale = a * affine_.scale;
  copy.affine_.offset = a * affine_.offset + b;
  return copy;
}

Network train(const Dataset& ds, const NetworkSpec& spec, const TrainConfig& cfg) {
  const std::size_t B = ds.size();
  const std::size_t d = ds.dimension();
  if (spec.hidden_widths.empty()) throw InputError("train: need at least one hidden layer");
  for (std::size_t w : spec.hidden_widths) {
    if (w == 0) throw InputError("train: hidden widths must be positive");
  }
  if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) throw InputError("train: dropout rate must lie in [0, 1)");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw InputError("train: epochs and batch size must be positive");
  if (!(cfg.decay_rho > 0.0 && cfg.decay_rho < 1.0)) throw InputError("train: decay rho must lie in (0, 1)");
  if (B < cfg.batch_size) throw InputError("train: dataset smaller than one batch");
  if (static_cast<std::size_t>(ds.Y.size()) != B) throw StructuralError("train: X and Y row counts differ");

  const double y_min = ds.Y.minCoeff();
  const double y_max = ds.Y.maxCoeff();
  if (!(y_max > y_min)) throw NumericalError("train: degenerate target (all Y equal)");
  OutputAffine affine;
  affine.scale = (y_max - y_min) / (kTargetHigh - kTargetLow);
  affine.offset = y_min - kTargetLow * affine.scale;

  Standardizer standardizer = Standardizer::fit(ds.X);
  const Eigen::MatrixXd inputs = standardizer.apply(ds.X).transpose();  // d x B
  const Eigen::VectorXd targets = ((ds.Y.array() - affine.offset) / affine.scale).matrix();

  Rng rng(cfg.seed, 0x1417);
  std::vector<DenseLayer> layers;
  std::size_t in = d;
  std::vector<std::size_t> widths = spec.hidden_widths;
  widths.push_back(1);
  for (std::size_t out : widths) {
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = s * (2.0 * rng.uniform() - 1.0);
    }
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    layers.push_back(std::move(layer));
    in = out;
  }
  const std::size_t L = layers.size();

  std::vector<Eigen::MatrixXd> acc_w(L);
  std::vector<Eigen::VectorXd> acc_b(L);
  for (std::size_t l = 0; l < L; ++l) {
    acc_w[l] = Eigen::MatrixXd::Zero(layers[l].weights.rows(), layers[l].weights.cols());
    acc_b[l] = Eigen::VectorXd::Zero(layers[l].bias.size());
  }

  const double rho = cfg.decay_rho;
  const double lr = cfg.learning_rate;
  const double eps = cfg.epsilon_delta;
  const double keep = 1.0 - spec.dropout_rate;
  const bool dropout = spec.dropout_rate > 0.0;

  std::vector<std::size_t> order(B);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::MatrixXd> sig(L);    // sigmoid outputs per layer
  std::vector<Eigen::MatrixXd> mask(L);   // inverted-dropout masks (hidden only)
  std::vector<Eigen::MatrixXd> act(L + 1);
  Eigen::MatrixXd delta;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < B; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, B - start);
      const auto cols = static_cast<Eigen::Index>(bs);
      act[0].resize(static_cast<Eigen::Index>(d), cols);
      Eigen::RowVectorXd t(cols);
      for (std::size_t i = 0; i < bs; ++i) {
        act[0].col(static_cast<Eigen::Index>(i)) = inputs.col(static_cast<Eigen::Index>(order[start + i]));
        t(static_cast<Eigen::Index>(i)) = targets(static_cast<Eigen::Index>(order[start + i]));
      }

      for (std::size_t l = 0; l < L; ++l) {
        sig[l] = sigmoid((layers[l].weights * act[l]).colwise() + layers[l].bias);
        if (dropout && l + 1 < L) {
          mask[l].resize(sig[l].rows(), sig[l].cols());
          for (Eigen::Index c = 0; c < mask[l].cols(); ++c) {
            for (Eigen::Index r = 0; r < mask[l].rows(); ++r) mask[l](r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
          }
          act[l + 1] = sig[l].cwiseProduct(mask[l]);
        } else {
          act[l + 1] = sig[l];
        }
      }

      // d(mean squared error)/d(output) through the output sigmoid.
      const auto& s = sig[L - 1].array();
      delta = ((2.0 / static_cast<double>(bs)) * (s - t.array()) * s * (1.0 - s)).matrix();
      for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXd grad_w = delta * act[l].transpose();
        const Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) {
          Eigen::MatrixXd up = layers[l].weights.transpose() * delta;
          const auto& a = sig[l - 1].array();
          if (dropout) {
            delta = (up.array() * mask[l - 1].array() * a * (1.0 - a)).matrix();
          } else {
            delta = (up.array() * a * (1.0 - a)).matrix();
          }
        }
        acc_w[l] = rho * acc_w[l] + (1.0 - rho) * grad_w.cwiseProduct(grad_w);
        acc_b[l] = rho * acc_b[l] + (1.0 - rho) * grad_b.cwiseProduct(grad_b);
        layers[l].weights.array() -= lr * grad_w.array() / (acc_w[l].array() + eps).sqrt();
        layers[l].bias.array() -= lr * grad_b.array() / (acc_b[l].array() + eps).sqrt();
      }
    }
  }

  Network net(spec, std::move(layers), std::move(standardizer), affine);
  net.train_config_digest = content_digest(to_json(cfg));
  return net;
}

double mean_squared_error(const Network& net, const Dataset& ds) {
  if (ds.size() == 0) throw InputError("mse: empty dataset");
  return (net.predict(ds.X) - ds.Y).squaredNorm() / static_cast<double>(ds.size());
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t rows, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InputError("cross_validate: need k >= 2");
  if (rows < k) throw InputError("cross_validate: fewer rows than folds");
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, 0x5EED);
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = rows / k + (f < rows % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

CvResult cross_validate(const Dataset& ds, std::span<const NetworkSpec> candidates, std::size_t k,
                        const TrainConfig& cfg) {
  if (candidates.empty()) throw InputError("cross_validate: empty candidate list");
  const auto folds = make_folds(ds.size(), k, cfg.seed);
  CvResult result;
  for (const auto& spec : candidates) {
    CvEntry entry;
    entry.spec = spec;
    entry.parameters = spec.parameter_count(ds.dimension());
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<std::size_t> train_rows;
      for (std::size_t g = 0; g < k; ++g) {
        if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
      }
      const Network net = train(ds.subset(train_rows), spec, cfg);
      entry.fold_mse.push_back(mean_squared_error(net, ds.subset(folds[f])));
    }
    entry.mean_mse = std::accumulate(entry.fold_mse.begin(), entry.fold_mse.end(), 0.0) / static_cast<double>(k);
    result.table.push_back(std::move(entry));
  }
  for (std::size_t c = 1; c < result.table.size(); ++c) {
    const auto& cand = result.table[c];
    const auto& best = result.table[result.chosen];
    if (cand.mean_mse < best.mean_mse || (cand.mean_mse == best.mean_mse && cand.parameters < best.parameters)) {
      result.chosen = c;
    }
  }
  return result;
}

nlohmann::json to_json(const NetworkSpec& spec) {
  return {{"hidden_widths", spec.hidden_widths}, {"dropout_rate", spec.dropout_rate}};
}

NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  if (j.contains("hidden_widths")) {
    spec.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  } else {
    // {"layers": L, "width": W} shorthand
    spec.hidden_widths.assign(j.at("layers").get<std::size_t>(), j.at("width").get<std::size_t>());
  }
  spec.dropout_rate = j.value("dropout_rate", j.value("dropout", 0.0));
  return spec;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"decay_rho", cfg.decay_rho},
          {"epsilon_delta", cfg.epsilon_delta},
          {"seed", cfg.seed}};
}

nlohmann::json to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
    }
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  const auto& st = net.standardizer();
  return {{"spec", to_json(net.spec())},
          {"layers", layers},
          {"standardizer",
           {{"mean", std::vector<double>(st.mean.data(), st.mean.data() + st.mean.size())},
            {"sd", std::vector<double>(st.sd.data(), st.sd.data() + st.sd.size())}}},
          {"output_affine", {{"scale", net.output_affine().scale}, {"offset", net.output_affine().offset}}},
          {"train_config_digest", net.train_config_digest}};
}

Network network_from_json(const nlohmann::json& j) {
  try {
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
      const auto rows = lj.at("rows").get<Eigen::Index>();
      const auto cols = lj.at("cols").get<Eigen::Index>();
      const auto w = lj.at("weights").get<std::vector<double>>();
      const auto b = lj.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
        throw ConfigError("model JSON: layer array sizes do not match rows/cols");
      }
      DenseLayer layer;
      layer.weights.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      }
      layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
      layers.push_back(std::move(layer));
    }
    const auto mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    const auto sd = j.at("standardizer").at("sd").get<std::vector<double>>();
    Standardizer st{Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                    Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()))};
    OutputAffine affine{j.at("output_affine").at("scale").get<double>(), j.at("output_affine").at("offset").get<double>()};
    Network net(network_spec_from_json(j.at("spec")), std::move(layers), std::move(st), affine);
    net.train_config_digest = j.value("train_config_digest", std::string());
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model JSON: ") + e.what());
  }
}

nlohmann::json to_json(const CvResult& cv) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& e : cv.table) {
    table.push_back({{"spec", to_json(e.spec)},
                     {"fold_mse", e.fold_mse},
                     {"mean_mse", e.mean_mse},
                     {"parameters", e.parameters}});
  }
  return {{"chosen", cv.chosen}, {"table", table}};
}

CvResult cv_result_from_json(const nlohmann::json& j) {
  CvResult cv;
  cv.chosen = j.at("chosen").get<std::size_t>();
  for (const auto& e : j.at("table")) {
    cv.table.push_back({network_spec_from_json(e.at("spec")), e.at("fold_mse").get<std::vector<double>>(),
                        e.at("mean_mse").get<double>(), e.at("parameters").get<std::size_t>()});
  }
  if (cv.chosen >= cv.table.size()) throw ConfigError("cv JSON: chosen index out of range");
  return cv;
}

}  // namespace graphopt
