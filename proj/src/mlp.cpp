#include "sprmip/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "sprmip/error.hpp"

namespace sprmip {

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw MalformedInput("mlp: needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.rows() == 0 || layer.cols() == 0) {
      throw MalformedInput("mlp: layer " + std::to_string(l) + " is empty");
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw MalformedInput("mlp: bias length mismatch in layer " +
                           std::to_string(l));
    }
    if (l > 0 && layer.cols() != layers_[l - 1].rows()) {
      throw MalformedInput("mlp: layer " + std::to_string(l) + " expects " +
                           std::to_string(layer.cols()) + " inputs but layer " +
                           std::to_string(l - 1) + " has " +
                           std::to_string(layers_[l - 1].rows()) + " outputs");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw MalformedInput("mlp: non-finite parameter in layer " +
                           std::to_string(l));
    }
  }
}

std::vector<int> Mlp::hidden_widths() const {
  std::vector<int> w;
  for (int l = 0; l < num_hidden_layers(); ++l) w.push_back(layer(l).rows());
  return w;
}

int Mlp::total_hidden() const {
  int n = 0;
  for (int l = 0; l < num_hidden_layers(); ++l) n += layer(l).rows();
  return n;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const Layer& x = a.layers_[l];
    const Layer& y = b.layers_[l];
    if (x.weights.rows() != y.weights.rows() ||
        x.weights.cols() != y.weights.cols() || x.weights != y.weights ||
        x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

Mlp init_mlp(int input_dim, std::span<const int> hidden, int num_classes,
             std::uint64_t seed) {
  if (input_dim <= 0 || num_classes <= 0) {
    throw MalformedInput("init_mlp: dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  int fan_in = input_dim;
  auto make = [&](int rows) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer layer{Eigen::MatrixXd(rows, fan_in), Eigen::VectorXd(rows)};
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = u(rng);
    }
    for (int r = 0; r < rows; ++r) layer.bias(r) = u(rng);
    layers.push_back(std::move(layer));
    fan_in = rows;
  };
  for (int width : hidden) {
    if (width <= 0) throw MalformedInput("init_mlp: hidden width must be positive");
    make(width);
  }
  make(num_classes);
  return Mlp(std::move(layers));
}

ForwardResult forward(const Mlp& mlp, const Eigen::VectorXd& x) {
  if (x.size() != mlp.input_dim()) {
    throw MalformedInput("forward: input has dimension " +
                         std::to_string(x.size()) + ", network expects " +
                         std::to_string(mlp.input_dim()));
  }
  ForwardResult out;
  Eigen::VectorXd a = x;
  for (int l = 0; l < mlp.num_hidden_layers(); ++l) {
    const Layer& layer = mlp.layer(l);
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    a = z.cwiseMax(0.0);
    out.preacts.push_back(std::move(z));
  }
  const Layer& last = mlp.layers().back();
  out.logits = last.weights * a + last.bias;
  return out;
}

Eigen::VectorXd logits(const Mlp& mlp, const Eigen::VectorXd& x) {
  return forward(mlp, x).logits;
}

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

void Dataset::validate() const {
  if (inputs.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw MalformedInput("dataset: " + std::to_string(inputs.cols()) +
                         " inputs but " + std::to_string(labels.size()) +
                         " labels");
  }
  if (num_classes <= 0) throw MalformedInput("dataset: num_classes must be positive");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw MalformedInput("dataset: label " + std::to_string(y) +
                           " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const int> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.inputs.col(static_cast<Eigen::Index>(i)) = inputs.col(indices[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(indices[i])]);
  }
  return out;
}

std::pair<Dataset, Dataset> Dataset::split(int n) const {
  n = std::clamp(n, 0, size());
  std::vector<int> head(static_cast<std::size_t>(n));
  std::vector<int> tail(static_cast<std::size_t>(size() - n));
  std::iota(head.begin(), head.end(), 0);
  std::iota(tail.begin(), tail.end(), n);
  return {subset(head), subset(tail)};
}

namespace {

std::vector<int> all_indices(const Dataset& data) {
  std::vector<int> idx(static_cast<std::size_t>(data.size()));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

double sample_loss(const Eigen::VectorXd& z, int label) {
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  return lse - z(label);
}

// Accumulates the summed per-sample gradient into `grads` and returns the
// summed loss.
double accumulate_gradient(const std::vector<Layer>& layers,
                           const Dataset& data, std::span<const int> indices,
                           Gradients& grads) {
  const int depth = static_cast<int>(layers.size());
  grads.resize(layers.size());
  for (int l = 0; l < depth; ++l) {
    grads[l].weights = Eigen::MatrixXd::Zero(layers[l].rows(), layers[l].cols());
    grads[l].bias = Eigen::VectorXd::Zero(layers[l].rows());
  }
  std::vector<Eigen::VectorXd> acts(static_cast<std::size_t>(depth));
  std::vector<Eigen::VectorXd> pre(static_cast<std::size_t>(depth));
  Eigen::MatrixXd outer;
  double total = 0.0;
  for (int idx : indices) {
    acts[0] = data.inputs.col(idx);
    for (int l = 0; l < depth; ++l) {
      pre[l] = layers[l].weights * acts[l] + layers[l].bias;
      if (l + 1 < depth) acts[l + 1] = pre[l].cwiseMax(0.0);
    }
    const Eigen::VectorXd& z = pre.back();
    const int y = data.labels[static_cast<std::size_t>(idx)];
    total += sample_loss(z, y);
    Eigen::VectorXd delta = (z.array() - z.maxCoeff()).exp();
    delta /= delta.sum();
    delta(y) -= 1.0;
    for (int l = depth - 1; l >= 0; --l) {
      outer.noalias() = delta * acts[l].transpose();
      grads[l].weights += outer;
      grads[l].bias += delta;
      if (l > 0) {
        Eigen::VectorXd back = layers[l].weights.transpose() * delta;
        for (Eigen::Index i = 0; i < back.size(); ++i) {
          if (!(pre[l - 1](i) > 0.0)) back(i) = 0.0;
        }
        delta = std::move(back);
      }
    }
  }
  return total;
}

void check_batch(const Mlp& mlp, const Dataset& data,
                 std::span<const int> indices) {
  if (indices.empty()) throw MalformedInput("gradient: empty batch");
  if (data.dim() != mlp.input_dim()) {
    throw MalformedInput("gradient: dataset dimension does not match network");
  }
  for (int i : indices) {
    if (i < 0 || i >= data.size()) throw MalformedInput("gradient: index out of range");
  }
}

// Adds lambda * spr_grad per hidden neuron and returns the unscaled penalty.
// Groups in the 2 sqrt((1-a)a)|W|_2 branch whose regularizer step of length
// `step` would reach the origin are listed in `snap` when it is non-null.
double add_spr_gradient(const std::vector<Layer>& layers, const SprConfig& spr,
                        Gradients& grads, double step = 0.0,
                        std::vector<std::pair<int, int>>* snap = nullptr) {
  const double shrink = 2.0 * std::sqrt((1.0 - spr.alpha) * spr.alpha) * spr.lambda * step;
  double penalty = 0.0;
  std::vector<double> group;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const Layer& layer = layers[l];
    const int cols = layer.cols();
    group.resize(static_cast<std::size_t>(cols) + 1);
    for (int j = 0; j < layer.rows(); ++j) {
      for (int c = 0; c < cols; ++c) group[c] = layer.weights(j, c);
      group.back() = layer.bias(j);
      penalty += spr_value(group, spr.alpha, spr.m);
      if (snap != nullptr && spr_case(group, spr.alpha, spr.m) == SprCase::kA) {
        double norm2 = 0.0;
        for (double v : group) norm2 += v * v;
        if (std::sqrt(norm2) <= shrink) snap->emplace_back(static_cast<int>(l), j);
      }
      const std::vector<double> g = spr_grad(group, spr.alpha, spr.m);
      for (int c = 0; c < cols; ++c) grads[l].weights(j, c) += spr.lambda * g[c];
      grads[l].bias(j) += spr.lambda * g.back();
    }
  }
  return penalty;
}

}  // namespace

double cross_entropy(const Mlp& mlp, const Dataset& data,
                     std::span<const int> indices) {
  check_batch(mlp, data, indices);
  double total = 0.0;
  for (int idx : indices) {
    total += sample_loss(logits(mlp, data.inputs.col(idx)),
                         data.labels[static_cast<std::size_t>(idx)]);
  }
  return total / static_cast<double>(indices.size());
}

double cross_entropy(const Mlp& mlp, const Dataset& data) {
  return cross_entropy(mlp, data, all_indices(data));
}

Gradients grad_cross_entropy(const Mlp& mlp, const Dataset& data,
                             std::span<const int> indices) {
  check_batch(mlp, data, indices);
  Gradients g;
  accumulate_gradient(mlp.layers(), data, indices, g);
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (Layer& layer : g) {
    layer.weights *= inv;
    layer.bias *= inv;
  }
  return g;
}

Gradients grad_cross_entropy(const Mlp& mlp, const Dataset& data) {
  return grad_cross_entropy(mlp, data, all_indices(data));
}

double accuracy(const Mlp& mlp, const Dataset& data) {
  if (data.size() == 0) throw MalformedInput("accuracy: empty dataset");
  int correct = 0;
  for (int i = 0; i < data.size(); ++i) {
    if (argmax(logits(mlp, data.inputs.col(i))) ==
        data.labels[static_cast<std::size_t>(i)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / data.size();
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning_rate must be finite and non-negative");
  }
  if (regularizer) regularizer->validate();
}

TrainResult sgd_train(const Mlp& mlp, const Dataset& train,
                      const TrainConfig& cfg, const Dataset* validation) {
  cfg.validate();
  train.validate();
  if (train.size() == 0) throw MalformedInput("train: empty dataset");
  if (train.dim() != mlp.input_dim()) {
    throw MalformedInput("train: dataset dimension does not match network");
  }

  std::vector<Layer> params = mlp.layers();
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order = all_indices(train);
  TrainResult result;
  Gradients grads;
  const bool regularized = cfg.regularizer && cfg.regularizer->lambda > 0.0;
  std::vector<std::pair<int, int>> snap;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (int start = 0; start < train.size(); start += cfg.batch_size) {
      const int len = std::min(cfg.batch_size, train.size() - start);
      std::span<const int> batch(order.data() + start, static_cast<std::size_t>(len));
      double loss = accumulate_gradient(params, train, batch, grads) / len;
      const double inv = 1.0 / len;
      for (Layer& g : grads) {
        g.weights *= inv;
        g.bias *= inv;
      }
      snap.clear();
      if (regularized) {
        loss += cfg.regularizer->lambda *
                add_spr_gradient(params, *cfg.regularizer, grads, cfg.learning_rate,
                                 cfg.spr_snap_to_zero ? &snap : nullptr);
      }
      for (std::size_t l = 0; l < params.size(); ++l) {
        params[l].weights -= cfg.learning_rate * grads[l].weights;
        params[l].bias -= cfg.learning_rate * grads[l].bias;
      }
      for (const auto& [l, j] : snap) {
        params[l].weights.row(j).setZero();
        params[l].bias(j) = 0.0;
      }
      loss_sum += loss;
      ++batches;
    }
    Mlp snapshot(params);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / batches;
    rec.train_accuracy = accuracy(snapshot, train);
    if (validation != nullptr) rec.validation_accuracy = accuracy(snapshot, *validation);
    result.history.push_back(rec);
  }
  result.mlp = Mlp(std::move(params));
  return result;
}

}  // namespace sprmip
