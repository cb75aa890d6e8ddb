#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sprmip/spr.hpp"

namespace sprmip {

struct Layer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;

  int rows() const { return static_cast<int>(weights.rows()); }
  int cols() const { return static_cast<int>(weights.cols()); }
};

// Feed-forward network: ReLU after every layer but the last, whose output
// is the raw logit vector.
class Mlp {
 public:
  Mlp() = default;
  // Throws MalformedInput if dimensions do not chain or a weight is not finite.
  explicit Mlp(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(int i) const { return layers_[static_cast<std::size_t>(i)]; }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  int num_hidden_layers() const { return num_layers() - 1; }
  int input_dim() const { return layers_.empty() ? 0 : layers_.front().cols(); }
  int output_dim() const { return layers_.empty() ? 0 : layers_.back().rows(); }
  std::vector<int> hidden_widths() const;
  int total_hidden() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<Layer> layers_;
};

// Same shape as the parameters of an Mlp.
using Gradients = std::vector<Layer>;

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
Mlp init_mlp(int input_dim, std::span<const int> hidden, int num_classes,
             std::uint64_t seed);

struct ForwardResult {
  Eigen::VectorXd logits;
  std::vector<Eigen::VectorXd> preacts;  // one per hidden layer
};

ForwardResult forward(const Mlp& mlp, const Eigen::VectorXd& x);

// Shorthand returning only the logits.
Eigen::VectorXd logits(const Mlp& mlp, const Eigen::VectorXd& x);

// Index of the largest logit; ties go to the smallest index.
int argmax(const Eigen::VectorXd& v);

struct Dataset {
  Eigen::MatrixXd inputs;  // one sample per column
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(inputs.rows()); }
  void validate() const;
  Dataset subset(std::span<const int> indices) const;
  // First `n` samples / remainder.
  std::pair<Dataset, Dataset> split(int n) const;
};

// Mean softmax cross-entropy over the selected samples.
double cross_entropy(const Mlp& mlp, const Dataset& data,
                     std::span<const int> indices);
double cross_entropy(const Mlp& mlp, const Dataset& data);

// Mean gradient of the softmax cross-entropy. Per-sample gradients are
// summed then divided by the batch size.
Gradients grad_cross_entropy(const Mlp& mlp, const Dataset& data,
                             std::span<const int> indices);
Gradients grad_cross_entropy(const Mlp& mlp, const Dataset& data);

double accuracy(const Mlp& mlp, const Dataset& data);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 128;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  std::optional<SprConfig> regularizer;
  // Proximal handling of the regularizer near the origin: a neuron group in
  // the 2 sqrt((1-a)a)|W|_2 branch whose regularizer step alone would carry
  // it through zero is set to exactly zero instead of oscillating around it.
  bool spr_snap_to_zero = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean (regularized) mini-batch loss
  double train_accuracy = 0.0;
  std::optional<double> validation_accuracy;
};

struct TrainResult {
  Mlp mlp;
  std::vector<EpochRecord> history;
};

// Plain mini-batch SGD, reshuffling from `cfg.seed` every epoch. With a
// regularizer attached, lambda * spr_grad is added for every hidden neuron's
// (row || bias) group.
TrainResult sgd_train(const Mlp& mlp, const Dataset& train,
                      const TrainConfig& cfg,
                      const Dataset* validation = nullptr);

}  // namespace sprmip
