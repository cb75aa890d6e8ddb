#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sprmip/data.hpp"
#include "sprmip/error.hpp"
#include "sprmip/mlp.hpp"

using namespace sprmip;

namespace {

Mlp scalar_net(double w1, double b1, double w2, double b2) {
  Layer a{Eigen::MatrixXd::Constant(1, 1, w1), Eigen::VectorXd::Constant(1, b1)};
  Layer b{Eigen::MatrixXd::Constant(1, 1, w2), Eigen::VectorXd::Constant(1, b2)};
  return Mlp({a, b});
}

Mlp perturbed(const Mlp& mlp, int layer, bool bias, int r, int c, double h) {
  std::vector<Layer> layers = mlp.layers();
  if (bias) {
    layers[layer].bias(r) += h;
  } else {
    layers[layer].weights(r, c) += h;
  }
  return Mlp(std::move(layers));
}

Dataset random_dataset(std::mt19937_64& rng, int dim, int classes, int n) {
  Dataset d;
  d.inputs = Eigen::MatrixXd(dim, n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, classes - 1);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < dim; ++r) d.inputs(r, i) = u(rng);
    d.labels.push_back(lab(rng));
  }
  d.num_classes = classes;
  return d;
}

}  // namespace

TEST_CASE("ReLU kills a negative pre-activation") {
  const Mlp net = scalar_net(1.0, 0.0, 1.0, 0.0);
  const ForwardResult r = forward(net, Eigen::VectorXd::Constant(1, -3.0));
  CHECK(r.preacts[0](0) == -3.0);
  CHECK(r.logits(0) == 0.0);
}

TEST_CASE("identity weights pass nonnegative input through") {
  const int n = 4;
  Layer id{Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)};
  const Mlp net({id, id, id});
  const Eigen::VectorXd x = (Eigen::VectorXd(n) << 0.0, 0.5, 2.0, 7.25).finished();
  CHECK(logits(net, x) == x);
}

TEST_CASE("forward agrees with an independent loop implementation") {
  std::mt19937_64 rng(3);
  const std::vector<int> hidden{8, 8};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mlp net = init_mlp(5, hidden, 3, seed);
    const Eigen::VectorXd x = testing::random_vector(rng, 5, -1.0, 2.0);
    const Eigen::VectorXd y = logits(net, x);
    const std::vector<double> ref =
        testing::naive_logits(net, std::vector<double>(x.data(), x.data() + x.size()));
    for (int c = 0; c < 3; ++c) CHECK(std::abs(y(c) - ref[c]) <= 1e-12);
  }
}

TEST_CASE("dimension mismatch is rejected") {
  const std::vector<int> hidden{3};
  const Mlp net = init_mlp(2, hidden, 2, 1);
  CHECK_THROWS_AS(forward(net, Eigen::VectorXd::Zero(3)), MalformedInput);
  Layer a{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3)};
  Layer b{Eigen::MatrixXd::Zero(2, 4), Eigen::VectorXd::Zero(2)};
  CHECK_THROWS_AS(Mlp({a, b}), MalformedInput);
  Layer nan{Eigen::MatrixXd::Constant(1, 1, std::nan("")), Eigen::VectorXd::Zero(1)};
  CHECK_THROWS_AS(Mlp({nan}), MalformedInput);
}

TEST_CASE("forward is affine within one activation region") {
  std::mt19937_64 rng(5);
  const std::vector<int> hidden{6, 6};
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 200 && checked < 30; ++seed) {
    const Mlp net = init_mlp(3, hidden, 2, seed);
    const Eigen::VectorXd x = testing::random_vector(rng, 3);
    const Eigen::VectorXd dx = testing::random_vector(rng, 3, -1e-3, 1e-3);
    const Eigen::VectorXd x2 = x + dx;
    const ForwardResult a = forward(net, x);
    const ForwardResult b = forward(net, x2);
    bool same = true;
    for (std::size_t l = 0; l < a.preacts.size(); ++l) {
      for (int j = 0; j < a.preacts[l].size(); ++j) {
        same = same && ((a.preacts[l](j) > 0.0) == (b.preacts[l](j) > 0.0));
      }
    }
    if (!same) continue;
    ++checked;
    for (double t : {0.25, 0.5, 0.75}) {
      const Eigen::VectorXd mid = logits(net, t * x + (1.0 - t) * x2);
      const Eigen::VectorXd lin = t * a.logits + (1.0 - t) * b.logits;
      CHECK((mid - lin).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
  CHECK(checked >= 30);
}

TEST_CASE("saturated softmax has a vanishing gradient") {
  Layer a{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)};
  Layer b{(Eigen::MatrixXd(2, 2) << 100.0, 0.0, 0.0, -100.0).finished(), Eigen::VectorXd::Zero(2)};
  const Mlp net({a, b});
  Dataset d;
  d.inputs = Eigen::MatrixXd::Constant(2, 1, 1.0);
  d.labels = {0};
  d.num_classes = 2;
  const Gradients g = grad_cross_entropy(net, d);
  double norm2 = 0.0;
  for (const Layer& l : g) norm2 += l.weights.squaredNorm() + l.bias.squaredNorm();
  CHECK(std::sqrt(norm2) < 1e-6);
}

TEST_CASE("gradient matches central finite differences on every layer") {
  std::mt19937_64 rng(9);
  const std::vector<std::vector<int>> shapes{{4}, {5, 3}, {4, 4, 3}};
  for (const auto& hidden : shapes) {
    const Mlp net = init_mlp(3, hidden, 3, 21);
    const Dataset d = random_dataset(rng, 3, 3, 6);
    const Gradients g = grad_cross_entropy(net, d);
    std::uniform_int_distribution<int> pick_layer(0, net.num_layers() - 1);
    const double h = 1e-5;
    int checked = 0;
    while (checked < 50) {
      const int l = pick_layer(rng);
      const Layer& layer = net.layer(l);
      std::uniform_int_distribution<int> pr(0, layer.rows() - 1);
      std::uniform_int_distribution<int> pc(0, layer.cols());
      const int r = pr(rng);
      const int c = pc(rng);
      const bool bias = c == layer.cols();
      const double num = (cross_entropy(perturbed(net, l, bias, r, c, h), d) -
                          cross_entropy(perturbed(net, l, bias, r, c, -h), d)) /
                         (2.0 * h);
      const double ana = bias ? g[l].bias(r) : g[l].weights(r, c);
      // A coordinate sitting on a ReLU kink has no derivative; skip it.
      if (std::abs(num) < 1e-8 && std::abs(ana) < 1e-8) {
        ++checked;
        continue;
      }
      CHECK(std::abs(num - ana) <= 1e-4 * std::max(std::abs(num), std::abs(ana)) + 1e-9);
      ++checked;
    }
  }
}

TEST_CASE("duplicated batch equals the single-sample gradient exactly") {
  std::mt19937_64 rng(12);
  const std::vector<int> hidden{5};
  const Mlp net = init_mlp(4, hidden, 3, 2);
  const Dataset d = random_dataset(rng, 4, 3, 3);
  const int one[] = {1};
  const int dup[] = {1, 1, 1, 1};
  const Gradients a = grad_cross_entropy(net, d, one);
  const Gradients b = grad_cross_entropy(net, d, dup);
  for (std::size_t l = 0; l < a.size(); ++l) {
    CHECK(a[l].weights == b[l].weights);
    CHECK(a[l].bias == b[l].bias);
  }
  const int none[] = {0};
  CHECK_THROWS_AS(grad_cross_entropy(net, d, std::span<const int>(none, 0)), MalformedInput);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  SyntheticSpec spec;
  const Dataset d = gen_synthetic(spec, 4);
  const std::vector<int> hidden{4};
  const Mlp net = init_mlp(2, hidden, 2, 8);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  const TrainResult r = sgd_train(net, d, cfg);
  CHECK(r.mlp == net);
  CHECK(r.history.size() == 3);
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.learning_rate = 0.1;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("separable blobs are learned by a 1x4 net") {
  SyntheticSpec spec;
  spec.samples = 400;
  spec.margin = 6.0;
  const Dataset d = gen_synthetic(spec, 1);
  const std::vector<int> hidden{4};
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.seed = 3;
  const TrainResult r = sgd_train(init_mlp(2, hidden, 2, 3), d, cfg, &d);
  CHECK(accuracy(r.mlp, d) >= 0.99);
  REQUIRE(r.history.size() == 20);
  CHECK(r.history.back().validation_accuracy.has_value());
  CHECK(r.history.back().loss < r.history.front().loss);
}

TEST_CASE("training is bit-for-bit deterministic") {
  const Dataset d = gen_synthetic(SyntheticSpec{}, 2);
  const std::vector<int> hidden{6, 4};
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.seed = 99;
  cfg.regularizer = SprConfig{0.5, 0.5, 1.0};
  const Mlp net = init_mlp(2, hidden, 2, 5);
  const TrainResult a = sgd_train(net, d, cfg);
  const TrainResult b = sgd_train(net, d, cfg);
  CHECK(a.mlp == b.mlp);
  cfg.seed = 100;
  CHECK_FALSE(sgd_train(net, d, cfg).mlp == a.mlp);
}

TEST_CASE("argmax ties and accuracy of a constant net") {
  CHECK(argmax((Eigen::VectorXd(3) << 1.0, 2.0, 2.0).finished()) == 1);
  // Zero output weights: all logits tie, the winner is class 0.
  Layer a{Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Zero(2)};
  Layer b{Eigen::MatrixXd::Zero(10, 2), Eigen::VectorXd::Zero(10)};
  const Mlp net({a, b});
  std::mt19937_64 rng(1);
  const Dataset d = random_dataset(rng, 3, 10, 500);
  const double freq0 =
      static_cast<double>(std::count(d.labels.begin(), d.labels.end(), 0)) / d.size();
  CHECK(accuracy(net, d) == freq0);
}

TEST_CASE("memorising net scores 1 on its own data") {
  // One-hot inputs mapped to logits by the identity.
  Layer a{Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4)};
  const Mlp net({a, a});
  Dataset d;
  d.inputs = Eigen::MatrixXd::Identity(4, 4);
  d.labels = {0, 1, 2, 3};
  d.num_classes = 4;
  CHECK(accuracy(net, d) == 1.0);
}

TEST_CASE("untrained net on random 10-class labels is near chance") {
  std::mt19937_64 rng(77);
  const Dataset d = random_dataset(rng, 8, 10, 10000);
  const std::vector<int> hidden{16};
  const double acc = accuracy(init_mlp(8, hidden, 10, 4), d);
  CHECK(acc >= 0.05);
  CHECK(acc <= 0.15);
}

TEST_CASE("dataset validation, subset and split") {
  Dataset d = gen_synthetic(SyntheticSpec{3, 3, 30, 2.0}, 0);
  const auto [a, b] = d.split(10);
  CHECK(a.size() == 10);
  CHECK(b.size() == 20);
  CHECK(b.inputs.col(0) == d.inputs.col(10));
  const int idx[] = {5, 2};
  const Dataset s = d.subset(idx);
  CHECK(s.labels[1] == d.labels[2]);
  d.labels[0] = 7;
  CHECK_THROWS_AS(d.validate(), MalformedInput);
}
