#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sprmip/arch.hpp"
#include "sprmip/data.hpp"
#include "sprmip/error.hpp"
#include "sprmip/prune.hpp"

using namespace sprmip;

namespace {

Mlp with_zero_neurons(const Mlp& base, const std::vector<std::pair<int, int>>& zeros) {
  std::vector<Layer> layers = base.layers();
  for (const auto& [l, j] : zeros) {
    layers[l].weights.row(j).setZero();
    layers[l].bias(j) = 0.0;
  }
  return Mlp(std::move(layers));
}

double max_output_diff(const Mlp& a, const Mlp& b, std::mt19937_64& rng, int samples) {
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Eigen::VectorXd x = testing::random_vector(rng, a.input_dim(), -2.0, 2.0);
    worst = std::max(worst, (logits(a, x) - logits(b, x)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST_CASE("exact-zero neurons are removed without changing outputs") {
  const std::vector<int> hidden{6, 5};
  const Mlp base = init_mlp(4, hidden, 3, 1);
  const Mlp net = with_zero_neurons(base, {{0, 1}, {0, 4}, {1, 2}});
  const auto [pruned, report] = threshold_prune(net, 1e-9);
  CHECK(report.total_removed() == 3);
  CHECK(report.pruned_arch == "2x4");
  CHECK(pruned.hidden_widths() == std::vector<int>{4, 4});
  CHECK(report.removed_neurons[0] == std::vector<int>{1, 4});
  std::mt19937_64 rng(2);
  CHECK(max_output_diff(net, pruned, rng, 1000) <= 1e-12);
}

TEST_CASE("tau = 0 returns the network unchanged") {
  const std::vector<int> hidden{5, 5};
  const Mlp net = init_mlp(3, hidden, 2, 4);
  const auto [pruned, report] = threshold_prune(net, 0.0);
  CHECK(pruned == net);
  CHECK(report.total_removed() == 0);
  CHECK(report.threshold == 0.0);
  CHECK_THROWS_AS(threshold_prune(net, -1.0), ConfigError);
}

TEST_CASE("hand-built 1x4 net: two small neurons go, deviation is bounded") {
  Layer h{(Eigen::MatrixXd(4, 3) << 0.5, -0.2, 0.1, 1e-5, -2e-6, 0.0, 0.3, 0.1, -0.1, 1e-6,
           1e-7, -1e-6)
              .finished(),
          (Eigen::VectorXd(4) << 0.0, 3e-6, 0.05, 0.0).finished()};
  Layer o{(Eigen::MatrixXd(2, 4) << 1.0, 0.7, -1.0, -0.4, 0.5, -0.9, 1.0, 0.3).finished(),
          Eigen::VectorXd::Zero(2)};
  const Mlp net({h, o});
  const auto [pruned, report] = threshold_prune(net, 1e-3);
  CHECK(report.removed[0] == 2);
  CHECK(report.kept[0] == 2);
  CHECK(report.pruned_arch == "1x2");
  CHECK(report.removed_neurons[0] == std::vector<int>{1, 3});

  std::mt19937_64 rng(3);
  double max_act = 0.0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd x = testing::random_vector(rng, 3, 0.0, 1.0);
    const ForwardResult f = forward(net, x);
    max_act = std::max({max_act, std::max(f.preacts[0](1), 0.0), std::max(f.preacts[0](3), 0.0)});
    worst = std::max(worst, (f.logits - logits(pruned, x)).cwiseAbs().maxCoeff());
  }
  const double out_weight = (0.7 + 0.9) + (0.4 + 0.3);
  CHECK(worst <= out_weight * max_act + 1e-15);
}

TEST_CASE("emptying a layer is refused") {
  const std::vector<int> hidden{3, 2};
  const Mlp base = init_mlp(2, hidden, 2, 5);
  const Mlp net = with_zero_neurons(base, {{1, 0}, {1, 1}});
  try {
    threshold_prune(net, 1e-3);
    FAIL("expected over-pruned layer");
  } catch (const OverPrunedLayer& e) {
    CHECK(e.layer() == 1);
  }
}

TEST_CASE("compaction equals forcing pruned activations to zero") {
  std::mt19937_64 rng(6);
  std::bernoulli_distribution keep_bit(0.6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<int> hidden{5, 4, 6};
    const Mlp net = init_mlp(3, hidden, 3, static_cast<std::uint64_t>(trial));
    std::vector<std::vector<bool>> keep;
    for (int w : hidden) {
      std::vector<bool> mask(static_cast<std::size_t>(w));
      for (std::size_t j = 0; j < mask.size(); ++j) mask[j] = keep_bit(rng);
      mask[static_cast<std::size_t>(trial) % mask.size()] = true;
      keep.push_back(mask);
    }
    const Mlp small = compact(net, keep);
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd x = testing::random_vector(rng, 3, -1.0, 1.0);
      const auto ref = testing::naive_logits(
          net, std::vector<double>(x.data(), x.data() + x.size()), &keep);
      const Eigen::VectorXd y = logits(small, x);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(y(c) - ref[c]) <= 1e-9);
    }
    std::vector<int> widths;
    for (const auto& m : keep) widths.push_back(static_cast<int>(std::count(m.begin(), m.end(), true)));
    CHECK(parse_arch(format_arch(widths)) == small.hidden_widths());
  }
}

TEST_CASE("removed set grows with tau") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Layer> layers = init_mlp(3, std::vector<int>{12, 12}, 2, trial).layers();
    // Spread neuron magnitudes over several decades.
    for (int l = 0; l < 2; ++l) {
      for (int j = 0; j < 12; ++j) {
        const double s = std::pow(10.0, -4.0 * (0.5 + 0.5 * u(rng)));
        layers[l].weights.row(j) *= s;
        layers[l].bias(j) *= s;
      }
      layers[l].weights.row(0).setConstant(1.0);
    }
    const Mlp net(std::move(layers));
    std::vector<std::vector<int>> prev(2);
    for (double tau : {1e-5, 1e-4, 1e-3, 1e-2}) {
      const auto [pruned, report] = threshold_prune(net, tau);
      for (int l = 0; l < 2; ++l) {
        for (int j : prev[l]) {
          CHECK(std::find(report.removed_neurons[l].begin(), report.removed_neurons[l].end(), j) !=
                report.removed_neurons[l].end());
        }
        CHECK(report.kept[l] + report.removed[l] == 12);
      }
      CHECK(parse_arch(report.pruned_arch) == pruned.hidden_widths());
      prev = report.removed_neurons;
    }
  }
}

TEST_CASE("fine_tune identities and regularizer refusal") {
  const Dataset d = gen_synthetic(SyntheticSpec{}, 3);
  const Mlp net = init_mlp(2, std::vector<int>{4}, 2, 1);
  TrainConfig cfg;
  cfg.batch_size = 16;
  CHECK(fine_tune(net, d, 0, cfg) == net);
  cfg.learning_rate = 0.0;
  CHECK(fine_tune(net, d, 5, cfg) == net);
  cfg.regularizer = SprConfig{0.1, 0.5, 1.0};
  CHECK_THROWS_AS(fine_tune(net, d, 5, cfg), ConfigError);
}

TEST_CASE("fine-tuning a pruned net does not lose accuracy") {
  SyntheticSpec spec;
  spec.samples = 400;
  spec.margin = 5.0;
  const Dataset d = gen_synthetic(spec, 10);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.seed = 2;
  cfg.regularizer = SprConfig{0.1, 0.5, 1.0};
  const TrainResult r = sgd_train(init_mlp(2, std::vector<int>{16}, 2, 2), d, cfg);
  const auto [pruned, report] = threshold_prune(r.mlp, kDefaultPruneThreshold);
  CHECK(report.total_removed() > 0);
  TrainConfig plain = cfg;
  plain.regularizer.reset();
  const Mlp tuned = fine_tune(pruned, d, 10, plain);
  CHECK(accuracy(tuned, d) >= accuracy(pruned, d) - 0.01);
}

TEST_CASE("pipeline with lambda = 0 degenerates to plain training") {
  const Dataset all = gen_synthetic(SyntheticSpec{2, 2, 300, 5.0}, 4);
  const auto [train, val] = all.split(200);
  TrainConfig base;
  base.epochs = 10;
  base.batch_size = 16;
  base.seed = 7;
  const SprConfig grid[] = {SprConfig{0.0, 0.5, 1.0}};
  PipelineOptions opts;
  opts.fine_tune_epochs = 0;
  const std::vector<int> arch{8};
  const PipelineResult r = prune_pipeline(arch, train, val, grid, base, opts);
  REQUIRE(r.selected == 0);
  CHECK(r.report.total_removed() == 0);
  CHECK(r.best == r.baseline);
  CHECK(r.floor_met);
}

TEST_CASE("pipeline on separable data selects a strictly smaller net") {
  const Dataset all = gen_synthetic(SyntheticSpec{2, 2, 600, 6.0}, 11);
  const auto [train, val] = all.split(400);
  TrainConfig base;
  base.epochs = 20;
  base.batch_size = 32;
  base.seed = 1;
  const std::vector<int> arch{16};
  const auto grid = default_grid();
  const PipelineResult r = prune_pipeline(arch, train, val, grid, base);
  REQUIRE(r.log.size() == 9);
  REQUIRE(r.selected >= 0);
  CHECK(r.best.total_hidden() < 16);
  CHECK(accuracy(r.best, val) >= r.baseline_accuracy - 0.01);
  CHECK(r.floor_met);
  const std::string csv = grid_log_csv(r.log);
  CHECK(csv.rfind("lambda,alpha,M,tau,pruned_arch,accuracy,neurons_removed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  for (const GridEntry& e : r.log) {
    if (e.error.empty()) CHECK(format_arch(parse_arch(e.pruned_arch)) == e.pruned_arch);
  }
}

TEST_CASE("architecture strings") {
  CHECK(parse_arch("2x50") == std::vector<int>{50, 50});
  CHECK(parse_arch("2x20-3x10") == std::vector<int>{20, 20, 10, 10, 10});
  CHECK_THROWS_AS(parse_arch("0x10"), MalformedInput);
  CHECK_THROWS_AS(parse_arch(""), MalformedInput);
  CHECK_THROWS_AS(parse_arch("2x"), MalformedInput);
  CHECK_THROWS_AS(parse_arch("2x10-"), MalformedInput);
  CHECK_THROWS_AS(parse_arch("2x10x3"), MalformedInput);
  CHECK(format_arch(parse_arch("1x39-1x43")) == "1x39-1x43");
  CHECK(format_arch(parse_arch("1x5-1x5-2x3")) == "2x5-2x3");
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> w(1, 4);
  for (int i = 0; i < 200; ++i) {
    std::vector<int> widths(static_cast<std::size_t>(w(rng)));
    for (int& v : widths) v = w(rng);
    const std::string s = format_arch(widths);
    CHECK(parse_arch(s) == widths);
    CHECK(format_arch(parse_arch(s)) == s);
  }
}
