#include "sprmip/spr.hpp"

#include <cmath>
#include <string>

#include "sprmip/error.hpp"
#include "sprmip/mlp.hpp"

namespace sprmip {

void SprConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("SPR alpha must lie strictly inside (0,1), got " +
                      std::to_string(alpha));
  }
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw ConfigError("SPR M must be positive, got " + std::to_string(m));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("SPR lambda must be non-negative, got " +
                      std::to_string(lambda));
  }
}

namespace {

struct Norms {
  double l2 = 0.0;
  double linf = 0.0;
  std::size_t argmax = 0;  // first index attaining linf
};

Norms norms(std::span<const double> w) {
  Norms n;
  double sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sq += w[i] * w[i];
    if (std::abs(w[i]) > n.linf) {
      n.linf = std::abs(w[i]);
      n.argmax = i;
    }
  }
  n.l2 = std::sqrt(sq);
  return n;
}

void check_params(double alpha, double m) {
  SprConfig{0.0, alpha, m}.validate();
}

SprCase classify(const Norms& n, double alpha, double m) {
  const double s = std::sqrt(alpha / (1.0 - alpha));
  const double scaled_l2 = s * n.l2;
  const double ratio = n.linf / m;
  if (ratio <= scaled_l2 && scaled_l2 <= 1.0) return SprCase::kA;
  if (scaled_l2 <= ratio && ratio <= 1.0) return SprCase::kB;
  return SprCase::kC;
}

}  // namespace

SprCase spr_case(std::span<const double> w, double alpha, double m) {
  check_params(alpha, m);
  return classify(norms(w), alpha, m);
}

double spr_value(std::span<const double> w, double alpha, double m) {
  check_params(alpha, m);
  const Norms n = norms(w);
  switch (classify(n, alpha, m)) {
    case SprCase::kA:
      return 2.0 * std::sqrt((1.0 - alpha) * alpha) * n.l2;
    case SprCase::kB:
      return alpha * m / n.linf * n.l2 * n.l2 + (1.0 - alpha) * n.linf / m;
    case SprCase::kC:
      return alpha * n.l2 * n.l2 + (1.0 - alpha);
  }
  return 0.0;
}

std::vector<double> spr_grad(std::span<const double> w, double alpha,
                             double m) {
  check_params(alpha, m);
  std::vector<double> g(w.size(), 0.0);
  const Norms n = norms(w);
  if (n.linf == 0.0) return g;
  switch (classify(n, alpha, m)) {
    case SprCase::kA: {
      const double c = 2.0 * std::sqrt((1.0 - alpha) * alpha) / n.l2;
      for (std::size_t i = 0; i < w.size(); ++i) g[i] = c * w[i];
      break;
    }
    case SprCase::kB: {
      const double c = 2.0 * alpha * m / n.linf;
      for (std::size_t i = 0; i < w.size(); ++i) g[i] = c * w[i];
      const double d_linf =
          -alpha * m * n.l2 * n.l2 / (n.linf * n.linf) + (1.0 - alpha) / m;
      g[n.argmax] += d_linf * (w[n.argmax] < 0.0 ? -1.0 : 1.0);
      break;
    }
    case SprCase::kC:
      for (std::size_t i = 0; i < w.size(); ++i) g[i] = 2.0 * alpha * w[i];
      break;
  }
  return g;
}

double spr_penalty(const Mlp& mlp, const SprConfig& cfg) {
  cfg.validate();
  double total = 0.0;
  std::vector<double> group;
  for (int l = 0; l < mlp.num_hidden_layers(); ++l) {
    const Layer& layer = mlp.layer(l);
    group.resize(static_cast<std::size_t>(layer.cols()) + 1);
    for (int j = 0; j < layer.rows(); ++j) {
      for (int c = 0; c < layer.cols(); ++c) group[c] = layer.weights(j, c);
      group.back() = layer.bias(j);
      total += spr_value(group, cfg.alpha, cfg.m);
    }
  }
  return total;
}

double regularized_loss(const Mlp& mlp, const Dataset& data,
                        const SprConfig& cfg) {
  cfg.validate();
  const double ce = cross_entropy(mlp, data);
  if (cfg.lambda == 0.0) return ce;
  return ce + cfg.lambda * spr_penalty(mlp, cfg);
}

}  // namespace sprmip
