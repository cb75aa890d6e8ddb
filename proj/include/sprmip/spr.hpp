#pragma once

#include <span>
#include <vector>

namespace sprmip {

class Mlp;
struct Dataset;

struct SprConfig {
  double lambda = 0.0;
  double alpha = 0.5;
  double m = 1.0;

  // alpha in (0,1), m > 0, lambda >= 0; throws ConfigError otherwise.
  void validate() const;
};

enum class SprCase { kA, kB, kC };

// Which branch of the piecewise definition is active for W.
SprCase spr_case(std::span<const double> w, double alpha, double m);

// Structured Perspective Regularization term z(W; alpha, M) for one group of
// weights W:
//
//   2 sqrt((1-a) a) |W|_2                       if |W|_inf/M <= s |W|_2 <= 1
//   (a M / |W|_inf) |W|_2^2 + (1-a) |W|_inf/M   if s |W|_2 <= |W|_inf/M <= 1
//   a |W|_2^2 + (1-a)                           otherwise
//
// with s = sqrt(a / (1-a)). W = 0 lands in the first case with value 0.
double spr_value(std::span<const double> w, double alpha, double m);

// Gradient of the active branch. The |W|_inf part uses the subgradient on the
// first coordinate of maximal magnitude, carrying its sign. Zero at W = 0.
std::vector<double> spr_grad(std::span<const double> w, double alpha, double m);

// Sum of spr_value over every hidden neuron's incoming row with its bias
// appended. Output-layer neurons are not part of any group.
double spr_penalty(const Mlp& mlp, const SprConfig& cfg);

// Mean cross-entropy over `data` plus lambda * spr_penalty.
double regularized_loss(const Mlp& mlp, const Dataset& data,
                        const SprConfig& cfg);

}  // namespace sprmip
