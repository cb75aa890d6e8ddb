#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sprmip/mlp.hpp"
#include "sprmip/spr.hpp"

namespace sprmip {

inline constexpr double kDefaultPruneThreshold = 1e-3;
// Allowed validation-accuracy drop for grid selection (fraction, 0.5 pt).
inline constexpr double kDefaultAccuracyFloor = 0.005;

struct PruneReport {
  std::vector<int> kept;     // per hidden layer
  std::vector<int> removed;  // per hidden layer
  std::vector<std::vector<int>> removed_neurons;  // original indices per layer
  std::string pruned_arch;
  double threshold = 0.0;
  std::optional<double> accuracy_before;
  std::optional<double> accuracy_after;

  int total_removed() const;
  int total_kept() const;
};

// Drops hidden neurons flagged false in `keep` (one mask per hidden layer):
// row of (W, b) in its own layer and the matching column downstream.
Mlp compact(const Mlp& mlp, const std::vector<std::vector<bool>>& keep);

// Removes hidden neuron j iff max(|row j| U |b_j|) < tau. Throws
// OverPrunedLayer when a hidden layer would become empty.
std::pair<Mlp, PruneReport> threshold_prune(const Mlp& mlp, double tau);

// Plain SGD for `epochs` epochs; refuses configs carrying a regularizer.
Mlp fine_tune(const Mlp& mlp, const Dataset& data, int epochs,
              const TrainConfig& cfg);

struct PipelineOptions {
  double tau = kDefaultPruneThreshold;
  double accuracy_floor = kDefaultAccuracyFloor;
  int fine_tune_epochs = 10;
};

struct GridEntry {
  SprConfig spr;
  double tau = 0.0;
  std::string pruned_arch;
  double accuracy = 0.0;
  int neurons_removed = 0;
  int hidden_remaining = 0;
  std::string error;  // non-empty when the run failed (e.g. over-pruned)
};

struct PipelineResult {
  Mlp best;
  PruneReport report;
  std::vector<GridEntry> log;
  Mlp baseline;
  double baseline_accuracy = 0.0;
  int selected = -1;  // index into log
  bool floor_met = false;
};

// Baseline training, then for each grid point: SPR training -> threshold
// prune -> fine-tune -> validation accuracy. Picks the candidate with the
// fewest hidden neurons whose accuracy is within `accuracy_floor` of the
// baseline (ties: higher accuracy, then grid order); if none qualifies, the
// most accurate candidate is returned with floor_met = false.
PipelineResult prune_pipeline(std::span<const int> arch, const Dataset& train,
                              const Dataset& validation,
                              std::span<const SprConfig> grid,
                              const TrainConfig& base,
                              const PipelineOptions& opts = {});

// The default 3x3 grid: lambda in {0.1, 0.5, 1.0} x alpha in {0.1, 0.5, 0.9}.
std::vector<SprConfig> default_grid(double m = 1.0);

// CSV with header lambda,alpha,M,tau,pruned_arch,accuracy,neurons_removed.
std::string grid_log_csv(std::span<const GridEntry> log);

}  // namespace sprmip
