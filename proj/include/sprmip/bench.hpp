#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sprmip/bnb.hpp"
#include "sprmip/mlp.hpp"
#include "sprmip/prune.hpp"
#include "sprmip/verify.hpp"

namespace sprmip {

// A baseline net and its SPR-pruned counterpart trained from the same seed
// and data.
struct MatchedPair {
  std::vector<int> arch;
  std::uint64_t seed = 0;
  Mlp baseline;
  double baseline_accuracy = 0.0;
  Mlp pruned;
  double pruned_accuracy = 0.0;
  SprConfig spr;
  std::string pruned_arch;
  bool floor_met = false;
  std::vector<GridEntry> grid_log;
};

MatchedPair train_pair(std::span<const int> arch, const Dataset& train,
                       const Dataset& validation, std::span<const SprConfig> grid,
                       const TrainConfig& base, const PipelineOptions& prune = {});

// Index of the first sample at or after `start` that every net classifies
// correctly, or -1.
int first_common_correct(std::span<const Mlp* const> nets, const Dataset& data,
                         int start = 0);

struct VerifySettings {
  double delta = 5.0;
  DeltaUnits units = DeltaUnits::kScaled;
  bool clamp = false;
  BoundsMode bounds = BoundsMode::kObbt;
  SolverConfig solver;
};

struct PairVerdicts {
  int sample = -1;
  Verdict baseline;
  Verdict pruned;
  // Whether the pruned net's counterexample also fools the baseline.
  std::optional<bool> transfer;
};

// Verifies both nets of the pair on the same clean sample.
PairVerdicts verify_pair(const MatchedPair& pair, const Dataset& data, int sample,
                         const VerifySettings& settings);

// "YES" for a counterexample, "NO" for a timeout, "-" when proven robust.
std::string found_label(Outcome outcome);

const char* to_string(DeltaUnits units);

// One row of the results table; the CSV columns are fixed.
struct BenchRow {
  std::string arch;
  std::string lambda_alpha;  // "-" for baseline rows
  double accuracy = 0.0;
  double time_s = 0.0;
  std::int64_t nodes = 0;
  std::string pruned_arch;  // empty for baseline rows
  std::string found;

  // Not part of the CSV; kept in the detail log.
  double delta = 0.0;
  std::string units;
  int repetition = 0;
  std::uint64_t seed = 0;
  int sample = -1;
  std::string outcome;
  std::optional<bool> transfer;
  std::string error;
};

std::string bench_csv(std::span<const BenchRow> rows);
nlohmann::json bench_rows_json(std::span<const BenchRow> rows);

struct BenchOptions {
  std::vector<std::vector<int>> archs;
  std::vector<double> deltas{5.0};
  std::vector<DeltaUnits> units{DeltaUnits::kScaled};
  int repetitions = 3;
  std::uint64_t seed = 0;
  TrainConfig train;
  std::vector<SprConfig> grid = default_grid();
  PipelineOptions prune;
  VerifySettings verify;  // delta and units are taken from the lists above
};

// For every arch and repetition: train a matched pair (seed + repetition),
// pick the first test sample both classify correctly, then verify both nets
// at every (delta, units) combination. Rows come out in (arch, repetition,
// delta, units, baseline/pruned) order. Failures are recorded in the row and the run continues.
std::vector<BenchRow> run_bench(const BenchOptions& opts, const Dataset& train,
                                const Dataset& validation, const Dataset& test,
                                const std::function<void(const BenchRow&)>& progress = {});

}  // namespace sprmip
