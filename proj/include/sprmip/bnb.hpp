#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sprmip/mip.hpp"
#include "sprmip/mlp.hpp"

namespace sprmip {

inline constexpr double kIntegralityTol = 1e-6;

enum class NodeSelection {
  kBestBound,       // depth-first dive until the first incumbent, then best bound
  kDepthFirstDive,  // depth-first throughout
};

struct SolverConfig {
  double time_limit_seconds = 1800.0;
  double abs_gap = 1e-6;
  double rel_gap = 1e-7;
  NodeSelection node_selection = NodeSelection::kBestBound;
  std::uint64_t seed = 0;  // reserved; the search has no random choices
  bool record_trace = false;

  void validate() const;
};

enum class SolveStatus { kOptimal, kFeasibleTimeout, kInfeasible, kNoIncumbentTimeout };

const char* to_string(SolveStatus status);

struct TraceEntry {
  std::int64_t node = 0;
  int depth = 0;
  double node_bound = 0.0;
  double global_bound = 0.0;
  std::optional<double> incumbent;
};

struct SolveReport {
  SolveStatus status = SolveStatus::kInfeasible;
  std::optional<double> incumbent_obj;
  double best_bound = -kInfinity;
  std::int64_t nodes = 0;
  double wall_seconds = 0.0;
  std::optional<std::vector<double>> incumbent_point;
  // Filled when SolverConfig::record_trace is set.
  std::vector<TraceEntry> trace;
};

// One line per processed node: "node depth node_bound global_bound incumbent".
std::string format_trace(std::span<const TraceEntry> trace);

// Branch-and-bound over the encoder's binaries. Branching on the most
// fractional z (ties: lowest column); fixing z = 1 also fixes v- = 0, fixing
// z = 0 fixes v+ = 0. When the model carries its network, the forward-pass
// heuristic runs at every node with a feasible LP.
SolveReport solve(const MipModel& mip, const SolverConfig& cfg);

struct HeuristicResult {
  std::vector<double> point;
  double objective = 0.0;
};

// Reads the input block of `lp_point`, clips it to the input box, runs the
// network and assembles the exact trace (inputs, v+, v-, z, y). Returns
// nullopt if the trace violates a row the encoder did not emit (e.g. rows
// added by hand).
std::optional<HeuristicResult> primal_heuristic(const MipModel& mip,
                                                std::span<const double> lp_point,
                                                const Mlp& mlp);

// Exact max of y_h - y_k over the box by enumerating every activation pattern
// of the neurons that interval bounds leave unstable and solving one LP over
// the inputs per pattern. Throws BudgetExceeded above `max_unstable`.
double brute_force_verify(const Mlp& mlp, const InputBox& box, int true_class,
                          int target_class, int max_unstable = 20);

}  // namespace sprmip
