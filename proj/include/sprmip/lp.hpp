#pragma once

#include <limits>
#include <span>
#include <vector>

namespace sprmip {

// Infinite bounds are always represented by this value, never by a large
// finite number.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline constexpr double kFeasibilityTol = 1e-7;
inline constexpr double kOptimalityTol = 1e-7;
inline constexpr double kPivotTol = 1e-9;

enum class Sense { kMaximize, kMinimize };
enum class Relation { kLessEqual, kEqual, kGreaterEqual };

struct LinearTerm {
  int var = 0;
  double coeff = 0.0;
};

struct Constraint {
  std::vector<LinearTerm> terms;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;
};

struct LinearProgram {
  int num_vars = 0;
  Sense sense = Sense::kMaximize;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Constraint> constraints;

  // Appends a variable and returns its index.
  int add_variable(double lo, double hi, double obj = 0.0);
  void add_constraint(std::vector<LinearTerm> terms, Relation rel, double rhs);

  // Throws MalformedInput when sizes disagree, a row references an unknown
  // column, a bound is NaN, or lower > upper.
  void validate() const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

const char* to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  double objective = 0.0;       // meaningful iff optimal
  std::vector<double> primal;   // meaningful iff optimal
  int iterations = 0;
};

// Two-phase bounded-variable primal simplex on a dense tableau. Dantzig
// pricing, switching to Bland's rule after 5 * (vars + rows) iterations.
// Deterministic and free of shared state.
LpSolution solve_lp(const LinearProgram& lp);

// True iff every bound and constraint holds within `tol` (absolute).
bool check_feasible(const LinearProgram& lp, std::span<const double> point,
                    double tol);

}  // namespace sprmip
