#include "sprmip/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sprmip/error.hpp"

namespace sprmip {

int LinearProgram::add_variable(double lo, double hi, double obj) {
  lower.push_back(lo);
  upper.push_back(hi);
  objective.push_back(obj);
  return num_vars++;
}

void LinearProgram::add_constraint(std::vector<LinearTerm> terms, Relation rel,
                                   double rhs) {
  constraints.push_back({std::move(terms), rel, rhs});
}

void LinearProgram::validate() const {
  const auto n = static_cast<std::size_t>(num_vars);
  if (num_vars < 0 || objective.size() != n || lower.size() != n ||
      upper.size() != n) {
    throw MalformedInput("linear program: per-variable arrays must have length num_vars");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j] ||
        lower[j] == kInfinity || upper[j] == -kInfinity) {
      throw MalformedInput("linear program: invalid bounds on variable " +
                           std::to_string(j));
    }
    if (!std::isfinite(objective[j])) {
      throw MalformedInput("linear program: non-finite objective coefficient");
    }
  }
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    for (const LinearTerm& t : constraints[i].terms) {
      if (t.var < 0 || t.var >= num_vars) {
        throw MalformedInput("linear program: row " + std::to_string(i) +
                             " references column " + std::to_string(t.var) +
                             " outside [0, num_vars)");
      }
      if (!std::isfinite(t.coeff)) {
        throw MalformedInput("linear program: non-finite coefficient");
      }
    }
    if (!std::isfinite(constraints[i].rhs)) {
      throw MalformedInput("linear program: non-finite right-hand side");
    }
  }
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

namespace {

enum class VarState : unsigned char { kBasic, kAtLower, kAtUpper, kFreeZero };

// Column layout: [structural | slack | artificial]. Rows are kept as
// T = B^-1 A with basic values stored separately in beta_.
class Simplex {
 public:
  explicit Simplex(const LinearProgram& lp);
  LpSolution run();

 private:
  enum class PhaseResult { kOptimal, kUnbounded };

  double& at(int i, int j) { return tab_[static_cast<std::size_t>(i) * ncols_ + j]; }
  double at(int i, int j) const { return tab_[static_cast<std::size_t>(i) * ncols_ + j]; }
  bool is_artificial(int j) const { return j >= art_begin_; }
  bool is_fixed(int j) const { return lo_[j] == hi_[j]; }

  PhaseResult iterate();
  int choose_entering(bool bland) const;
  void pivot(int r, int q);
  void price();
  void refresh_basic_values();
  void drive_out_artificials();

  const LinearProgram& lp_;
  int m_ = 0;
  int n_ = 0;
  int ncols_ = 0;
  int art_begin_ = 0;
  std::vector<double> tab_;
  std::vector<double> orig_;  // original augmented A, for refreshes
  std::vector<double> rhs_;
  std::vector<double> sigma_;
  std::vector<double> lo_, hi_, cost_, reduced_;
  std::vector<double> x_;      // nonbasic values
  std::vector<double> beta_;   // basic values by row
  std::vector<int> basis_;     // row -> column
  std::vector<int> row_of_;    // column -> row or -1
  std::vector<VarState> state_;
  int iterations_ = 0;
  int iteration_cap_ = 0;
};

Simplex::Simplex(const LinearProgram& lp) : lp_(lp) {
  m_ = static_cast<int>(lp.constraints.size());
  n_ = lp.num_vars;
  int slacks = 0;
  for (const Constraint& c : lp.constraints) {
    if (c.relation != Relation::kEqual) ++slacks;
  }
  art_begin_ = n_ + slacks;
  ncols_ = art_begin_ + m_;
  tab_.assign(static_cast<std::size_t>(m_) * ncols_, 0.0);
  rhs_.resize(m_);
  lo_.assign(ncols_, 0.0);
  hi_.assign(ncols_, kInfinity);
  x_.assign(ncols_, 0.0);
  state_.assign(ncols_, VarState::kAtLower);
  for (int j = 0; j < n_; ++j) {
    lo_[j] = lp.lower[j];
    hi_[j] = lp.upper[j];
    if (std::isfinite(lo_[j])) {
      x_[j] = lo_[j];
      state_[j] = VarState::kAtLower;
    } else if (std::isfinite(hi_[j])) {
      x_[j] = hi_[j];
      state_[j] = VarState::kAtUpper;
    } else {
      x_[j] = 0.0;
      state_[j] = VarState::kFreeZero;
    }
  }
  int slack = n_;
  for (int i = 0; i < m_; ++i) {
    const Constraint& c = lp.constraints[i];
    for (const LinearTerm& t : c.terms) at(i, t.var) += t.coeff;
    if (c.relation == Relation::kLessEqual) {
      at(i, slack++) = 1.0;
    } else if (c.relation == Relation::kGreaterEqual) {
      at(i, slack++) = -1.0;
    }
    rhs_[i] = c.rhs;
  }

  sigma_.resize(m_);
  beta_.resize(m_);
  basis_.resize(m_);
  row_of_.assign(ncols_, -1);
  for (int i = 0; i < m_; ++i) {
    double r = rhs_[i];
    for (int j = 0; j < art_begin_; ++j) r -= at(i, j) * x_[j];
    sigma_[i] = r >= 0.0 ? 1.0 : -1.0;
    const int a = art_begin_ + i;
    at(i, a) = sigma_[i];
    basis_[i] = a;
    row_of_[a] = i;
    state_[a] = VarState::kBasic;
    beta_[i] = std::abs(r);
  }
  orig_ = tab_;
  for (int i = 0; i < m_; ++i) {
    if (sigma_[i] < 0.0) {
      for (int j = 0; j < ncols_; ++j) at(i, j) = -at(i, j);
    }
  }
  iteration_cap_ = 50 * (ncols_ + m_) + 10000;
}

void Simplex::price() {
  reduced_ = cost_;
  for (int i = 0; i < m_; ++i) {
    const double cb = cost_[basis_[i]];
    if (cb == 0.0) continue;
    for (int j = 0; j < ncols_; ++j) reduced_[j] -= cb * at(i, j);
  }
  for (int i = 0; i < m_; ++i) reduced_[basis_[i]] = 0.0;
}

// beta = B^-1 (b - N x_N), with B^-1 e_k read off the artificial columns.
void Simplex::refresh_basic_values() {
  std::vector<double> w(rhs_);
  for (int k = 0; k < m_; ++k) {
    const double* row = &orig_[static_cast<std::size_t>(k) * ncols_];
    for (int j = 0; j < ncols_; ++j) {
      if (state_[j] != VarState::kBasic && x_[j] != 0.0) w[k] -= row[j] * x_[j];
    }
  }
  for (int i = 0; i < m_; ++i) {
    double v = 0.0;
    for (int k = 0; k < m_; ++k) v += at(i, art_begin_ + k) * sigma_[k] * w[k];
    beta_[i] = v;
  }
}

int Simplex::choose_entering(bool bland) const {
  int best = -1;
  double best_score = 0.0;
  for (int j = 0; j < ncols_; ++j) {
    if (state_[j] == VarState::kBasic || is_fixed(j)) continue;
    const double d = reduced_[j];
    bool eligible = false;
    switch (state_[j]) {
      case VarState::kAtLower: eligible = d < -kOptimalityTol; break;
      case VarState::kAtUpper: eligible = d > kOptimalityTol; break;
      case VarState::kFreeZero: eligible = std::abs(d) > kOptimalityTol; break;
      case VarState::kBasic: break;
    }
    if (!eligible) continue;
    if (bland) return j;
    if (std::abs(d) > best_score) {
      best_score = std::abs(d);
      best = j;
    }
  }
  return best;
}

void Simplex::pivot(int r, int q) {
  const double p = at(r, q);
  double* prow = &tab_[static_cast<std::size_t>(r) * ncols_];
  for (int j = 0; j < ncols_; ++j) prow[j] /= p;
  prow[q] = 1.0;
  for (int i = 0; i < m_; ++i) {
    if (i == r) continue;
    double* row = &tab_[static_cast<std::size_t>(i) * ncols_];
    const double f = row[q];
    if (f == 0.0) continue;
    for (int j = 0; j < ncols_; ++j) row[j] -= f * prow[j];
    row[q] = 0.0;
  }
  const double dq = reduced_[q];
  if (dq != 0.0) {
    for (int j = 0; j < ncols_; ++j) reduced_[j] -= dq * prow[j];
  }
  reduced_[q] = 0.0;
  const int leaving = basis_[r];
  row_of_[leaving] = -1;
  basis_[r] = q;
  row_of_[q] = r;
  state_[q] = VarState::kBasic;
}

Simplex::PhaseResult Simplex::iterate() {
  const int bland_after = 5 * (ncols_ + m_);
  int phase_iterations = 0;
  while (true) {
    if (++iterations_ > iteration_cap_) {
      throw InternalError("simplex: iteration cap exceeded");
    }
    const bool bland = phase_iterations++ >= bland_after;
    const int q = choose_entering(bland);
    if (q < 0) return PhaseResult::kOptimal;

    double dir = 1.0;
    if (state_[q] == VarState::kAtUpper) {
      dir = -1.0;
    } else if (state_[q] == VarState::kFreeZero) {
      dir = reduced_[q] > 0.0 ? -1.0 : 1.0;
    }

    // Ratio test: basic x_B(i) moves at rate -dir * T(i,q).
    double t_min = kInfinity;
    for (int i = 0; i < m_; ++i) {
      const double alpha = at(i, q);
      if (std::abs(alpha) < kPivotTol) continue;
      const int b = basis_[i];
      const double rate = -dir * alpha;
      double t = kInfinity;
      if (rate < 0.0 && std::isfinite(lo_[b])) {
        t = (beta_[i] - lo_[b]) / -rate;
      } else if (rate > 0.0 && std::isfinite(hi_[b])) {
        t = (hi_[b] - beta_[i]) / rate;
      }
      t_min = std::min(t_min, std::max(t, 0.0));
    }
    int leave_row = -1;
    if (std::isfinite(t_min)) {
      double best_alpha = -1.0;
      for (int i = 0; i < m_; ++i) {
        const double alpha = at(i, q);
        if (std::abs(alpha) < kPivotTol) continue;
        const int b = basis_[i];
        const double rate = -dir * alpha;
        double t = kInfinity;
        if (rate < 0.0 && std::isfinite(lo_[b])) {
          t = (beta_[i] - lo_[b]) / -rate;
        } else if (rate > 0.0 && std::isfinite(hi_[b])) {
          t = (hi_[b] - beta_[i]) / rate;
        }
        t = std::max(t, 0.0);
        if (t > t_min + 1e-12) continue;
        if (bland) {
          if (leave_row < 0 || b < basis_[leave_row]) leave_row = i;
        } else if (std::abs(alpha) > best_alpha) {
          best_alpha = std::abs(alpha);
          leave_row = i;
        }
      }
    }
    const double flip = hi_[q] - lo_[q];
    if (std::isfinite(flip) && flip <= t_min) {
      for (int i = 0; i < m_; ++i) beta_[i] -= dir * at(i, q) * flip;
      if (state_[q] == VarState::kAtLower) {
        state_[q] = VarState::kAtUpper;
        x_[q] = hi_[q];
      } else {
        state_[q] = VarState::kAtLower;
        x_[q] = lo_[q];
      }
      continue;
    }
    if (leave_row < 0) return PhaseResult::kUnbounded;

    const double t = t_min;
    for (int i = 0; i < m_; ++i) beta_[i] -= dir * at(i, q) * t;
    const int leaving = basis_[leave_row];
    const double rate = -dir * at(leave_row, q);
    if (rate < 0.0) {
      state_[leaving] = VarState::kAtLower;
      x_[leaving] = lo_[leaving];
    } else {
      state_[leaving] = VarState::kAtUpper;
      x_[leaving] = hi_[leaving];
    }
    const double entering_value = x_[q] + dir * t;
    x_[q] = 0.0;
    pivot(leave_row, q);
    beta_[leave_row] = entering_value;
  }
}

void Simplex::drive_out_artificials() {
  for (int r = 0; r < m_; ++r) {
    if (!is_artificial(basis_[r])) continue;
    int best = -1;
    double best_abs = 1e-7;
    for (int j = 0; j < art_begin_; ++j) {
      if (state_[j] == VarState::kBasic) continue;
      if (std::abs(at(r, j)) > best_abs) {
        best_abs = std::abs(at(r, j));
        best = j;
      }
    }
    if (best < 0) continue;  // redundant row; artificial stays basic at 0
    const int art = basis_[r];
    const double entering_value = x_[best];
    x_[best] = 0.0;
    pivot(r, best);
    state_[art] = VarState::kAtLower;
    x_[art] = 0.0;
    beta_[r] = entering_value;
  }
}

LpSolution Simplex::run() {
  LpSolution out;

  cost_.assign(ncols_, 0.0);
  for (int j = art_begin_; j < ncols_; ++j) cost_[j] = 1.0;
  price();
  iterate();
  refresh_basic_values();
  double infeas = 0.0;
  for (int i = 0; i < m_; ++i) {
    if (is_artificial(basis_[i])) infeas = std::max(infeas, std::abs(beta_[i]));
  }
  if (infeas > kFeasibilityTol) {
    out.status = LpStatus::kInfeasible;
    out.iterations = iterations_;
    return out;
  }
  for (int j = art_begin_; j < ncols_; ++j) {
    hi_[j] = 0.0;
    if (state_[j] != VarState::kBasic) {
      state_[j] = VarState::kAtLower;
      x_[j] = 0.0;
    }
  }
  for (int i = 0; i < m_; ++i) {
    if (is_artificial(basis_[i])) beta_[i] = 0.0;
  }
  drive_out_artificials();

  const double sign = lp_.sense == Sense::kMaximize ? -1.0 : 1.0;
  cost_.assign(ncols_, 0.0);
  for (int j = 0; j < n_; ++j) cost_[j] = sign * lp_.objective[j];
  price();
  if (iterate() == PhaseResult::kUnbounded) {
    out.status = LpStatus::kUnbounded;
    out.iterations = iterations_;
    return out;
  }
  refresh_basic_values();

  out.status = LpStatus::kOptimal;
  out.primal.resize(n_);
  double obj = 0.0;
  for (int j = 0; j < n_; ++j) {
    double v = state_[j] == VarState::kBasic ? beta_[row_of_[j]] : x_[j];
    // Basic values may sit a rounding error outside their box.
    v = std::clamp(v, lo_[j], hi_[j]);
    out.primal[j] = v;
    obj += lp_.objective[j] * v;
  }
  out.objective = obj;
  out.iterations = iterations_;
  return out;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  lp.validate();
  Simplex simplex(lp);
  return simplex.run();
}

bool check_feasible(const LinearProgram& lp, std::span<const double> point,
                    double tol) {
  if (point.size() != static_cast<std::size_t>(lp.num_vars)) {
    throw MalformedInput("check_feasible: point length " +
                         std::to_string(point.size()) + " != num_vars " +
                         std::to_string(lp.num_vars));
  }
  lp.validate();
  for (int j = 0; j < lp.num_vars; ++j) {
    if (!(point[j] >= lp.lower[j] - tol) || !(point[j] <= lp.upper[j] + tol)) {
      return false;
    }
  }
  for (const Constraint& c : lp.constraints) {
    double lhs = 0.0;
    for (const LinearTerm& t : c.terms) lhs += t.coeff * point[t.var];
    switch (c.relation) {
      case Relation::kLessEqual:
        if (!(lhs <= c.rhs + tol)) return false;
        break;
      case Relation::kGreaterEqual:
        if (!(lhs >= c.rhs - tol)) return false;
        break;
      case Relation::kEqual:
        if (!(std::abs(lhs - c.rhs) <= tol)) return false;
        break;
    }
  }
  return true;
}

}  // namespace sprmip
