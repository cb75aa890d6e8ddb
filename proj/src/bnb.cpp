#include "sprmip/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "sprmip/error.hpp"
#include "sprmip/io.hpp"

namespace sprmip {

void SolverConfig::validate() const {
  if (!(time_limit_seconds > 0.0)) throw ConfigError("solver: time limit must be > 0");
  if (!(abs_gap >= 0.0) || !(rel_gap >= 0.0)) {
    throw ConfigError("solver: gaps must be non-negative");
  }
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kFeasibleTimeout: return "feasible-timeout";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kNoIncumbentTimeout: return "no-incumbent-timeout";
  }
  return "unknown";
}

std::string format_trace(std::span<const TraceEntry> trace) {
  std::ostringstream out;
  for (const TraceEntry& t : trace) {
    out << t.node << ' ' << t.depth << ' ' << format_double(t.node_bound) << ' '
        << format_double(t.global_bound) << ' '
        << (t.incumbent ? format_double(*t.incumbent) : std::string("-")) << '\n';
  }
  return out.str();
}

namespace {

using Clock = std::chrono::steady_clock;

struct Fixing {
  int binary = 0;
  bool value = false;
};

struct Node {
  std::int64_t id = 0;
  int depth = 0;
  double bound = kInfinity;
  std::vector<Fixing> fixings;
};

struct Link {
  int plus = -1;
  int minus = -1;
};

double objective_value(const MipModel& mip, std::span<const double> point) {
  double v = 0.0;
  for (const LinearTerm& t : mip.objective) v += t.coeff * point[t.var];
  return v;
}

std::optional<HeuristicResult> run_heuristic(const MipModel& mip,
                                             const LinearProgram& relaxed,
                                             std::span<const double> lp_point,
                                             const Mlp& mlp) {
  if (!mip.layout) return std::nullopt;
  const NetworkLayout& layout = *mip.layout;
  if (static_cast<int>(layout.inputs.size()) != mlp.input_dim() ||
      lp_point.size() != mip.vars.size()) {
    throw MalformedInput("primal_heuristic: model and network disagree");
  }
  Eigen::VectorXd x(mlp.input_dim());
  for (int i = 0; i < mlp.input_dim(); ++i) {
    const MipVariable& v = mip.vars[layout.inputs[i]];
    x(i) = std::clamp(lp_point[layout.inputs[i]], v.lower, v.upper);
  }
  const ForwardResult fw = forward(mlp, x);
  HeuristicResult out;
  out.point.assign(mip.vars.size(), 0.0);
  for (int i = 0; i < mlp.input_dim(); ++i) out.point[layout.inputs[i]] = x(i);
  for (std::size_t l = 0; l < layout.hidden.size(); ++l) {
    for (std::size_t j = 0; j < layout.hidden[l].size(); ++j) {
      const NeuronVars& nv = layout.hidden[l][j];
      const double pre = fw.preacts[l](static_cast<Eigen::Index>(j));
      out.point[nv.plus] = std::max(pre, 0.0);
      out.point[nv.minus] = std::max(-pre, 0.0);
      if (nv.binary >= 0) out.point[nv.binary] = pre > 0.0 ? 1.0 : 0.0;
    }
  }
  for (std::size_t c = 0; c < layout.outputs.size(); ++c) {
    out.point[layout.outputs[c]] = fw.logits(static_cast<Eigen::Index>(c));
  }
  if (!check_feasible(relaxed, out.point, kFeasibilityTol)) return std::nullopt;
  out.objective = objective_value(mip, out.point);
  return out;
}

}  // namespace

std::optional<HeuristicResult> primal_heuristic(const MipModel& mip,
                                                std::span<const double> lp_point,
                                                const Mlp& mlp) {
  return run_heuristic(mip, mip.relaxation(), lp_point, mlp);
}

SolveReport solve(const MipModel& mip, const SolverConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(Clock::now() - start).count();
  };
  const double sign = mip.sense == Sense::kMaximize ? 1.0 : -1.0;
  const LinearProgram base = mip.relaxation();
  base.validate();

  std::map<int, Link> links;
  if (mip.layout) {
    for (const auto& layer : mip.layout->hidden) {
      for (const NeuronVars& nv : layer) {
        if (nv.binary >= 0) links[nv.binary] = {nv.plus, nv.minus};
      }
    }
  }
  const std::vector<int> binaries = mip.binary_columns();

  SolveReport report;
  // Internally everything is a maximisation of sign * objective.
  std::optional<double> incumbent;
  std::vector<double> incumbent_point;
  auto gap = [&](double inc) { return std::max(cfg.abs_gap, cfg.rel_gap * std::abs(inc)); };
  auto offer = [&](double value, std::vector<double> point) {
    if (!incumbent || value > *incumbent) {
      incumbent = value;
      incumbent_point = std::move(point);
    }
  };

  std::map<std::int64_t, Node> open;                  // by id
  std::set<std::pair<double, std::int64_t>> by_bound;  // (-bound, id)
  double pruned_bound = -kInfinity;
  std::int64_t next_id = 0;
  auto push = [&](Node node) {
    node.id = next_id++;
    by_bound.insert({-node.bound, node.id});
    open.emplace(node.id, std::move(node));
  };
  auto global_bound = [&] {
    double b = pruned_bound;
    if (!by_bound.empty()) b = std::max(b, -by_bound.begin()->first);
    if (incumbent) b = std::max(b, *incumbent);
    return b;
  };

  push(Node{});
  bool timed_out = false;
  LinearProgram lp = base;
  while (!open.empty()) {
    if (elapsed() >= cfg.time_limit_seconds) {
      timed_out = true;
      break;
    }
    if (incumbent && global_bound() <= *incumbent + gap(*incumbent)) {
      // Every open node is within the gap of the incumbent.
      for (const auto& [key, id] : by_bound) pruned_bound = std::max(pruned_bound, -key);
      open.clear();
      by_bound.clear();
      break;
    }
    const bool dive = cfg.node_selection == NodeSelection::kDepthFirstDive || !incumbent;
    const std::int64_t id = dive ? open.rbegin()->first : by_bound.begin()->second;
    Node node = std::move(open.at(id));
    open.erase(id);
    by_bound.erase({-node.bound, id});

    if (incumbent && node.bound <= *incumbent + gap(*incumbent)) {
      pruned_bound = std::max(pruned_bound, node.bound);
      continue;
    }

    ++report.nodes;
    lp.lower = base.lower;
    lp.upper = base.upper;
    for (const Fixing& f : node.fixings) {
      lp.lower[f.binary] = f.value ? 1.0 : 0.0;
      lp.upper[f.binary] = f.value ? 1.0 : 0.0;
      const auto it = links.find(f.binary);
      if (it != links.end()) {
        if (f.value) {
          lp.upper[it->second.minus] = 0.0;
        } else {
          lp.upper[it->second.plus] = 0.0;
        }
      }
    }
    LpSolution sol;
    try {
      sol = solve_lp(lp);
    } catch (const std::exception& e) {
      throw InternalError("bnb: LP failure at node " + std::to_string(node.id) +
                          " (depth " + std::to_string(node.depth) + "): " + e.what());
    }
    if (sol.status == LpStatus::kUnbounded) {
      throw MalformedInput("bnb: unbounded relaxation at node " + std::to_string(node.id));
    }
    if (sol.status == LpStatus::kInfeasible) {
      if (cfg.record_trace) {
        report.trace.push_back({node.id, node.depth, -sign * kInfinity, sign * global_bound(),
                                incumbent ? std::optional(sign * *incumbent) : std::nullopt});
      }
      continue;
    }
    const double node_obj = std::min(sign * sol.objective, node.bound);

    if (mip.network) {
      if (auto h = run_heuristic(mip, base, sol.primal, *mip.network)) {
        offer(sign * h->objective, std::move(h->point));
      }
    }

    int branch = -1;
    double best_frac = kIntegralityTol;
    for (int b : binaries) {
      const double v = sol.primal[b];
      const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      if (frac > best_frac) {
        best_frac = frac;
        branch = b;
      }
    }
    if (branch < 0 && !mip.network) {
      std::vector<double> point = sol.primal;
      for (int b : binaries) point[b] = std::round(point[b]);
      if (check_feasible(base, point, kFeasibilityTol)) {
        const double value = sign * objective_value(mip, point);
        offer(value, std::move(point));
      }
    }
    const bool prunable = incumbent && node_obj <= *incumbent + gap(*incumbent);
    if (branch < 0 && !prunable) {
      // Integral within tolerance but the bound is still open: split on any
      // residual fractionality.
      best_frac = 0.0;
      for (int b : binaries) {
        const double v = sol.primal[b];
        const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
        if (frac > best_frac) {
          best_frac = frac;
          branch = b;
        }
      }
    }
    if (cfg.record_trace) {
      report.trace.push_back({node.id, node.depth, sign * node_obj, 0.0,
                              incumbent ? std::optional(sign * *incumbent) : std::nullopt});
    }

    if (branch >= 0 && !prunable) {
      const bool up_first = sol.primal[branch] >= 0.5;
      // The child pushed last is popped first while diving.
      for (bool value : {!up_first, up_first}) {
        Node child;
        child.depth = node.depth + 1;
        child.bound = node_obj;
        child.fixings = node.fixings;
        child.fixings.push_back({branch, value});
        push(std::move(child));
      }
    } else {
      pruned_bound = std::max(pruned_bound, node_obj);
    }
    if (cfg.record_trace) report.trace.back().global_bound = sign * global_bound();
  }

  report.wall_seconds = elapsed();
  if (incumbent) {
    report.incumbent_obj = sign * *incumbent;
    report.incumbent_point = std::move(incumbent_point);
  }
  const double bound = global_bound();
  report.best_bound = sign * bound;
  if (timed_out) {
    report.status = incumbent ? SolveStatus::kFeasibleTimeout
                              : SolveStatus::kNoIncumbentTimeout;
  } else {
    report.status = incumbent ? SolveStatus::kOptimal : SolveStatus::kInfeasible;
    if (!incumbent) report.best_bound = -sign * kInfinity;
  }
  return report;
}

double brute_force_verify(const Mlp& mlp, const InputBox& box, int true_class,
                          int target_class, int max_unstable) {
  const BoundsTable bounds = interval_bounds(mlp, box);
  const int classes = mlp.output_dim();
  if (true_class < 0 || true_class >= classes || target_class < 0 ||
      target_class >= classes || true_class == target_class) {
    throw MalformedInput("brute_force_verify: need distinct valid classes");
  }
  std::vector<std::pair<int, int>> unstable;
  for (int l = 0; l < static_cast<int>(bounds.layers.size()); ++l) {
    for (int j = 0; j < static_cast<int>(bounds.layers[l].size()); ++j) {
      if (bounds.layers[l][j].unstable()) unstable.emplace_back(l, j);
    }
  }
  if (static_cast<int>(unstable.size()) > max_unstable) {
    throw BudgetExceeded("brute_force_verify: " + std::to_string(unstable.size()) +
                         " unstable neurons exceed the budget of " +
                         std::to_string(max_unstable));
  }
  const int d = mlp.input_dim();
  double best = -kInfinity;
  const std::uint64_t patterns = std::uint64_t{1} << unstable.size();
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    std::vector<std::vector<bool>> on;
    for (const auto& layer : bounds.layers) {
      std::vector<bool> row;
      for (const NeuronBounds& b : layer) row.push_back(b.stably_active());
      on.push_back(std::move(row));
    }
    for (std::size_t u = 0; u < unstable.size(); ++u) {
      on[unstable[u].first][unstable[u].second] = (mask >> u) & 1U;
    }
    LinearProgram lp;
    lp.sense = Sense::kMaximize;
    for (int i = 0; i < d; ++i) lp.add_variable(box.lower[i], box.upper[i]);
    // Activations as affine maps of the input: act = coef * x + off.
    Eigen::MatrixXd coef = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd off = Eigen::VectorXd::Zero(d);
    for (int l = 0; l < mlp.num_hidden_layers(); ++l) {
      const Layer& layer = mlp.layer(l);
      Eigen::MatrixXd pre_coef = layer.weights * coef;
      Eigen::VectorXd pre_off = layer.weights * off + layer.bias;
      for (int j = 0; j < layer.rows(); ++j) {
        std::vector<LinearTerm> terms;
        for (int i = 0; i < d; ++i) {
          if (pre_coef(j, i) != 0.0) terms.push_back({i, pre_coef(j, i)});
        }
        if (on[l][j]) {
          lp.add_constraint(std::move(terms), Relation::kGreaterEqual, -pre_off(j));
        } else {
          lp.add_constraint(std::move(terms), Relation::kLessEqual, -pre_off(j));
          pre_coef.row(j).setZero();
          pre_off(j) = 0.0;
        }
      }
      coef = std::move(pre_coef);
      off = std::move(pre_off);
    }
    const Layer& out = mlp.layers().back();
    const Eigen::RowVectorXd diff = out.weights.row(target_class) - out.weights.row(true_class);
    const Eigen::RowVectorXd obj = diff * coef;
    for (int i = 0; i < d; ++i) lp.objective[i] = obj(i);
    const double constant = diff.dot(off) + out.bias(target_class) - out.bias(true_class);
    const LpSolution sol = solve_lp(lp);
    if (sol.status == LpStatus::kOptimal) best = std::max(best, sol.objective + constant);
  }
  return best;
}

}  // namespace sprmip
