#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sprmip/bnb.hpp"
#include "sprmip/error.hpp"

using namespace sprmip;

namespace {

SolverConfig quick(double limit = 60.0) {
  SolverConfig cfg;
  cfg.time_limit_seconds = limit;
  return cfg;
}

struct Instance {
  Mlp mlp;
  Eigen::VectorXd x;
  double delta = 0.0;
  int k = 0;
  int h = 1;
};

Instance random_instance(std::uint64_t seed, std::vector<int> hidden, int dim = 3,
                         int classes = 3, double delta = 0.15) {
  std::mt19937_64 rng(seed * 7919 + 1);
  Instance inst;
  inst.mlp = init_mlp(dim, hidden, classes, seed);
  inst.x = testing::random_vector(rng, dim);
  inst.delta = delta;
  const Eigen::VectorXd y = logits(inst.mlp, inst.x);
  inst.k = argmax(y);
  inst.h = inst.k == 0 ? 1 : 0;
  for (int c = 0; c < classes; ++c) {
    if (c != inst.k && y(c) > y(inst.h)) inst.h = c;
  }
  return inst;
}

double margin_at(const Instance& inst, const Eigen::VectorXd& x) {
  const Eigen::VectorXd y = logits(inst.mlp, x);
  return y(inst.h) - y(inst.k);
}

}  // namespace

TEST_CASE("no binaries: one node, pure LP optimum") {
  // A point box makes every neuron stable.
  const Instance inst = random_instance(1, {4, 4});
  const MipModel mip = encode_adversarial(inst.mlp, inst.x, 0.0, inst.k, inst.h);
  REQUIRE(mip.num_binaries() == 0);
  const SolveReport r = solve(mip, quick());
  CHECK(r.status == SolveStatus::kOptimal);
  CHECK(r.nodes == 1);
  const LpSolution lp = solve_lp(mip.relaxation());
  CHECK(*r.incumbent_obj == doctest::Approx(lp.objective).epsilon(1e-9));
  CHECK(std::abs(*r.incumbent_obj - margin_at(inst, inst.x)) <= 1e-9);
}

TEST_CASE("injected contradiction: infeasible after at least one node") {
  const Instance inst = random_instance(2, {5});
  MipModel mip = encode_adversarial(inst.mlp, inst.x, 0.2, inst.k, inst.h);
  const int x0 = mip.layout->inputs[0];
  mip.add_constraint("contradiction", {{x0, 1.0}}, Relation::kGreaterEqual,
                     mip.vars[x0].upper + 1.0);
  const SolveReport r = solve(mip, quick());
  CHECK(r.status == SolveStatus::kInfeasible);
  CHECK(r.nodes >= 1);
  CHECK_FALSE(r.incumbent_obj.has_value());
}

TEST_CASE("1x3 nets agree with pattern enumeration") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Instance inst = random_instance(seed, {3}, 2, 2, 0.5);
    const InputBox box = InputBox::around(inst.x, inst.delta, false);
    const double oracle = brute_force_verify(inst.mlp, box, inst.k, inst.h);
    const SolveReport r =
        solve(encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h), quick());
    REQUIRE(r.status == SolveStatus::kOptimal);
    CHECK(std::abs(*r.incumbent_obj - oracle) <= 1e-5);
  }
}

TEST_CASE("deeper nets agree with pattern enumeration under both bound modes") {
  int with_binaries = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::vector<int> hidden = seed % 2 == 0 ? std::vector<int>{4, 3} : std::vector<int>{3, 3, 2};
    const Instance inst = random_instance(seed, hidden, 3, 3, 0.2);
    const InputBox box = InputBox::around(inst.x, inst.delta, false);
    double oracle = 0.0;
    try {
      oracle = brute_force_verify(inst.mlp, box, inst.k, inst.h, 10);
    } catch (const BudgetExceeded&) {
      continue;
    }
    for (BoundsMode mode : {BoundsMode::kInterval, BoundsMode::kObbt}) {
      AdversarialOptions opts;
      opts.bounds = mode;
      const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h, opts);
      if (mip.num_binaries() > 0) ++with_binaries;
      const SolveReport r = solve(mip, quick());
      REQUIRE(r.status == SolveStatus::kOptimal);
      CHECK(std::abs(*r.incumbent_obj - oracle) <= 1e-5);
    }
  }
  CHECK(with_binaries > 10);
}

TEST_CASE("optimal reports respect the gap and the bound is valid") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = random_instance(seed + 100, {6, 4}, 3, 3, 0.3);
    SolverConfig cfg = quick();
    cfg.record_trace = true;
    const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h);
    const SolveReport r = solve(mip, cfg);
    REQUIRE(r.status == SolveStatus::kOptimal);
    const double inc = *r.incumbent_obj;
    CHECK(std::abs(r.best_bound - inc) <= cfg.abs_gap + cfg.rel_gap * std::abs(inc) + 1e-12);
    CHECK(r.best_bound >= inc - 1e-9);

    // Bound never increases over the run.
    double prev = kInfinity;
    for (const TraceEntry& t : r.trace) {
      CHECK(t.global_bound <= prev + 1e-12);
      prev = t.global_bound;
    }
    CHECK(static_cast<std::int64_t>(r.trace.size()) == r.nodes);

    // Incumbent is feasible and its decoded input reproduces the objective.
    REQUIRE(r.incumbent_point.has_value());
    CHECK(check_feasible(mip.relaxation(), *r.incumbent_point, 1e-7));
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = (*r.incumbent_point)[mip.layout->inputs[i]];
    CHECK(std::abs(margin_at(inst, x) - inc) <= 1e-6);
  }
}

TEST_CASE("solves are deterministic") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = random_instance(seed + 200, {8, 6}, 4, 3, 0.25);
    const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h);
    const SolveReport a = solve(mip, quick());
    const SolveReport b = solve(mip, quick());
    CHECK(a.nodes == b.nodes);
    CHECK(a.status == b.status);
    CHECK(a.incumbent_obj == b.incumbent_obj);
    CHECK(a.best_bound == b.best_bound);
  }
}

TEST_CASE("depth-first selection reaches the same optimum") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = random_instance(seed + 300, {5, 4}, 3, 3, 0.3);
    const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h);
    SolverConfig dfs = quick();
    dfs.node_selection = NodeSelection::kDepthFirstDive;
    const SolveReport a = solve(mip, quick());
    const SolveReport b = solve(mip, dfs);
    REQUIRE(a.status == SolveStatus::kOptimal);
    REQUIRE(b.status == SolveStatus::kOptimal);
    CHECK(std::abs(*a.incumbent_obj - *b.incumbent_obj) <= 1e-6);
  }
}

TEST_CASE("models read back from LP text solve to the same optimum") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = random_instance(seed + 400, {4, 3}, 3, 3, 0.3);
    const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h);
    const MipModel text = parse_lp(export_lp(mip));
    const SolveReport a = solve(mip, quick());
    const SolveReport b = solve(text, quick());
    REQUIRE(b.status == SolveStatus::kOptimal);
    CHECK(std::abs(*a.incumbent_obj - *b.incumbent_obj) <= 1e-6);
  }
}

TEST_CASE("primal heuristic") {
  const Instance inst = random_instance(5, {6, 5}, 3, 3, 0.2);
  const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h);

  SUBCASE("box centre gives the forward margin") {
    std::vector<double> lp_point(static_cast<std::size_t>(mip.num_vars()), 0.0);
    for (int i = 0; i < 3; ++i) lp_point[mip.layout->inputs[i]] = inst.x(i);
    const auto h = primal_heuristic(mip, lp_point, inst.mlp);
    REQUIRE(h.has_value());
    CHECK(std::abs(h->objective - margin_at(inst, inst.x)) <= 1e-12);
  }
  SUBCASE("inputs outside the box are clipped") {
    std::vector<double> lp_point(static_cast<std::size_t>(mip.num_vars()), 0.0);
    for (int i = 0; i < 3; ++i) lp_point[mip.layout->inputs[i]] = 50.0;
    const auto h = primal_heuristic(mip, lp_point, inst.mlp);
    REQUIRE(h.has_value());
    for (int i = 0; i < 3; ++i) {
      CHECK(h->point[mip.layout->inputs[i]] == mip.vars[mip.layout->inputs[i]].upper);
    }
  }
  SUBCASE("at an integral LP point the heuristic equals the LP objective") {
    LinearProgram lp = mip.relaxation();
    std::mt19937_64 rng(8);
    std::bernoulli_distribution bit(0.5);
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 10; ++trial) {
      LinearProgram fixed = lp;
      for (int b : mip.binary_columns()) {
        const bool v = bit(rng);
        fixed.lower[b] = fixed.upper[b] = v ? 1.0 : 0.0;
      }
      const LpSolution s = solve_lp(fixed);
      if (s.status != LpStatus::kOptimal) continue;
      ++checked;
      const auto h = primal_heuristic(mip, s.primal, inst.mlp);
      REQUIRE(h.has_value());
      CHECK(std::abs(h->objective - s.objective) <= 1e-7);
    }
    CHECK(checked == 10);
  }
}

TEST_CASE("heuristic never beats the optimum") {
  std::mt19937_64 rng(9);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Instance inst = random_instance(seed + 500, {4}, 2, 3, 0.3);
    const InputBox box = InputBox::around(inst.x, inst.delta, false);
    const double oracle = brute_force_verify(inst.mlp, box, inst.k, inst.h);
    const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h);
    std::vector<double> lp_point(static_cast<std::size_t>(mip.num_vars()), 0.0);
    for (int i = 0; i < 2; ++i) {
      std::uniform_real_distribution<double> u(box.lower[i], box.upper[i]);
      lp_point[mip.layout->inputs[i]] = u(rng);
    }
    const auto h = primal_heuristic(mip, lp_point, inst.mlp);
    REQUIRE(h.has_value());
    CHECK(h->objective <= oracle + 1e-9);
  }
}

TEST_CASE("brute force: trivial cases and budget") {
  const Instance inst = random_instance(6, {5, 5}, 3, 3, 0.0);
  const InputBox point = InputBox::around(inst.x, 0.0, false);
  CHECK(std::abs(brute_force_verify(inst.mlp, point, inst.k, inst.h) - margin_at(inst, inst.x)) <=
        1e-9);
  const Instance wide = random_instance(7, {12, 12}, 3, 3, 5.0);
  CHECK_THROWS_AS(brute_force_verify(wide.mlp, InputBox::around(wide.x, 5.0, false), wide.k,
                                     wide.h, 4),
                  BudgetExceeded);
  CHECK_THROWS_AS(brute_force_verify(inst.mlp, point, 1, 1), MalformedInput);
}

TEST_CASE("time limits") {
  const Instance inst = random_instance(8, {30, 30}, 6, 3, 1.0);
  const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.delta, inst.k, inst.h);
  REQUIRE(mip.num_binaries() > 10);
  const SolveReport r = solve(mip, quick(1e-6));
  CHECK((r.status == SolveStatus::kFeasibleTimeout ||
         r.status == SolveStatus::kNoIncumbentTimeout));
  SolverConfig bad;
  bad.time_limit_seconds = 0.0;
  CHECK_THROWS_AS(solve(mip, bad), ConfigError);
  bad = quick();
  bad.abs_gap = -1.0;
  CHECK_THROWS_AS(solve(mip, bad), ConfigError);
}

TEST_CASE("trace text") {
  const TraceEntry entries[] = {{0, 0, 1.5, 1.5, std::nullopt}, {1, 1, 1.25, 1.5, -0.5}};
  CHECK(format_trace(entries) == "0 0 1.5 1.5 -\n1 1 1.25 1.5 -0.5\n");
}
