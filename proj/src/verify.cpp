#include "sprmip/verify.hpp"

#include "sprmip/error.hpp"

namespace sprmip {

InputBox VerificationInstance::box() const {
  return InputBox::around(x, scaled_delta(), clamp);
}

double forward_margin(const Mlp& mlp, const Eigen::VectorXd& x, int true_class,
                      int target_class) {
  const Eigen::VectorXd y = logits(mlp, x);
  return y(target_class) - y(true_class);
}

int runner_up(const Eigen::VectorXd& logits, int top) {
  int best = -1;
  for (int i = 0; i < logits.size(); ++i) {
    if (i == top) continue;
    if (best < 0 || logits(i) > logits(best)) best = i;
  }
  return best;
}

VerificationInstance build_instance(const Mlp& mlp, const Eigen::VectorXd& x,
                                    int label, double delta, DeltaUnits units,
                                    bool clamp) {
  if (mlp.output_dim() < 2) throw MalformedInput("verify: need at least two classes");
  if (label < 0 || label >= mlp.output_dim()) {
    throw MalformedInput("verify: label outside the class range");
  }
  if (!(delta >= 0.0)) throw MalformedInput("verify: delta must be >= 0");
  const Eigen::VectorXd y = logits(mlp, x);
  const int predicted = argmax(y);
  if (predicted != label) {
    throw InvalidInstance("invalid instance: network predicts class " +
                          std::to_string(predicted) + " for an input labelled " +
                          std::to_string(label));
  }
  VerificationInstance inst;
  inst.mlp = mlp;
  inst.x = x;
  inst.true_class = label;
  inst.target_class = runner_up(y, label);
  inst.delta = delta;
  inst.units = units;
  inst.clamp = clamp;
  return inst;
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kRobust: return "robust";
    case Outcome::kCounterexample: return "counterexample";
    case Outcome::kTimeout: return "timeout";
  }
  return "unknown";
}

Verdict verify(const VerificationInstance& inst, const SolverConfig& cfg,
               BoundsMode bounds) {
  AdversarialOptions opts;
  opts.bounds = bounds;
  opts.clamp = inst.clamp;
  const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.scaled_delta(),
                                          inst.true_class, inst.target_class, opts);
  Verdict v;
  v.binaries = mip.num_binaries();
  v.constraints = static_cast<int>(mip.constraints.size());
  v.report = solve(mip, cfg);
  const SolveReport& r = v.report;
  v.margin = r.incumbent_obj ? *r.incumbent_obj : r.best_bound;

  if (r.incumbent_point && *r.incumbent_obj > 0.0) {
    Eigen::VectorXd cand(inst.mlp.input_dim());
    for (int i = 0; i < cand.size(); ++i) {
      cand(i) = (*r.incumbent_point)[mip.layout->inputs[i]];
    }
    if (inst.box().contains(cand) &&
        forward_margin(inst.mlp, cand, inst.true_class, inst.target_class) > 0.0) {
      v.outcome = Outcome::kCounterexample;
      v.counterexample = std::move(cand);
      return v;
    }
  }
  if (r.status == SolveStatus::kInfeasible ||
      (r.status == SolveStatus::kOptimal && *r.incumbent_obj <= 0.0)) {
    v.outcome = Outcome::kRobust;
  } else {
    v.outcome = Outcome::kTimeout;
  }
  return v;
}

bool cross_check(const Eigen::VectorXd& candidate, const Eigen::VectorXd& clean,
                 const Mlp& other) {
  if (candidate.size() != other.input_dim() || clean.size() != other.input_dim()) {
    throw MalformedInput("cross_check: input dimension mismatch");
  }
  const Eigen::VectorXd y = logits(other, clean);
  const int k = argmax(y);
  const int h = runner_up(y, k);
  return forward_margin(other, candidate, k, h) > 0.0;
}

nlohmann::json verdict_to_json(const Verdict& verdict,
                               const VerificationInstance& inst,
                               const SolverConfig& cfg, BoundsMode bounds) {
  nlohmann::json j;
  j["outcome"] = to_string(verdict.outcome);
  j["margin"] = verdict.margin;
  j["status"] = to_string(verdict.report.status);
  j["best_bound"] = verdict.report.best_bound;
  j["nodes"] = verdict.report.nodes;
  j["wall_seconds"] = verdict.report.wall_seconds;
  j["binaries"] = verdict.binaries;
  j["constraints"] = verdict.constraints;
  if (verdict.counterexample) {
    j["counterexample"] = std::vector<double>(verdict.counterexample->data(),
                                              verdict.counterexample->data() +
                                                  verdict.counterexample->size());
  } else {
    j["counterexample"] = nullptr;
  }
  j["config"] = {
      {"true_class", inst.true_class},
      {"target_class", inst.target_class},
      {"delta", inst.delta},
      {"units", inst.units == DeltaUnits::kRawPixel ? "raw-pixel" : "scaled"},
      {"clamp", inst.clamp},
      {"bounds", bounds == BoundsMode::kObbt ? "obbt" : "interval"},
      {"time_limit_seconds", cfg.time_limit_seconds},
      {"abs_gap", cfg.abs_gap},
      {"rel_gap", cfg.rel_gap},
      {"node_selection",
       cfg.node_selection == NodeSelection::kBestBound ? "best-bound" : "depth-first-dive"},
  };
  return j;
}

}  // namespace sprmip
