#pragma once

#include <optional>

#include <Eigen/Dense>
#include <json.hpp>

#include "sprmip/bnb.hpp"
#include "sprmip/mip.hpp"
#include "sprmip/mlp.hpp"

namespace sprmip {

// Delta given in the scaled [0,1] units the network consumes, or in raw
// 0-255 pixel units (divided by 255 before use).
enum class DeltaUnits { kScaled, kRawPixel };

struct VerificationInstance {
  Mlp mlp;
  Eigen::VectorXd x;
  int true_class = 0;    // k
  int target_class = 0;  // h, the runner-up logit at x
  double delta = 0.0;
  DeltaUnits units = DeltaUnits::kScaled;
  bool clamp = false;

  double scaled_delta() const { return units == DeltaUnits::kRawPixel ? delta / 255.0 : delta; }
  InputBox box() const;
};

// y_h - y_k at x.
double forward_margin(const Mlp& mlp, const Eigen::VectorXd& x, int true_class,
                      int target_class);

// Runner-up class of `logits` excluding `top`; ties go to the smallest index.
int runner_up(const Eigen::VectorXd& logits, int top);

// Rejects x with InvalidInstance unless the network classifies it as `label`.
VerificationInstance build_instance(const Mlp& mlp, const Eigen::VectorXd& x,
                                    int label, double delta,
                                    DeltaUnits units = DeltaUnits::kScaled,
                                    bool clamp = false);

enum class Outcome { kRobust, kCounterexample, kTimeout };

const char* to_string(Outcome outcome);

struct Verdict {
  Outcome outcome = Outcome::kTimeout;
  double margin = 0.0;  // optimum (or best incumbent / bound when not optimal)
  std::optional<Eigen::VectorXd> counterexample;
  SolveReport report;
  int binaries = 0;
  int constraints = 0;
};

// Encodes max y_h - y_k over the box and solves it. Robust iff the search
// finished with optimum <= 0; counterexample iff an input with positive
// forward margin inside the box was found; timeout otherwise.
Verdict verify(const VerificationInstance& inst, const SolverConfig& cfg,
               BoundsMode bounds = BoundsMode::kObbt);

// True iff `candidate` is adversarial for `other` against other's own
// (k, h) at `clean`.
bool cross_check(const Eigen::VectorXd& candidate, const Eigen::VectorXd& clean,
                 const Mlp& other);

nlohmann::json verdict_to_json(const Verdict& verdict,
                               const VerificationInstance& inst,
                               const SolverConfig& cfg, BoundsMode bounds);

}  // namespace sprmip
