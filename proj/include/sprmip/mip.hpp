#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sprmip/lp.hpp"
#include "sprmip/mlp.hpp"

namespace sprmip {

struct InputBox {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  // [x - delta, x + delta], optionally intersected with [domain_lo, domain_hi].
  static InputBox around(const Eigen::VectorXd& x, double delta, bool clamp,
                         double domain_lo = 0.0, double domain_hi = 1.0);
};

enum class BoundSource { kInterval, kObbt };

struct NeuronBounds {
  double lo = 0.0;  // pre-activation lower bound
  double hi = 0.0;  // pre-activation upper bound
  BoundSource source = BoundSource::kInterval;

  double m_plus() const { return hi > 0.0 ? hi : 0.0; }
  double m_minus() const { return lo < 0.0 ? -lo : 0.0; }
  bool stably_inactive() const { return m_plus() == 0.0; }
  bool stably_active() const { return !stably_inactive() && m_minus() == 0.0; }
  bool unstable() const { return m_plus() > 0.0 && m_minus() > 0.0; }
};

// Pre-activation bounds per hidden layer and neuron.
struct BoundsTable {
  std::vector<std::vector<NeuronBounds>> layers;

  int unstable_count() const;
  // CSV: layer,neuron,lo,hi,provenance
  std::string to_csv() const;
};

// Interval arithmetic through W+/W- splits; post-activation intervals are
// clipped at zero before feeding the next layer.
BoundsTable interval_bounds(const Mlp& mlp, const InputBox& box);

// Layer-ascending LP tightening: each neuron's pre-activation is maximised
// and minimised over the LP relaxation of the preceding layers (encoded with
// the already tightened bounds), then intersected with `seed`. The first
// hidden layer keeps its interval values, which are exact over a box.
BoundsTable obbt_tighten(const Mlp& mlp, const InputBox& box,
                         const BoundsTable& seed);

struct MipVariable {
  std::string name;
  double lower = 0.0;
  double upper = kInfinity;
  bool binary = false;
};

struct MipConstraint {
  std::string name;
  std::vector<LinearTerm> terms;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;
};

// Columns owned by one hidden neuron. `binary` is -1 for stable neurons.
struct NeuronVars {
  int plus = -1;
  int minus = -1;
  int binary = -1;
};

struct NetworkLayout {
  std::vector<int> inputs;
  std::vector<std::vector<NeuronVars>> hidden;
  std::vector<int> outputs;
};

// Size of the fragment emitted for one hidden layer with n inputs, m outputs.
struct LayerCount {
  int inputs = 0;       // n
  int neurons = 0;      // m
  int binaries = 0;
  int continuous = 0;   // n + 2m
  int structural_rows = 0;
};

struct AdversarialTarget {
  int true_class = 0;    // k
  int target_class = 0;  // h
};

struct MipModel {
  std::vector<MipVariable> vars;
  std::vector<MipConstraint> constraints;
  Sense sense = Sense::kMaximize;
  std::vector<LinearTerm> objective;
  std::map<std::string, int, std::less<>> var_index;

  // Filled by the network encoder; absent for models read from LP text.
  std::optional<NetworkLayout> layout;
  std::shared_ptr<const Mlp> network;
  std::optional<AdversarialTarget> target;
  std::vector<LayerCount> layer_counts;

  int add_var(std::string name, double lo, double hi, bool binary = false);
  void add_constraint(std::string name, std::vector<LinearTerm> terms,
                      Relation rel, double rhs);
  int num_vars() const { return static_cast<int>(vars.size()); }
  int num_binaries() const;
  int num_continuous() const { return num_vars() - num_binaries(); }
  std::vector<int> binary_columns() const;
  int column(std::string_view name) const;

  // Continuous relaxation: binaries become [0,1] continuous columns.
  LinearProgram relaxation() const;
};

struct EncodeOptions {
  // Stable neurons (M+ = 0 or M- = 0) get no binary and no big-M rows.
  bool eliminate_stable = true;
};

// Per hidden layer: v+ - v- = W o + b, v+ <= M+ z, v- <= M- (1 - z), with the
// next layer reading v+ directly. The output layer adds y = W o + b rows.
MipModel encode_network(const Mlp& mlp, const InputBox& box,
                        const BoundsTable& bounds, const EncodeOptions& opts = {});

enum class BoundsMode { kInterval, kObbt };

struct AdversarialOptions {
  BoundsMode bounds = BoundsMode::kObbt;
  bool clamp = false;
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  bool eliminate_stable = true;
};

// maximize y_h - y_k over the box around x.
MipModel encode_adversarial(const Mlp& mlp, const Eigen::VectorXd& x,
                            double delta, int true_class, int target_class,
                            const AdversarialOptions& opts = {});

// CPLEX-style LP text with sections Maximize/Minimize, Subject To, Bounds,
// Binaries, End. Each row sits on one line; output is deterministic.
std::string export_lp(const MipModel& mip);
void write_lp_file(const std::string& path, const MipModel& mip);

// Reads text produced by export_lp (one row per line). Throws FormatError.
MipModel parse_lp(std::string_view text);

}  // namespace sprmip
