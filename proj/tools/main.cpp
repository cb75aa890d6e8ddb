#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "manifest.hpp"
#include "sprmip/arch.hpp"
#include "sprmip/bench.hpp"
#include "sprmip/data.hpp"
#include "sprmip/error.hpp"
#include "sprmip/io.hpp"
#include "sprmip/mip.hpp"
#include "sprmip/prune.hpp"
#include "sprmip/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sprmip::cli {
namespace {

// Exit codes beyond the verifier's 0..3.
constexpr int kExitMisclassified = 3;
constexpr int kExitError = 4;
constexpr int kExitOverPruned = 5;

// ---------------------------------------------------------------- options

struct DataOptions {
  std::string mnist_dir;
  std::string csv_path;
  int syn_dims = 10;
  int syn_classes = 4;
  int syn_samples = 1500;
  double syn_margin = 3.0;
  std::uint64_t data_seed = 2024;
  double train_fraction = 2.0 / 3.0;
  double val_fraction = 1.0 / 6.0;
  int train_limit = 0;
};

struct TrainOptions {
  std::string arch;
  int epochs = 50;
  double lr = 0.1;
  int batch = 128;
  std::uint64_t seed = 0;
  bool no_snap = false;
  CLI::Option* epochs_opt = nullptr;
};

struct VerifyOptions {
  double delta = 5.0;
  std::string units = "scaled";
  std::string clamp = "auto";
  double time_limit = 1800.0;
  std::string obbt = "on";
  double abs_gap = 1e-6;
  double rel_gap = 1e-7;
  std::string node_selection = "best-bound";
  CLI::Option* time_limit_opt = nullptr;
};

struct SampleOptions {
  int index = -1;  // -1: first test sample the model classifies correctly
  std::vector<double> input;
  int label = -1;
};

void add_data_options(CLI::App* app, DataOptions& d) {
  const char* group = "Data";
  app->add_option("--mnist", d.mnist_dir, "MNIST directory with train-* and t10k-* IDX files")
      ->group(group);
  app->add_option("--data", d.csv_path, "Dataset CSV (as written by gen-synthetic)")
      ->group(group)
      ->excludes("--mnist");
  app->add_option("--syn-dims", d.syn_dims, "Synthetic blobs: input dimension")->group(group);
  app->add_option("--syn-classes", d.syn_classes, "Synthetic blobs: classes")->group(group);
  app->add_option("--syn-samples", d.syn_samples, "Synthetic blobs: samples")->group(group);
  app->add_option("--syn-margin", d.syn_margin, "Synthetic blobs: centre distance")->group(group);
  app->add_option("--data-seed", d.data_seed, "Synthetic blobs: seed")->group(group);
  app->add_option("--train-fraction", d.train_fraction,
                  "Share of a CSV/synthetic set used for training")
      ->check(CLI::Range(0.0, 1.0))
      ->group(group);
  app->add_option("--val-fraction", d.val_fraction,
                  "Share used for validation; the rest is the test split")
      ->check(CLI::Range(0.0, 1.0))
      ->group(group);
  app->add_option("--train-limit", d.train_limit, "Use only the first N training samples (0: all)")
      ->check(CLI::NonNegativeNumber)
      ->group(group);
}

void add_train_options(CLI::App* app, TrainOptions& t, bool with_arch = true) {
  const char* group = "Training";
  if (with_arch) {
    app->add_option("--arch", t.arch, "Hidden layers, e.g. 2x50 or 2x20-3x10")
        ->required()
        ->group(group);
  }
  t.epochs_opt = app->add_option("--epochs", t.epochs, "Training epochs")
                     ->check(CLI::PositiveNumber)
                     ->group(group);
  app->add_option("--lr", t.lr, "SGD learning rate")->check(CLI::PositiveNumber)->group(group);
  app->add_option("--batch", t.batch, "Mini-batch size")->check(CLI::PositiveNumber)->group(group);
  app->add_option("--seed", t.seed, "Initialisation and shuffling seed")->group(group);
  app->add_flag("--no-snap", t.no_snap,
                "Plain subgradient steps for the regularizer (no exact zeroing)")
      ->group(group);
}

void add_verify_options(CLI::App* app, VerifyOptions& v, bool single_delta = true) {
  const char* group = "Verification";
  if (single_delta) {
    app->add_option("--delta", v.delta, "L-infinity radius")
        ->check(CLI::NonNegativeNumber)
        ->group(group);
    app->add_option("--units", v.units, "Units of delta: scaled [0,1] or raw 0-255 pixels")
        ->check(CLI::IsMember({"scaled", "raw"}))
        ->group(group);
  }
  app->add_option("--clamp", v.clamp, "Intersect the box with [0,1] (auto: on for MNIST only)")
      ->check(CLI::IsMember({"auto", "on", "off"}))
      ->group(group);
  v.time_limit_opt = app->add_option("--time-limit", v.time_limit, "Solver wall-clock limit (s)")
                         ->check(CLI::NonNegativeNumber)
                         ->group(group);
  app->add_option("--obbt", v.obbt, "LP bound tightening before the search")
      ->check(CLI::IsMember({"on", "off"}))
      ->group(group);
  app->add_option("--abs-gap", v.abs_gap, "Absolute optimality gap")->group(group);
  app->add_option("--rel-gap", v.rel_gap, "Relative optimality gap")->group(group);
  app->add_option("--node-selection", v.node_selection, "best-bound or dfs")
      ->check(CLI::IsMember({"best-bound", "dfs"}))
      ->group(group);
}

void add_sample_options(CLI::App* app, SampleOptions& s) {
  const char* group = "Sample";
  app->add_option("--index", s.index,
                  "Index into the test split (-1: first one the model gets right)")
      ->check(CLI::Range(-1, std::numeric_limits<int>::max()))
      ->group(group);
  auto* input = app->add_option("--input", s.input, "Explicit input vector, comma separated")
                    ->delimiter(',')
                    ->group(group);
  app->add_option("--label", s.label, "True label of --input")->needs(input)->group(group);
  input->needs("--label");
}

// Applies the desk-scale preset to options the user did not set.
void apply_desk_scale(bool on, TrainOptions* t, VerifyOptions* v) {
  if (!on) return;
  if (t && t->epochs_opt && t->epochs_opt->count() == 0) t->epochs = 10;
  if (v && v->time_limit_opt && v->time_limit_opt->count() == 0) v->time_limit = 60.0;
}

// ---------------------------------------------------------------- data

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
  bool images = false;
};

Dataset head(const Dataset& d, int n) {
  if (n <= 0 || n >= d.size()) return d;
  return d.split(n).first;
}

Splits load_splits(const DataOptions& o, RunRecord& rec) {
  Splits s;
  if (!o.mnist_dir.empty()) {
    s.train = head(load_mnist(o.mnist_dir, "train"), o.train_limit);
    s.test = load_mnist(o.mnist_dir, "t10k");
    s.validation = s.test;
    s.images = true;
    rec.data["source"] = "mnist";
    rec.data["path"] = o.mnist_dir;
  } else {
    Dataset all;
    if (!o.csv_path.empty()) {
      all = read_dataset_csv(o.csv_path);
      rec.data["source"] = "csv";
      rec.data["path"] = o.csv_path;
    } else {
      all = gen_synthetic({o.syn_dims, o.syn_classes, o.syn_samples, o.syn_margin}, o.data_seed);
      rec.data["source"] = "synthetic";
      rec.data["spec"] = {{"dims", o.syn_dims},
                          {"classes", o.syn_classes},
                          {"samples", o.syn_samples},
                          {"margin", o.syn_margin}};
      rec.seeds["data"] = o.data_seed;
    }
    const int n = all.size();
    const int n_train = static_cast<int>(std::lround(n * o.train_fraction));
    const int n_val = static_cast<int>(std::lround(n * o.val_fraction));
    if (n_train < 1 || n_val < 1 || n_train + n_val >= n) {
      throw ConfigError("data: fractions leave an empty train, validation or test split");
    }
    auto [train, rest] = all.split(n_train);
    auto [val, test] = rest.split(n_val);
    s.train = head(train, o.train_limit);
    s.validation = std::move(val);
    s.test = std::move(test);
  }
  rec.data["train_size"] = s.train.size();
  rec.data["validation_size"] = s.validation.size();
  rec.data["test_size"] = s.test.size();
  rec.data["fingerprint"] = {{"train", hex64(fingerprint(s.train))},
                             {"validation", hex64(fingerprint(s.validation))},
                             {"test", hex64(fingerprint(s.test))}};
  return s;
}

TrainConfig make_train_config(const TrainOptions& t) {
  TrainConfig cfg;
  cfg.epochs = t.epochs;
  cfg.learning_rate = t.lr;
  cfg.batch_size = t.batch;
  cfg.seed = t.seed;
  cfg.spr_snap_to_zero = !t.no_snap;
  cfg.validate();
  return cfg;
}

json train_meta(const TrainConfig& cfg, const std::vector<int>& arch, const RunRecord& rec) {
  json spr = nullptr;
  if (cfg.regularizer) {
    spr = {{"lambda", cfg.regularizer->lambda},
           {"alpha", cfg.regularizer->alpha},
           {"M", cfg.regularizer->m}};
  }
  return {{"arch", format_arch(arch)},
          {"epochs", cfg.epochs},
          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},
          {"spr", spr},
          {"spr_snap_to_zero", cfg.spr_snap_to_zero},
          {"data", rec.data}};
}

std::string stem_path(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  p.replace_extension();
  return p.string() + suffix;
}

bool clamp_setting(const std::string& flag, bool images) {
  if (flag == "on") return true;
  if (flag == "off") return false;
  return images;
}

SolverConfig make_solver(const VerifyOptions& v) {
  SolverConfig cfg;
  cfg.time_limit_seconds = v.time_limit;
  cfg.abs_gap = v.abs_gap;
  cfg.rel_gap = v.rel_gap;
  cfg.node_selection =
      v.node_selection == "dfs" ? NodeSelection::kDepthFirstDive : NodeSelection::kBestBound;
  cfg.validate();
  return cfg;
}

DeltaUnits units_of(const std::string& s) {
  return s == "raw" ? DeltaUnits::kRawPixel : DeltaUnits::kScaled;
}

struct Sample {
  Eigen::VectorXd x;
  int label = 0;
  json describe;
  bool images = false;
};

Sample pick_sample(const SampleOptions& s, const DataOptions& d, const Mlp& mlp,
                   RunRecord& rec) {
  Sample out;
  if (!s.input.empty()) {
    out.x = Eigen::Map<const Eigen::VectorXd>(s.input.data(), static_cast<Eigen::Index>(s.input.size()));
    out.label = s.label;
    out.describe = {{"input", s.input}, {"label", s.label}};
    rec.data["source"] = "explicit";
    return out;
  }
  const Splits splits = load_splits(d, rec);
  int index = s.index;
  if (index < 0) {
    const Mlp* nets[] = {&mlp};
    index = first_common_correct(nets, splits.test);
    if (index < 0) throw InvalidInstance("no test sample is classified correctly by the model");
  }
  if (index >= splits.test.size()) {
    throw MalformedInput("--index " + std::to_string(index) + " is outside the test split (size " +
                         std::to_string(splits.test.size()) + ")");
  }
  out.x = splits.test.inputs.col(index);
  out.label = splits.test.labels[static_cast<std::size_t>(index)];
  out.describe = {{"index", index}, {"label", out.label}};
  out.images = splits.images;
  return out;
}

// ---------------------------------------------------------------- commands

struct TrainCmd {
  DataOptions data;
  TrainOptions train;
  std::optional<double> spr_lambda;
  double spr_alpha = 0.5;
  double spr_m = 1.0;
  std::string output = "model.json";
  std::string log;
  bool desk = false;

  int run(RunRecord& rec) {
    apply_desk_scale(desk, &train, nullptr);
    const std::vector<int> arch = parse_arch(train.arch);
    TrainConfig cfg = make_train_config(train);
    if (spr_lambda) {
      cfg.regularizer = SprConfig{*spr_lambda, spr_alpha, spr_m};
      cfg.regularizer->validate();
    }
    const Splits s = load_splits(data, rec);
    rec.seeds["train"] = cfg.seed;
    const Mlp init = init_mlp(s.train.dim(), arch, s.train.num_classes, cfg.seed);
    const TrainResult r = sgd_train(init, s.train, cfg, &s.validation);

    std::ostringstream csv;
    csv << "epoch,loss,train_accuracy,validation_accuracy\n";
    for (const EpochRecord& e : r.history) {
      csv << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.train_accuracy)
          << ',' << (e.validation_accuracy ? format_double(*e.validation_accuracy) : "") << '\n';
    }
    const std::string log_path = log.empty() ? stem_path(output, "_log.csv") : log;
    write_text_file(log_path, csv.str());

    json meta = train_meta(cfg, arch, rec);
    const double val_acc = accuracy(r.mlp, s.validation);
    meta["validation_accuracy"] = val_acc;
    save_model(output, r.mlp, meta);

    rec.outputs = {{"model", output}, {"log", log_path}};
    rec.result = {{"validation_accuracy", val_acc}};
    if (cfg.regularizer) rec.result["spr_penalty"] = spr_penalty(r.mlp, *cfg.regularizer);
    std::cout << "trained " << format_arch(arch) << ": validation accuracy "
              << format_double(val_acc) << " -> " << output << '\n';
    return 0;
  }
};

struct GridOptions {
  std::vector<double> lambdas{0.1, 0.5, 1.0};
  std::vector<double> alphas{0.1, 0.5, 0.9};
  double m = 1.0;
  double tau = kDefaultPruneThreshold;
  double floor = kDefaultAccuracyFloor;
  int fine_tune = 10;

  void add(CLI::App* app) {
    const char* group = "Pruning";
    app->add_option("--lambdas", lambdas, "Regularization strengths of the grid")
        ->delimiter(',')
        ->group(group);
    app->add_option("--alphas", alphas, "Alpha values of the grid")->delimiter(',')->group(group);
    app->add_option("--spr-m", m, "M of the regularizer")->check(CLI::PositiveNumber)->group(group);
    app->add_option("--tau", tau, "Neuron removal threshold on max |weight|")
        ->check(CLI::NonNegativeNumber)
        ->group(group);
    app->add_option("--accuracy-floor", floor, "Allowed validation accuracy drop (fraction)")
        ->check(CLI::NonNegativeNumber)
        ->group(group);
    app->add_option("--fine-tune-epochs", fine_tune, "Plain SGD epochs after pruning")
        ->check(CLI::NonNegativeNumber)
        ->group(group);
  }

  std::vector<SprConfig> grid() const {
    std::vector<SprConfig> g;
    for (double l : lambdas) {
      for (double a : alphas) g.push_back(SprConfig{l, a, m});
    }
    return g;
  }

  PipelineOptions pipeline() const { return {tau, floor, fine_tune}; }
};

std::string over_pruned_guidance(const OverPrunedLayer& e) {
  std::string msg = e.what();
  msg += "\nhint: every candidate emptied a hidden layer; lower --tau, use smaller --lambdas, "
         "or widen the architecture";
  return msg;
}

struct PruneCmd {
  DataOptions data;
  TrainOptions train;
  GridOptions grid;
  std::string output = "pruned.json";
  std::string baseline_output;
  std::string grid_csv;
  std::string report_path;
  bool desk = false;

  int run(RunRecord& rec) {
    apply_desk_scale(desk, &train, nullptr);
    const std::vector<int> arch = parse_arch(train.arch);
    const TrainConfig cfg = make_train_config(train);
    const std::vector<SprConfig> g = grid.grid();
    for (const SprConfig& c : g) c.validate();
    const Splits s = load_splits(data, rec);
    rec.seeds["train"] = cfg.seed;

    PipelineResult r;
    try {
      r = prune_pipeline(arch, s.train, s.validation, g, cfg, grid.pipeline());
    } catch (const OverPrunedLayer& e) {
      throw OverPrunedLayer(e.layer(), over_pruned_guidance(e));
    }
    const GridEntry& chosen = r.log[static_cast<std::size_t>(r.selected)];

    const std::string csv_path = grid_csv.empty() ? stem_path(output, "_grid.csv") : grid_csv;
    write_text_file(csv_path, grid_log_csv(r.log));

    TrainConfig chosen_cfg = cfg;
    chosen_cfg.regularizer = chosen.spr;
    json meta = train_meta(chosen_cfg, arch, rec);
    meta["pruned_arch"] = chosen.pruned_arch;
    meta["tau"] = grid.tau;
    meta["fine_tune_epochs"] = grid.fine_tune;
    meta["validation_accuracy"] = chosen.accuracy;
    save_model(output, r.best, meta);

    json removed = json::array();
    for (const auto& layer : r.report.removed_neurons) removed.push_back(layer);
    const json report = {{"arch", format_arch(arch)},
                         {"pruned_arch", chosen.pruned_arch},
                         {"selected", {{"lambda", chosen.spr.lambda},
                                       {"alpha", chosen.spr.alpha},
                                       {"M", chosen.spr.m}}},
                         {"tau", grid.tau},
                         {"baseline_accuracy", r.baseline_accuracy},
                         {"pruned_accuracy", chosen.accuracy},
                         {"accuracy_floor", grid.floor},
                         {"floor_met", r.floor_met},
                         {"kept", r.report.kept},
                         {"removed", r.report.removed},
                         {"removed_neurons", removed}};
    const std::string rep_path = report_path.empty() ? stem_path(output, "_report.json") : report_path;
    write_text_file(rep_path, report.dump(2) + "\n");

    rec.outputs = {{"model", output}, {"grid_csv", csv_path}, {"report", rep_path}};
    if (!baseline_output.empty()) {
      save_model(baseline_output, r.baseline, train_meta(cfg, arch, rec));
      rec.outputs["baseline"] = baseline_output;
    }
    rec.result = report;
    std::cout << "pruned " << format_arch(arch) << " -> " << chosen.pruned_arch << " (lambda "
              << format_double(chosen.spr.lambda) << ", alpha " << format_double(chosen.spr.alpha)
              << "), accuracy " << format_double(chosen.accuracy) << " vs baseline "
              << format_double(r.baseline_accuracy) << '\n';
    if (!r.floor_met) {
      std::cerr << "warning: floor unmet; no candidate stayed within "
                << format_double(grid.floor) << " of the baseline, kept the most accurate one\n";
    }
    return 0;
  }
};

struct VerifyCmd {
  std::string model;
  DataOptions data;
  SampleOptions sample;
  VerifyOptions verify;
  std::string output = "verdict.json";
  std::string trace;
  bool desk = false;

  int run(RunRecord& rec) {
    apply_desk_scale(desk, nullptr, &verify);
    const LoadedModel loaded = load_model(model);
    const Sample smp = pick_sample(sample, data, loaded.mlp, rec);
    const bool clamp = clamp_setting(verify.clamp, smp.images);
    SolverConfig cfg = make_solver(verify);
    cfg.record_trace = !trace.empty();
    const BoundsMode bounds = verify.obbt == "on" ? BoundsMode::kObbt : BoundsMode::kInterval;
    rec.outputs["verdict"] = output;

    VerificationInstance inst;
    try {
      inst = build_instance(loaded.mlp, smp.x, smp.label, verify.delta, units_of(verify.units), clamp);
    } catch (const InvalidInstance& e) {
      const json doc = {{"outcome", "misclassified"},
                        {"sample", smp.describe},
                        {"predicted", argmax(logits(loaded.mlp, smp.x))},
                        {"message", e.what()}};
      write_text_file(output, doc.dump(2) + "\n");
      std::cout << doc.dump(2) << '\n';
      rec.result = doc;
      return kExitMisclassified;
    }
    const Verdict v = sprmip::verify(inst, cfg, bounds);
    json doc = verdict_to_json(v, inst, cfg, bounds);
    doc["sample"] = smp.describe;
    doc["model"] = model;
    write_text_file(output, doc.dump(2) + "\n");
    if (!trace.empty()) {
      write_text_file(trace, format_trace(v.report.trace));
      rec.outputs["trace"] = trace;
    }
    std::cout << doc.dump(2) << '\n';
    rec.result = {{"outcome", to_string(v.outcome)},
                  {"nodes", v.report.nodes},
                  {"margin", v.margin},
                  {"clamp", clamp}};
    switch (v.outcome) {
      case Outcome::kRobust: return 0;
      case Outcome::kCounterexample: return 1;
      case Outcome::kTimeout: return 2;
    }
    return kExitError;
  }
};

struct ExportCmd {
  std::string model;
  DataOptions data;
  SampleOptions sample;
  VerifyOptions verify;
  bool keep_stable = false;
  std::string output = "model.lp";
  std::string bounds_csv;

  int run(RunRecord& rec) {
    const LoadedModel loaded = load_model(model);
    const Sample smp = pick_sample(sample, data, loaded.mlp, rec);
    const bool clamp = clamp_setting(verify.clamp, smp.images);
    const VerificationInstance inst =
        build_instance(loaded.mlp, smp.x, smp.label, verify.delta, units_of(verify.units), clamp);
    AdversarialOptions opts;
    opts.bounds = verify.obbt == "on" ? BoundsMode::kObbt : BoundsMode::kInterval;
    opts.clamp = clamp;
    opts.eliminate_stable = !keep_stable;
    const MipModel mip = encode_adversarial(inst.mlp, inst.x, inst.scaled_delta(), inst.true_class,
                                            inst.target_class, opts);
    write_lp_file(output, mip);

    const InputBox box = inst.box();
    BoundsTable table = interval_bounds(inst.mlp, box);
    if (opts.bounds == BoundsMode::kObbt) table = obbt_tighten(inst.mlp, box, table);
    const std::string csv_path = bounds_csv.empty() ? stem_path(output, "_bounds.csv") : bounds_csv;
    write_text_file(csv_path, table.to_csv());

    rec.outputs = {{"lp", output}, {"bounds_csv", csv_path}};
    rec.result = {{"variables", mip.num_vars()},
                  {"binaries", mip.num_binaries()},
                  {"constraints", static_cast<int>(mip.constraints.size())},
                  {"true_class", inst.true_class},
                  {"target_class", inst.target_class},
                  {"clamp", clamp}};
    std::cout << "wrote " << output << " (" << mip.num_vars() << " variables, "
              << mip.num_binaries() << " binaries, " << mip.constraints.size()
              << " constraints) and " << csv_path << '\n';
    return 0;
  }
};

struct GenCmd {
  int dims = 10;
  int classes = 4;
  int samples = 1500;
  double margin = 3.0;
  std::uint64_t seed = 2024;
  std::string output = "synthetic.csv";

  int run(RunRecord& rec) {
    const Dataset d = gen_synthetic({dims, classes, samples, margin}, seed);
    write_dataset_csv(output, d);
    rec.seeds["data"] = seed;
    rec.data = {{"source", "synthetic"}, {"fingerprint", hex64(fingerprint(d))}};
    rec.outputs = {{"csv", output}};
    std::cout << "wrote " << d.size() << " samples to " << output << '\n';
    return 0;
  }
};

struct BenchCmd {
  DataOptions data;
  TrainOptions train;
  GridOptions grid;
  VerifyOptions verify;
  std::vector<std::string> archs;
  std::vector<double> deltas{5.0};
  std::string units = "scaled";
  int reps = 3;
  std::string out_dir = "bench_out";
  bool desk = false;
  CLI::Option* archs_opt = nullptr;

  int run(RunRecord& rec) {
    apply_desk_scale(desk, &train, &verify);
    if (archs.empty()) {
      if (!desk) throw ConfigError("bench: --archs is required without --desk-scale");
      archs = {"2x10", "2x16"};
    }
    BenchOptions opts;
    for (const std::string& a : archs) opts.archs.push_back(parse_arch(a));
    opts.deltas = deltas;
    opts.units.clear();
    if (units != "raw") opts.units.push_back(DeltaUnits::kScaled);
    if (units != "scaled") opts.units.push_back(DeltaUnits::kRawPixel);
    opts.repetitions = reps;
    opts.seed = train.seed;
    opts.train = make_train_config(train);
    opts.grid = grid.grid();
    for (const SprConfig& c : opts.grid) c.validate();
    opts.prune = grid.pipeline();
    const Splits s = load_splits(data, rec);
    opts.verify.clamp = clamp_setting(verify.clamp, s.images);
    opts.verify.bounds = verify.obbt == "on" ? BoundsMode::kObbt : BoundsMode::kInterval;
    opts.verify.solver = make_solver(verify);
    for (int r = 0; r < reps; ++r) rec.seeds["repetition_" + std::to_string(r)] = train.seed + r;

    fs::create_directories(out_dir);
    const std::vector<BenchRow> rows =
        run_bench(opts, s.train, s.validation, s.test, [](const BenchRow& r) {
          std::cerr << r.arch << " rep " << r.repetition << " delta " << format_double(r.delta)
                    << ' ' << r.units << ' ' << (r.lambda_alpha == "-" ? "baseline" : "pruned")
                    << ": " << (r.error.empty() ? r.outcome : r.error) << ", " << r.nodes
                    << " nodes, " << format_double(r.time_s) << " s\n";
        });

    json tables = json::object();
    for (double delta : deltas) {
      for (DeltaUnits u : opts.units) {
        std::vector<BenchRow> part;
        for (const BenchRow& r : rows) {
          if (r.delta == delta && r.units == to_string(u)) part.push_back(r);
        }
        const std::string name =
            "bench_delta" + format_double(delta) + "_" + to_string(u) + ".csv";
        const std::string path = (fs::path(out_dir) / name).string();
        write_text_file(path, bench_csv(part));
        tables[name] = path;
        std::cout << "== delta " << format_double(delta) << " (" << to_string(u) << ")\n"
                  << bench_csv(part);
      }
    }
    const std::string detail = (fs::path(out_dir) / "bench_rows.json").string();
    write_text_file(detail, bench_rows_json(rows).dump(2) + "\n");

    int pruned_cex = 0;
    int transferred = 0;
    int failed = 0;
    for (const BenchRow& r : rows) {
      if (!r.error.empty()) ++failed;
      if (r.transfer) {
        ++pruned_cex;
        transferred += *r.transfer ? 1 : 0;
      }
    }
    rec.outputs = {{"tables", tables}, {"rows", detail}};
    rec.result = {{"rows", rows.size()},
                  {"failed_rows", failed},
                  {"pruned_counterexamples", pruned_cex},
                  {"transferred_to_baseline", transferred}};
    std::cout << "counterexample transfer: " << transferred << " of " << pruned_cex
              << " pruned-net counterexamples also fool the baseline\n";
    if (failed > 0) std::cerr << failed << " row(s) failed; see " << detail << '\n';
    return 0;
  }
};

}  // namespace
}  // namespace sprmip::cli

int main(int argc, char** argv) {
  using namespace sprmip;
  using namespace sprmip::cli;

  CLI::App app{"Train, prune and verify ReLU networks with a MIP encoding"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", SPRMIP_VERSION);
  std::string manifest;
  app.add_option("--manifest", manifest,
                 "Run manifest path (default: next to the main output)");

  TrainCmd train;
  auto* train_app = app.add_subcommand("train", "Train a network, optionally with the regularizer");
  add_data_options(train_app, train.data);
  add_train_options(train_app, train.train);
  train_app->add_option("--spr-lambda", train.spr_lambda, "Attach the regularizer with this strength");
  train_app->add_option("--spr-alpha", train.spr_alpha, "Regularizer alpha in (0,1)");
  train_app->add_option("--spr-m", train.spr_m, "Regularizer M");
  train_app->add_option("-o,--output", train.output, "Model JSON");
  train_app->add_option("--log", train.log, "Training log CSV (default: <output>_log.csv)");
  train_app->add_flag("--desk-scale", train.desk, "Short CI-sized run (10 epochs)");

  PruneCmd prune;
  auto* prune_app = app.add_subcommand("prune", "Grid search: regularized training, pruning, fine-tuning");
  add_data_options(prune_app, prune.data);
  add_train_options(prune_app, prune.train);
  prune.grid.add(prune_app);
  prune_app->add_option("-o,--output", prune.output, "Winning pruned model JSON");
  prune_app->add_option("--baseline-output", prune.baseline_output, "Also save the unregularized baseline");
  prune_app->add_option("--grid-csv", prune.grid_csv, "Grid log (default: <output>_grid.csv)");
  prune_app->add_option("--report", prune.report_path, "Prune report (default: <output>_report.json)");
  prune_app->add_flag("--desk-scale", prune.desk, "Short CI-sized run (10 epochs)");

  VerifyCmd verify;
  auto* verify_app = app.add_subcommand(
      "verify", "Targeted robustness check; exit 0 robust, 1 counterexample, 2 timeout, 3 misclassified");
  verify_app->add_option("--model", verify.model, "Model JSON")->required();
  add_data_options(verify_app, verify.data);
  add_sample_options(verify_app, verify.sample);
  add_verify_options(verify_app, verify.verify);
  verify_app->add_option("-o,--output", verify.output, "Verdict JSON");
  verify_app->add_option("--trace", verify.trace, "Per-node search trace");
  verify_app->add_flag("--desk-scale", verify.desk, "60 s time limit");

  ExportCmd exp;
  auto* export_app = app.add_subcommand("export", "Write the verification MIP as LP text plus a bounds CSV");
  export_app->add_option("--model", exp.model, "Model JSON")->required();
  add_data_options(export_app, exp.data);
  add_sample_options(export_app, exp.sample);
  add_verify_options(export_app, exp.verify);
  export_app->add_flag("--keep-stable", exp.keep_stable, "Emit binaries for stable neurons too");
  export_app->add_option("-o,--output", exp.output, "LP file");
  export_app->add_option("--bounds-csv", exp.bounds_csv, "Bounds table (default: <output>_bounds.csv)");

  BenchCmd bench;
  auto* bench_app = app.add_subcommand("bench", "Matched baseline/pruned pairs, verified at each delta");
  add_data_options(bench_app, bench.data);
  add_train_options(bench_app, bench.train, false);
  bench.grid.add(bench_app);
  add_verify_options(bench_app, bench.verify, false);
  bench_app->add_option("--archs", bench.archs, "Architectures, comma separated")->delimiter(',');
  bench_app->add_option("--deltas", bench.deltas, "Radii, comma separated")->delimiter(',');
  bench_app->add_option("--units", bench.units, "scaled, raw or both")
      ->check(CLI::IsMember({"scaled", "raw", "both"}));
  bench_app->add_option("--reps", bench.reps, "Repetitions (seeds seed..seed+reps-1)")
      ->check(CLI::PositiveNumber);
  bench_app->add_option("--out-dir", bench.out_dir, "Directory for CSV tables and row details");
  bench_app->add_flag("--desk-scale", bench.desk, "10 epochs, archs 2x10,2x16, 60 s limit");

  GenCmd gen;
  auto* gen_app = app.add_subcommand("gen-synthetic", "Write a Gaussian-blob dataset as CSV");
  gen_app->add_option("--dims", gen.dims)->check(CLI::PositiveNumber);
  gen_app->add_option("--classes", gen.classes)->check(CLI::PositiveNumber);
  gen_app->add_option("--samples", gen.samples)->check(CLI::PositiveNumber);
  gen_app->add_option("--margin", gen.margin)->check(CLI::NonNegativeNumber);
  gen_app->add_option("--seed", gen.seed);
  gen_app->add_option("-o,--output", gen.output, "Dataset CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  RunRecord rec;
  rec.argv.assign(argv, argv + argc);
  CLI::App* sub = app.get_subcommands().front();
  rec.command = sub->get_name();
  rec.options = option_values(*sub);

  std::string default_manifest;
  std::function<int(RunRecord&)> body;
  if (sub == train_app) {
    default_manifest = train.output;
    body = [&](RunRecord& r) { return train.run(r); };
  } else if (sub == prune_app) {
    default_manifest = prune.output;
    body = [&](RunRecord& r) { return prune.run(r); };
  } else if (sub == verify_app) {
    default_manifest = verify.output;
    body = [&](RunRecord& r) { return verify.run(r); };
  } else if (sub == export_app) {
    default_manifest = exp.output;
    body = [&](RunRecord& r) { return exp.run(r); };
  } else if (sub == bench_app) {
    default_manifest = (fs::path(bench.out_dir) / "run").string();
    body = [&](RunRecord& r) { return bench.run(r); };
  } else {
    default_manifest = gen.output;
    body = [&](RunRecord& r) { return gen.run(r); };
  }
  if (manifest.empty()) manifest = default_manifest + ".manifest.json";

  const auto start = std::chrono::steady_clock::now();
  try {
    rec.exit_code = body(rec);
  } catch (const OverPrunedLayer& e) {
    rec.error = e.what();
    rec.exit_code = kExitOverPruned;
  } catch (const InvalidInstance& e) {
    rec.error = e.what();
    rec.exit_code = kExitMisclassified;
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.exit_code = kExitError;
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!rec.error.empty()) std::cerr << "error: " << rec.error << '\n';
  try {
    const fs::path parent = fs::path(manifest).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_text_file(manifest, rec.to_json().dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: could not write manifest: " << e.what() << '\n';
    if (rec.exit_code == 0) rec.exit_code = kExitError;
  }
  return rec.exit_code;
}
