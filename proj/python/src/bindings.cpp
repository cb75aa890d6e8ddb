#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sprmip/arch.hpp"
#include "sprmip/bnb.hpp"
#include "sprmip/data.hpp"
#include "sprmip/error.hpp"
#include "sprmip/io.hpp"
#include "sprmip/mip.hpp"
#include "sprmip/mlp.hpp"
#include "sprmip/prune.hpp"
#include "sprmip/spr.hpp"
#include "sprmip/verify.hpp"

namespace py = pybind11;
using namespace sprmip;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
  const std::string text = py::module_::import("json").attr("dumps")(o).cast<std::string>();
  return nlohmann::json::parse(text);
}

Dataset make_dataset(const Eigen::MatrixXd& samples, const std::vector<int>& labels, int num_classes) {
  Dataset d;
  d.inputs = samples.transpose();
  d.labels = labels;
  d.num_classes = num_classes;
  d.validate();
  return d;
}

InputBox make_box(const std::vector<double>& lower, const std::vector<double>& upper) {
  InputBox box{lower, upper};
  box.validate();
  return box;
}

py::list bounds_to_list(const BoundsTable& t) {
  py::list out;
  for (const auto& layer : t.layers) {
    Eigen::MatrixXd lh(static_cast<Eigen::Index>(layer.size()), 2);
    for (std::size_t j = 0; j < layer.size(); ++j) {
      lh(static_cast<Eigen::Index>(j), 0) = layer[j].lo;
      lh(static_cast<Eigen::Index>(j), 1) = layer[j].hi;
    }
    out.append(lh);
  }
  return out;
}

TrainConfig train_config(int epochs, int batch, double lr, std::uint64_t seed,
                         std::optional<double> spr_lambda, double alpha, double m, bool snap) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.learning_rate = lr;
  cfg.seed = seed;
  cfg.spr_snap_to_zero = snap;
  if (spr_lambda) cfg.regularizer = SprConfig{*spr_lambda, alpha, m};
  cfg.validate();
  return cfg;
}

SolverConfig solver_config(double time_limit, double abs_gap, double rel_gap, bool dfs, bool trace) {
  SolverConfig cfg;
  cfg.time_limit_seconds = time_limit;
  cfg.abs_gap = abs_gap;
  cfg.rel_gap = rel_gap;
  cfg.node_selection = dfs ? NodeSelection::kDepthFirstDive : NodeSelection::kBestBound;
  cfg.record_trace = trace;
  cfg.validate();
  return cfg;
}

py::dict report_to_dict(const SolveReport& r) {
  py::dict d;
  d["status"] = to_string(r.status);
  d["objective"] = r.incumbent_obj ? py::cast(*r.incumbent_obj) : py::none();
  d["best_bound"] = r.best_bound;
  d["nodes"] = r.nodes;
  d["wall_seconds"] = r.wall_seconds;
  d["point"] = r.incumbent_point ? py::cast(*r.incumbent_point) : py::none();
  if (!r.trace.empty()) d["trace"] = format_trace(r.trace);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of sprmip: training, SPR pruning and MIP-based verification";

  static py::exception<MalformedInput> malformed(m, "MalformedInput", PyExc_ValueError);
  static py::exception<ConfigError> config(m, "ConfigError", PyExc_ValueError);
  static py::exception<FormatError> format(m, "FormatError", PyExc_IOError);
  static py::exception<OverPrunedLayer> over(m, "OverPrunedLayer", PyExc_RuntimeError);
  static py::exception<InvalidInstance> invalid(m, "InvalidInstance", PyExc_ValueError);
  static py::exception<BudgetExceeded> budget(m, "BudgetExceeded", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidInstance& e) {
      py::set_error(invalid, e.what());
    } catch (const ConfigError& e) {
      py::set_error(config, e.what());
    } catch (const MalformedInput& e) {
      py::set_error(malformed, e.what());
    } catch (const FormatError& e) {
      py::set_error(format, e.what());
    } catch (const OverPrunedLayer& e) {
      py::set_error(over, e.what());
    } catch (const BudgetExceeded& e) {
      py::set_error(budget, e.what());
    }
  });

  m.def("parse_arch", [](const std::string& s) { return parse_arch(s); }, py::arg("text"));
  m.def("format_arch", [](const std::vector<int>& w) { return format_arch(w); }, py::arg("widths"));

  py::class_<Mlp>(m, "Mlp")
      .def(py::init([](const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>& layers) {
             std::vector<Layer> ls;
             for (const auto& [w, b] : layers) ls.push_back(Layer{w, b});
             return Mlp(std::move(ls));
           }),
           py::arg("layers"), "Build from a list of (weights, bias) pairs; weights are (out, in).")
      .def_property_readonly("layers",
                             [](const Mlp& n) {
                               py::list out;
                               for (const Layer& l : n.layers()) out.append(py::make_tuple(l.weights, l.bias));
                               return out;
                             })
      .def_property_readonly("input_dim", &Mlp::input_dim)
      .def_property_readonly("output_dim", &Mlp::output_dim)
      .def_property_readonly("hidden_widths", &Mlp::hidden_widths)
      .def_property_readonly("arch", [](const Mlp& n) { return format_arch(n.hidden_widths()); })
      .def("logits", [](const Mlp& n, const Eigen::VectorXd& x) { return logits(n, x); }, py::arg("x"))
      .def("predict", [](const Mlp& n, const Eigen::VectorXd& x) { return argmax(logits(n, x)); },
           py::arg("x"))
      .def("preactivations", [](const Mlp& n, const Eigen::VectorXd& x) { return forward(n, x).preacts; },
           py::arg("x"))
      .def("__eq__", [](const Mlp& a, const Mlp& b) { return a == b; })
      .def("__repr__", [](const Mlp& n) {
        return "<Mlp " + std::to_string(n.input_dim()) + " -> " + format_arch(n.hidden_widths()) + " -> " +
               std::to_string(n.output_dim()) + ">";
      });

  m.def("init_mlp",
        [](int input_dim, const std::vector<int>& hidden, int classes, std::uint64_t seed) {
          return init_mlp(input_dim, hidden, classes, seed);
        },
        py::arg("input_dim"), py::arg("hidden"), py::arg("num_classes"), py::arg("seed") = 0);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("samples"), py::arg("labels"), py::arg("num_classes"),
           "samples has one row per sample")
      .def_property_readonly("samples", [](const Dataset& d) { return Eigen::MatrixXd(d.inputs.transpose()); })
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_property_readonly("dim", &Dataset::dim)
      .def("__len__", &Dataset::size)
      .def("split", &Dataset::split, py::arg("n"));

  m.def("gen_synthetic",
        [](int dims, int classes, int samples, double margin, std::uint64_t seed) {
          return gen_synthetic(SyntheticSpec{dims, classes, samples, margin}, seed);
        },
        py::arg("dims") = 10, py::arg("classes") = 4, py::arg("samples") = 1500, py::arg("margin") = 3.0,
        py::arg("seed") = 2024);
  m.def("load_mnist", &load_mnist, py::arg("dir"), py::arg("prefix") = "train");
  m.def("read_dataset_csv", &read_dataset_csv, py::arg("path"));
  m.def("write_dataset_csv", &write_dataset_csv, py::arg("path"), py::arg("data"));
  m.def("accuracy", &accuracy, py::arg("mlp"), py::arg("data"));

  m.def("train",
        [](const Mlp& init, const Dataset& data, int epochs, int batch, double lr, std::uint64_t seed,
           std::optional<double> spr_lambda, double spr_alpha, double spr_m, bool snap,
           const Dataset* validation) {
          const TrainConfig cfg = train_config(epochs, batch, lr, seed, spr_lambda, spr_alpha, spr_m, snap);
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = sgd_train(init, data, cfg, validation);
          }
          py::list history;
          for (const EpochRecord& e : r.history) {
            py::dict d;
            d["epoch"] = e.epoch;
            d["loss"] = e.loss;
            d["train_accuracy"] = e.train_accuracy;
            d["validation_accuracy"] =
                e.validation_accuracy ? py::cast(*e.validation_accuracy) : py::none();
            history.append(d);
          }
          return py::make_tuple(r.mlp, history);
        },
        py::arg("mlp"), py::arg("data"), py::arg("epochs") = 50, py::arg("batch_size") = 128,
        py::arg("lr") = 0.1, py::arg("seed") = 0, py::arg("spr_lambda") = py::none(),
        py::arg("spr_alpha") = 0.5, py::arg("spr_m") = 1.0, py::arg("snap_to_zero") = true,
        py::arg("validation") = nullptr, "Mini-batch SGD; returns (trained mlp, per-epoch history).");

  m.def("spr_value",
        [](const std::vector<double>& w, double alpha, double mm) { return spr_value(w, alpha, mm); },
        py::arg("w"), py::arg("alpha"), py::arg("m") = 1.0);
  m.def("spr_grad",
        [](const std::vector<double>& w, double alpha, double mm) { return spr_grad(w, alpha, mm); },
        py::arg("w"), py::arg("alpha"), py::arg("m") = 1.0);
  m.def("spr_case",
        [](const std::vector<double>& w, double alpha, double mm) {
          const SprCase c = spr_case(w, alpha, mm);
          return std::string(c == SprCase::kA ? "A" : c == SprCase::kB ? "B" : "C");
        },
        py::arg("w"), py::arg("alpha"), py::arg("m") = 1.0);
  m.def("spr_penalty",
        [](const Mlp& n, double lambda, double alpha, double mm) { return spr_penalty(n, {lambda, alpha, mm}); },
        py::arg("mlp"), py::arg("lambda_"), py::arg("alpha"), py::arg("m") = 1.0);

  m.def("threshold_prune",
        [](const Mlp& n, double tau) {
          auto [pruned, report] = threshold_prune(n, tau);
          py::dict d;
          d["kept"] = report.kept;
          d["removed"] = report.removed;
          d["removed_neurons"] = report.removed_neurons;
          d["pruned_arch"] = report.pruned_arch;
          return py::make_tuple(pruned, d);
        },
        py::arg("mlp"), py::arg("tau") = kDefaultPruneThreshold);

  m.def("prune_pipeline",
        [](const std::vector<int>& arch, const Dataset& train, const Dataset& validation,
           const std::vector<double>& lambdas, const std::vector<double>& alphas, double mm, double tau,
           double floor, int fine_tune, int epochs, int batch, double lr, std::uint64_t seed) {
          std::vector<SprConfig> grid;
          for (double l : lambdas) {
            for (double a : alphas) grid.push_back(SprConfig{l, a, mm});
          }
          const TrainConfig cfg = train_config(epochs, batch, lr, seed, std::nullopt, 0.5, 1.0, true);
          PipelineResult r;
          {
            py::gil_scoped_release release;
            r = prune_pipeline(arch, train, validation, grid, cfg, PipelineOptions{tau, floor, fine_tune});
          }
          py::list log;
          for (const GridEntry& e : r.log) {
            py::dict d;
            d["lambda"] = e.spr.lambda;
            d["alpha"] = e.spr.alpha;
            d["pruned_arch"] = e.pruned_arch;
            d["accuracy"] = e.accuracy;
            d["neurons_removed"] = e.neurons_removed;
            d["error"] = e.error;
            log.append(d);
          }
          py::dict out;
          out["best"] = r.best;
          out["baseline"] = r.baseline;
          out["baseline_accuracy"] = r.baseline_accuracy;
          out["selected"] = r.selected;
          out["floor_met"] = r.floor_met;
          out["pruned_arch"] = r.report.pruned_arch;
          out["log"] = log;
          return out;
        },
        py::arg("arch"), py::arg("train"), py::arg("validation"),
        py::arg("lambdas") = std::vector<double>{0.1, 0.5, 1.0},
        py::arg("alphas") = std::vector<double>{0.1, 0.5, 0.9}, py::arg("m") = 1.0,
        py::arg("tau") = kDefaultPruneThreshold, py::arg("accuracy_floor") = kDefaultAccuracyFloor,
        py::arg("fine_tune_epochs") = 10, py::arg("epochs") = 50, py::arg("batch_size") = 128,
        py::arg("lr") = 0.1, py::arg("seed") = 0);

  m.def("interval_bounds",
        [](const Mlp& n, const std::vector<double>& lo, const std::vector<double>& hi) {
          return bounds_to_list(interval_bounds(n, make_box(lo, hi)));
        },
        py::arg("mlp"), py::arg("lower"), py::arg("upper"),
        "Per hidden layer, an (m, 2) array of pre-activation [lo, hi].");
  m.def("obbt_bounds",
        [](const Mlp& n, const std::vector<double>& lo, const std::vector<double>& hi) {
          const InputBox box = make_box(lo, hi);
          return bounds_to_list(obbt_tighten(n, box, interval_bounds(n, box)));
        },
        py::arg("mlp"), py::arg("lower"), py::arg("upper"));

  py::class_<MipModel>(m, "MipModel")
      .def_property_readonly("num_vars", &MipModel::num_vars)
      .def_property_readonly("num_binaries", &MipModel::num_binaries)
      .def_property_readonly("num_constraints",
                             [](const MipModel& mm) { return static_cast<int>(mm.constraints.size()); })
      .def_property_readonly("variable_names",
                             [](const MipModel& mm) {
                               std::vector<std::string> names;
                               for (const MipVariable& v : mm.vars) names.push_back(v.name);
                               return names;
                             })
      .def("to_lp", [](const MipModel& mm) { return export_lp(mm); });

  m.def("encode_adversarial",
        [](const Mlp& n, const Eigen::VectorXd& x, double delta, int k, int h, bool obbt, bool clamp,
           bool eliminate_stable) {
          AdversarialOptions opts;
          opts.bounds = obbt ? BoundsMode::kObbt : BoundsMode::kInterval;
          opts.clamp = clamp;
          opts.eliminate_stable = eliminate_stable;
          return encode_adversarial(n, x, delta, k, h, opts);
        },
        py::arg("mlp"), py::arg("x"), py::arg("delta"), py::arg("true_class"), py::arg("target_class"),
        py::arg("obbt") = true, py::arg("clamp") = false, py::arg("eliminate_stable") = true);
  m.def("parse_lp", [](const std::string& text) { return parse_lp(text); }, py::arg("text"));

  m.def("solve",
        [](const MipModel& mip, double time_limit, double abs_gap, double rel_gap, bool dfs, bool trace) {
          const SolverConfig cfg = solver_config(time_limit, abs_gap, rel_gap, dfs, trace);
          SolveReport r;
          {
            py::gil_scoped_release release;
            r = solve(mip, cfg);
          }
          return report_to_dict(r);
        },
        py::arg("mip"), py::arg("time_limit") = 1800.0, py::arg("abs_gap") = 1e-6, py::arg("rel_gap") = 1e-7,
        py::arg("depth_first") = false, py::arg("trace") = false);

  m.def("verify",
        [](const Mlp& n, const Eigen::VectorXd& x, int label, double delta, const std::string& units,
           bool clamp, double time_limit, bool obbt) {
          if (units != "scaled" && units != "raw") throw ConfigError("units must be 'scaled' or 'raw'");
          const VerificationInstance inst = build_instance(
              n, x, label, delta, units == "raw" ? DeltaUnits::kRawPixel : DeltaUnits::kScaled, clamp);
          const SolverConfig cfg = solver_config(time_limit, 1e-6, 1e-7, false, false);
          const BoundsMode mode = obbt ? BoundsMode::kObbt : BoundsMode::kInterval;
          Verdict v;
          {
            py::gil_scoped_release release;
            v = verify(inst, cfg, mode);
          }
          py::dict out = to_python(verdict_to_json(v, inst, cfg, mode));
          out["counterexample"] = v.counterexample ? py::cast(*v.counterexample) : py::none();
          return out;
        },
        py::arg("mlp"), py::arg("x"), py::arg("label"), py::arg("delta") = 5.0, py::arg("units") = "scaled",
        py::arg("clamp") = false, py::arg("time_limit") = 1800.0, py::arg("obbt") = true,
        "Targeted robustness check against the runner-up class. Raises InvalidInstance when x is "
        "misclassified.");
  m.def("brute_force_verify",
        [](const Mlp& n, const std::vector<double>& lo, const std::vector<double>& hi, int k, int h,
           int max_unstable) { return brute_force_verify(n, make_box(lo, hi), k, h, max_unstable); },
        py::arg("mlp"), py::arg("lower"), py::arg("upper"), py::arg("true_class"), py::arg("target_class"),
        py::arg("max_unstable") = 20);
  m.def("cross_check", &cross_check, py::arg("candidate"), py::arg("clean"), py::arg("other"));

  m.def("save_model",
        [](const std::string& path, const Mlp& n, const py::object& meta) {
          save_model(path, n, meta.is_none() ? nlohmann::json::object() : from_python(meta));
        },
        py::arg("path"), py::arg("mlp"), py::arg("meta") = py::none());
  m.def("load_model",
        [](const std::string& path) {
          LoadedModel lm = load_model(path);
          return py::make_tuple(lm.mlp, to_python(lm.training_meta));
        },
        py::arg("path"), "Returns (mlp, training_meta).");
}
