#include "sprmip/bench.hpp"

#include <sstream>

#include "sprmip/arch.hpp"
#include "sprmip/error.hpp"
#include "sprmip/io.hpp"

namespace sprmip {

MatchedPair train_pair(std::span<const int> arch, const Dataset& train,
                       const Dataset& validation, std::span<const SprConfig> grid,
                       const TrainConfig& base, const PipelineOptions& prune) {
  PipelineResult r = prune_pipeline(arch, train, validation, grid, base, prune);
  MatchedPair pair;
  pair.arch.assign(arch.begin(), arch.end());
  pair.seed = base.seed;
  pair.baseline = std::move(r.baseline);
  pair.baseline_accuracy = r.baseline_accuracy;
  pair.pruned = std::move(r.best);
  const GridEntry& chosen = r.log[static_cast<std::size_t>(r.selected)];
  pair.pruned_accuracy = chosen.accuracy;
  pair.spr = chosen.spr;
  pair.pruned_arch = chosen.pruned_arch;
  pair.floor_met = r.floor_met;
  pair.grid_log = std::move(r.log);
  return pair;
}

int first_common_correct(std::span<const Mlp* const> nets, const Dataset& data, int start) {
  for (int i = std::max(start, 0); i < data.size(); ++i) {
    const Eigen::VectorXd x = data.inputs.col(i);
    bool all = true;
    for (const Mlp* net : nets) {
      if (argmax(logits(*net, x)) != data.labels[static_cast<std::size_t>(i)]) {
        all = false;
        break;
      }
    }
    if (all) return i;
  }
  return -1;
}

PairVerdicts verify_pair(const MatchedPair& pair, const Dataset& data, int sample,
                         const VerifySettings& s) {
  if (sample < 0 || sample >= data.size()) throw MalformedInput("bench: sample out of range");
  const Eigen::VectorXd x = data.inputs.col(sample);
  const int label = data.labels[static_cast<std::size_t>(sample)];
  PairVerdicts out;
  out.sample = sample;
  const auto base = build_instance(pair.baseline, x, label, s.delta, s.units, s.clamp);
  out.baseline = verify(base, s.solver, s.bounds);
  const auto small = build_instance(pair.pruned, x, label, s.delta, s.units, s.clamp);
  out.pruned = verify(small, s.solver, s.bounds);
  if (out.pruned.counterexample) {
    out.transfer = cross_check(*out.pruned.counterexample, x, pair.baseline);
  }
  return out;
}

const char* to_string(DeltaUnits units) {
  return units == DeltaUnits::kRawPixel ? "raw" : "scaled";
}

std::string found_label(Outcome outcome) {
  switch (outcome) {
    case Outcome::kCounterexample: return "YES";
    case Outcome::kTimeout: return "NO";
    case Outcome::kRobust: return "-";
  }
  return "-";
}

namespace {

std::string spr_label(const SprConfig& spr) {
  return format_double(spr.lambda) + "-" + format_double(spr.alpha);
}

}  // namespace

std::string bench_csv(std::span<const BenchRow> rows) {
  std::ostringstream out;
  out << "arch,lambda_alpha,accuracy,time_s,nodes,pruned_arch,found\n";
  for (const BenchRow& r : rows) {
    out << r.arch << ',' << r.lambda_alpha << ',';
    if (r.error.empty()) {
      out << format_double(r.accuracy) << ',' << format_double(r.time_s) << ',' << r.nodes;
    } else {
      out << ",,";
    }
    out << ',' << r.pruned_arch << ',' << r.found << '\n';
  }
  return out.str();
}

nlohmann::json bench_rows_json(std::span<const BenchRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const BenchRow& r : rows) {
    nlohmann::json j = {{"arch", r.arch},
                        {"lambda_alpha", r.lambda_alpha},
                        {"accuracy", r.accuracy},
                        {"time_s", r.time_s},
                        {"nodes", r.nodes},
                        {"pruned_arch", r.pruned_arch},
                        {"found", r.found},
                        {"delta", r.delta},
                        {"units", r.units},
                        {"repetition", r.repetition},
                        {"seed", r.seed},
                        {"sample", r.sample},
                        {"outcome", r.outcome},
                        {"error", r.error}};
    j["transfer"] = r.transfer ? nlohmann::json(*r.transfer) : nlohmann::json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<BenchRow> run_bench(const BenchOptions& opts, const Dataset& train,
                                const Dataset& validation, const Dataset& test,
                                const std::function<void(const BenchRow&)>& progress) {
  if (opts.repetitions < 1) throw ConfigError("bench: repetitions must be >= 1");
  std::vector<BenchRow> rows;
  auto emit = [&](BenchRow row) {
    if (progress) progress(row);
    rows.push_back(std::move(row));
  };
  for (const std::vector<int>& arch : opts.archs) {
    const std::string arch_text = format_arch(arch);
    for (int rep = 0; rep < opts.repetitions; ++rep) {
      TrainConfig cfg = opts.train;
      cfg.seed = opts.seed + static_cast<std::uint64_t>(rep);
      BenchRow proto;
      proto.arch = arch_text;
      proto.repetition = rep;
      proto.seed = cfg.seed;

      std::optional<MatchedPair> pair;
      std::string failure;
      try {
        pair = train_pair(arch, train, validation, opts.grid, cfg, opts.prune);
      } catch (const std::exception& e) {
        failure = std::string("training failed: ") + e.what();
      }
      int sample = -1;
      if (pair) {
        const Mlp* nets[] = {&pair->baseline, &pair->pruned};
        sample = first_common_correct(nets, test);
        if (sample < 0) failure = "no test sample is classified correctly by both nets";
      }
      for (double delta : opts.deltas) {
        for (DeltaUnits units : opts.units) {
          BenchRow base = proto;
          base.delta = delta;
          base.units = to_string(units);
          base.lambda_alpha = "-";
          base.sample = sample;
          BenchRow small = base;
          if (pair) {
            base.accuracy = pair->baseline_accuracy;
            small.lambda_alpha = spr_label(pair->spr);
            small.accuracy = pair->pruned_accuracy;
            small.pruned_arch = pair->pruned_arch;
          }
          if (failure.empty()) {
            VerifySettings vs = opts.verify;
            vs.delta = delta;
            vs.units = units;
            try {
              const PairVerdicts v = verify_pair(*pair, test, sample, vs);
              for (auto [row, verdict] : {std::pair{&base, &v.baseline}, std::pair{&small, &v.pruned}}) {
                row->time_s = verdict->report.wall_seconds;
                row->nodes = verdict->report.nodes;
                row->found = found_label(verdict->outcome);
                row->outcome = to_string(verdict->outcome);
              }
              small.transfer = v.transfer;
            } catch (const std::exception& e) {
              base.error = small.error = std::string("verification failed: ") + e.what();
            }
          } else {
            base.error = small.error = failure;
          }
          for (BenchRow* r : {&base, &small}) {
            if (!r->error.empty()) {
              r->found = "-";
              r->outcome = "error";
            }
          }
          emit(std::move(base));
          emit(std::move(small));
        }
      }
    }
  }
  return rows;
}

}  // namespace sprmip
