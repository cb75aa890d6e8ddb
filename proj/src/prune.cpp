#include "sprmip/prune.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "sprmip/arch.hpp"
#include "sprmip/error.hpp"
#include "sprmip/io.hpp"

namespace sprmip {

int PruneReport::total_removed() const {
  return std::accumulate(removed.begin(), removed.end(), 0);
}

int PruneReport::total_kept() const {
  return std::accumulate(kept.begin(), kept.end(), 0);
}

Mlp compact(const Mlp& mlp, const std::vector<std::vector<bool>>& keep) {
  const int hidden = mlp.num_hidden_layers();
  if (static_cast<int>(keep.size()) != hidden) {
    throw MalformedInput("compact: need one mask per hidden layer");
  }
  std::vector<Layer> layers;
  std::vector<int> prev_cols(static_cast<std::size_t>(mlp.input_dim()));
  std::iota(prev_cols.begin(), prev_cols.end(), 0);
  for (int l = 0; l <= hidden; ++l) {
    const Layer& src = mlp.layer(l);
    std::vector<int> rows;
    if (l < hidden) {
      if (static_cast<int>(keep[l].size()) != src.rows()) {
        throw MalformedInput("compact: mask length mismatch in layer " +
                             std::to_string(l));
      }
      for (int j = 0; j < src.rows(); ++j) {
        if (keep[l][j]) rows.push_back(j);
      }
      if (rows.empty()) {
        throw OverPrunedLayer(l, "over-pruned layer " + std::to_string(l) +
                                     ": every neuron would be removed; lower "
                                     "the threshold or the SPR lambda");
      }
    } else {
      rows.resize(static_cast<std::size_t>(src.rows()));
      std::iota(rows.begin(), rows.end(), 0);
    }
    Layer dst{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(prev_cols.size())),
              Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()))};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < prev_cols.size(); ++c) {
        dst.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            src.weights(rows[r], prev_cols[c]);
      }
      dst.bias(static_cast<Eigen::Index>(r)) = src.bias(rows[r]);
    }
    layers.push_back(std::move(dst));
    prev_cols = std::move(rows);
  }
  return Mlp(std::move(layers));
}

std::pair<Mlp, PruneReport> threshold_prune(const Mlp& mlp, double tau) {
  if (!(tau >= 0.0)) throw ConfigError("prune: threshold must be non-negative");
  if (mlp.num_hidden_layers() < 1) {
    throw MalformedInput("prune: network has no hidden layer");
  }
  PruneReport report;
  report.threshold = tau;
  std::vector<std::vector<bool>> keep;
  for (int l = 0; l < mlp.num_hidden_layers(); ++l) {
    const Layer& layer = mlp.layer(l);
    std::vector<bool> mask(static_cast<std::size_t>(layer.rows()), true);
    std::vector<int> gone;
    for (int j = 0; j < layer.rows(); ++j) {
      const double mag = std::max(layer.weights.row(j).cwiseAbs().maxCoeff(),
                                  std::abs(layer.bias(j)));
      if (mag < tau) {
        mask[j] = false;
        gone.push_back(j);
      }
    }
    report.removed.push_back(static_cast<int>(gone.size()));
    report.kept.push_back(layer.rows() - static_cast<int>(gone.size()));
    report.removed_neurons.push_back(std::move(gone));
    keep.push_back(std::move(mask));
  }
  Mlp pruned = compact(mlp, keep);
  report.pruned_arch = format_arch(pruned.hidden_widths());
  return {std::move(pruned), std::move(report)};
}

Mlp fine_tune(const Mlp& mlp, const Dataset& data, int epochs,
              const TrainConfig& cfg) {
  if (cfg.regularizer) {
    throw ConfigError("fine_tune: regularizer must not be attached");
  }
  TrainConfig plain = cfg;
  plain.epochs = epochs;
  return sgd_train(mlp, data, plain).mlp;
}

std::vector<SprConfig> default_grid(double m) {
  std::vector<SprConfig> grid;
  for (double lambda : {0.1, 0.5, 1.0}) {
    for (double alpha : {0.1, 0.5, 0.9}) grid.push_back({lambda, alpha, m});
  }
  return grid;
}

PipelineResult prune_pipeline(std::span<const int> arch, const Dataset& train,
                              const Dataset& validation,
                              std::span<const SprConfig> grid,
                              const TrainConfig& base,
                              const PipelineOptions& opts) {
  if (grid.empty()) throw ConfigError("prune_pipeline: empty grid");
  train.validate();
  validation.validate();
  TrainConfig plain = base;
  plain.regularizer.reset();

  const Mlp init = init_mlp(train.dim(), arch, train.num_classes, base.seed);
  PipelineResult result;
  result.baseline = sgd_train(init, train, plain).mlp;
  result.baseline_accuracy = accuracy(result.baseline, validation);

  std::vector<Mlp> candidates;
  std::vector<PruneReport> reports;
  for (const SprConfig& spr : grid) {
    spr.validate();
    GridEntry entry;
    entry.spr = spr;
    entry.tau = opts.tau;
    TrainConfig reg = plain;
    reg.regularizer = spr;
    const Mlp trained = sgd_train(init, train, reg).mlp;
    try {
      auto [pruned, report] = threshold_prune(trained, opts.tau);
      report.accuracy_before = accuracy(pruned, validation);
      Mlp tuned = fine_tune(pruned, train, opts.fine_tune_epochs, plain);
      report.accuracy_after = accuracy(tuned, validation);
      entry.pruned_arch = report.pruned_arch;
      entry.accuracy = *report.accuracy_after;
      entry.neurons_removed = report.total_removed();
      entry.hidden_remaining = report.total_kept();
      candidates.push_back(std::move(tuned));
      reports.push_back(std::move(report));
    } catch (const OverPrunedLayer& e) {
      entry.error = e.what();
      entry.accuracy = std::nan("");
      candidates.emplace_back();
      reports.emplace_back();
    }
    result.log.push_back(std::move(entry));
  }

  int best = -1;
  int most_accurate = -1;
  for (int i = 0; i < static_cast<int>(result.log.size()); ++i) {
    const GridEntry& e = result.log[i];
    if (!e.error.empty()) continue;
    if (most_accurate < 0 || e.accuracy > result.log[most_accurate].accuracy) {
      most_accurate = i;
    }
    if (e.accuracy < result.baseline_accuracy - opts.accuracy_floor) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const GridEntry& b = result.log[best];
    if (e.hidden_remaining < b.hidden_remaining ||
        (e.hidden_remaining == b.hidden_remaining && e.accuracy > b.accuracy)) {
      best = i;
    }
  }
  result.floor_met = best >= 0;
  if (best < 0) best = most_accurate;
  if (best < 0) {
    throw OverPrunedLayer(-1, "prune_pipeline: every grid point over-pruned a layer");
  }
  result.selected = best;
  result.best = candidates[best];
  result.report = reports[best];
  return result;
}

std::string grid_log_csv(std::span<const GridEntry> log) {
  std::ostringstream out;
  out << "lambda,alpha,M,tau,pruned_arch,accuracy,neurons_removed\n";
  for (const GridEntry& e : log) {
    out << format_double(e.spr.lambda) << ',' << format_double(e.spr.alpha) << ','
        << format_double(e.spr.m) << ',' << format_double(e.tau) << ','
        << (e.error.empty() ? e.pruned_arch : "over-pruned") << ','
        << (e.error.empty() ? format_double(e.accuracy) : "") << ','
        << e.neurons_removed << '\n';
  }
  return out.str();
}

}  // namespace sprmip
