#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "wast/config.hpp"
#include "wast/cost.hpp"
#include "wast/data.hpp"
#include "wast/eval.hpp"
#include "wast/model.hpp"
#include "wast/selection.hpp"

namespace wast {

inline constexpr int kReportFormatVersion = 1;

// Standardized splits shared read-only by every run of an experiment.
struct DataBundle {
  std::string name = "data";
  Dataset train;
  std::optional<Dataset> test;
};

struct RunOutcome {
  TrainedModel model;
  FeatureRanking ranking;
  std::map<std::size_t, std::vector<std::size_t>> selected;  // per K
  std::map<std::size_t, Recovery> recovery;                  // per K, when ground truth is known
  std::map<std::size_t, double> accuracy;                    // per K, when a labelled test split exists
  CostReport cost;
  double wall_seconds = 0.0;
};

inline bool can_classify(const DataBundle& d) {
  return d.train.labels && d.test && d.test->labels && d.test->samples() > 0;
}

inline double knn_on_features(const DataBundle& d, std::span<const std::size_t> features, std::size_t k) {
  return knn_accuracy(d.train.x.gather_cols(features), *d.train.labels, d.test->x.gather_cols(features),
                      *d.test->labels, std::min(k, d.train.samples()));
}

/// Trains once and evaluates every requested K from the single ranking.
inline RunOutcome run_experiment(const TrainConfig& config, const DataBundle& data,
                                 std::span<const std::size_t> ks, const EpochHook& observer = {}) {
  const auto start = std::chrono::steady_clock::now();
  EpochHook hook;
  if (config.eval_each_epoch) {
    hook = [&](const TrainSession& s, EpochRecord& rec) {
      const std::size_t k = std::min(config.eval_k, data.train.features());
      const auto sel = select_features(s.importance().input, k);
      if (data.train.informative) rec.precision_at_k = recovery_metrics(sel, *data.train.informative).precision;
      if (can_classify(data)) rec.accuracy = knn_on_features(data, sel, config.knn_k);
      if (observer) observer(s, rec);
    };
  } else {
    hook = observer;
  }
  RunOutcome out;
  out.model = train(config, data.train, hook);
  out.ranking = rank_features(out.model.importance.input);
  for (auto k : ks) {
    auto sel = select_features(out.model.importance.input, k);
    if (data.train.informative) out.recovery[k] = recovery_metrics(sel, *data.train.informative);
    if (can_classify(data)) out.accuracy[k] = knn_on_features(data, sel, config.knn_k);
    out.selected[k] = std::move(sel);
  }
  out.cost = count_flops(out.model.w1, out.model.w2, data.train.samples(), config.epochs);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline nlohmann::json config_json(const TrainConfig& c) {
  return {{"hidden", c.hidden},
          {"sparsity", c.sparsity},
          {"alpha", c.alpha},
          {"lambda", c.lambda},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"momentum_form", to_string(c.momentum_form)},
          {"batch", c.batch},
          {"epochs", c.epochs},
          {"noise_std", c.noise_std},
          {"noisy_target", c.noisy_target},
          {"schedule", to_string(c.schedule)},
          {"grow_rule", method_name(c.grow_rule)},
          {"variant", to_string(c.variant)},
          {"seed", c.seed},
          {"knn_k", c.knn_k},
          {"eval_k", c.eval_k},
          {"eval_each_epoch", c.eval_each_epoch}};
}

inline nlohmann::json cost_json(const CostReport& c) {
  return {{"params", c.params},
          {"flops_forward_per_sample", c.flops_forward_per_sample},
          {"flops_total", c.flops_total},
          {"epochs", c.epochs},
          {"samples", c.samples},
          {"model", "forward = 2*(nnz(W1)+nnz(W2)) + hidden per sample; training = 3*forward per sample per epoch"}};
}

/// Self-contained record of one run. Only `wall_clock_seconds` varies between
/// identical invocations.
inline nlohmann::json run_report(const RunOutcome& r, const DataBundle& data) {
  const auto& c = r.model.config;
  nlohmann::json j;
  j["format_version"] = kReportFormatVersion;
  j["method"] = method_name(c.grow_rule);
  j["dataset"] = {{"name", data.name},
                  {"train_samples", data.train.samples()},
                  {"test_samples", data.test ? data.test->samples() : 0},
                  {"features", data.train.features()}};
  j["seed"] = c.seed;
  j["config"] = config_json(c);
  j["weight_init"] = "uniform(-sqrt(6/(n_rows+n_cols)), +sqrt(6/(n_rows+n_cols)))";
  j["classifier"] = {{"name", "knn"}, {"k", c.knn_k},
                     {"note", "k-nearest-neighbour (Euclidean) stands in for an SVM classifier"}};

  nlohmann::json selected = nlohmann::json::object();
  for (const auto& [k, sel] : r.selected) selected[std::to_string(k)] = sel;
  j["selected"] = selected;

  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : r.model.history) {
    nlohmann::json e{{"epoch", h.epoch},
                     {"train_loss", h.train_loss},
                     {"clean_loss", h.clean_loss},
                     {"topology_steps", h.topology_steps}};
    if (h.accuracy) e["accuracy"] = *h.accuracy;
    if (h.precision_at_k) e["precision_at_k"] = *h.precision_at_k;
    history.push_back(e);
  }
  j["history"] = history;

  if (!r.recovery.empty()) {
    nlohmann::json rec = nlohmann::json::object();
    for (const auto& [k, m] : r.recovery) rec[std::to_string(k)] = {{"precision", m.precision}, {"recall", m.recall}};
    j["recovery"] = rec;
  }
  if (!r.accuracy.empty()) {
    nlohmann::json acc = nlohmann::json::object();
    for (const auto& [k, a] : r.accuracy) acc[std::to_string(k)] = a;
    j["accuracy"] = acc;
  }
  j["cost"] = cost_json(r.cost);
  j["wall_clock_seconds"] = r.wall_seconds;
  return j;
}

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception is rethrown
/// after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Seed of the s-th repetition.
inline std::uint64_t repetition_seed(const TrainConfig& base, std::size_t s) { return base.seed + s; }

struct SweepResult {
  ScoreBoard board;
  std::size_t trainings = 0;
  std::size_t evaluations = 0;  // trainings x |K|
};

/// methods x seeds trainings, each evaluated at every K; one score cell per
/// (dataset, K).
inline SweepResult run_sweep(const TrainConfig& base, const DataBundle& data, std::span<const GrowRule> methods,
                             std::span<const std::size_t> ks, std::size_t seeds, std::size_t jobs = 1) {
  if (methods.empty()) throw Error(ErrorKind::Config, "sweep needs at least one method");
  if (ks.empty()) throw Error(ErrorKind::Config, "sweep needs at least one K");
  if (seeds == 0) throw Error(ErrorKind::Config, "sweep needs at least one seed");
  if (!can_classify(data)) throw Error(ErrorKind::Input, "sweep needs labelled train and test splits");

  const std::size_t runs = methods.size() * seeds;
  std::vector<std::map<std::size_t, double>> acc(runs);
  parallel_for(runs, jobs, [&](std::size_t i) {
    TrainConfig c = base;
    c.grow_rule = methods[i / seeds];
    c.seed = repetition_seed(base, i % seeds);
    acc[i] = run_experiment(c, data, ks).accuracy;
  });

  std::vector<CellResult> cells;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (auto k : ks) {
      CellResult cell{method_name(methods[mi]), data.name, k, {}};
      for (std::size_t s = 0; s < seeds; ++s) cell.accuracies.push_back(acc[mi * seeds + s].at(k));
      cells.push_back(std::move(cell));
    }
  }
  return {aggregate_scores(cells), runs, runs * ks.size()};
}

inline nlohmann::json scoreboard_json(const ScoreBoard& b) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : b.cells) {
    cells.push_back({{"method", c.method}, {"dataset", c.dataset}, {"K", c.k},
                     {"mean", c.mean}, {"std", c.std}, {"seeds", c.seeds}});
  }
  return {{"format_version", kReportFormatVersion}, {"cells", cells}, {"score", b.score}};
}

struct AblationRow {
  Variant variant = Variant::full;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::optional<double> precision_mean;
  std::vector<double> accuracies;
  std::vector<double> precisions;
};

/// One row per variant, all variants sharing the same seeds, evaluated at K.
inline std::vector<AblationRow> run_ablation(const TrainConfig& base, const DataBundle& data,
                                             std::span<const Variant> variants, std::size_t k,
                                             std::size_t seeds, std::size_t jobs = 1) {
  if (variants.empty()) throw Error(ErrorKind::Config, "ablation needs at least one variant");
  if (seeds == 0) throw Error(ErrorKind::Config, "ablation needs at least one seed");
  const std::size_t runs = variants.size() * seeds;
  std::vector<RunOutcome> outcomes(runs);
  const std::size_t ks[] = {k};
  parallel_for(runs, jobs, [&](std::size_t i) {
    TrainConfig c = base;
    c.variant = variants[i / seeds];
    c.seed = repetition_seed(base, i % seeds);
    outcomes[i] = run_experiment(c, data, ks);
  });
  std::vector<AblationRow> rows;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    AblationRow row;
    row.variant = variants[vi];
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto& o = outcomes[vi * seeds + s];
      if (o.accuracy.count(k)) row.accuracies.push_back(o.accuracy.at(k));
      if (o.recovery.count(k)) row.precisions.push_back(o.recovery.at(k).precision);
    }
    const auto acc = summarize({"", "", k, row.accuracies});
    row.accuracy_mean = acc.mean;
    row.accuracy_std = acc.std;
    if (!row.precisions.empty()) row.precision_mean = summarize({"", "", k, row.precisions}).mean;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os.precision(10);
  os << "variant,accuracy_mean,accuracy_std,precision_mean\n";
  for (const auto& r : rows) {
    os << to_string(r.variant) << ',' << r.accuracy_mean << ',' << r.accuracy_std << ',';
    if (r.precision_mean) os << *r.precision_mean;
    os << '\n';
  }
}

struct NoiseRow {
  double noise_std = 0.0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::vector<double> accuracies;
};

/// Retrains on Gaussian-corrupted copies of the training split, one row per
/// corruption level; the test split stays clean.
inline std::vector<NoiseRow> run_noise_sweep(const TrainConfig& base, const DataBundle& data,
                                             std::span<const double> stds, std::size_t k, std::size_t seeds,
                                             std::size_t jobs = 1) {
  if (stds.empty()) throw Error(ErrorKind::Config, "noise sweep needs at least one std");
  if (seeds == 0) throw Error(ErrorKind::Config, "noise sweep needs at least one seed");
  if (!can_classify(data)) throw Error(ErrorKind::Input, "noise sweep needs labelled train and test splits");
  const std::size_t runs = stds.size() * seeds;
  std::vector<double> acc(runs);
  const std::size_t ks[] = {k};
  parallel_for(runs, jobs, [&](std::size_t i) {
    TrainConfig c = base;
    c.seed = repetition_seed(base, i % seeds);
    DataBundle noisy = data;
    Rng rng(derive_seed(c.seed, 0x6e6f697365ULL));
    noisy.train.x = add_gaussian_noise(data.train.x, stds[i / seeds], rng);
    acc[i] = run_experiment(c, noisy, ks).accuracy.at(k);
  });
  std::vector<NoiseRow> rows;
  for (std::size_t si = 0; si < stds.size(); ++si) {
    NoiseRow row;
    row.noise_std = stds[si];
    row.accuracies.assign(acc.begin() + static_cast<std::ptrdiff_t>(si * seeds),
                          acc.begin() + static_cast<std::ptrdiff_t>((si + 1) * seeds));
    const auto s = summarize({"", "", k, row.accuracies});
    row.accuracy_mean = s.mean;
    row.accuracy_std = s.std;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_noise_csv(std::ostream& os, const std::vector<NoiseRow>& rows) {
  os.precision(10);
  os << "noise_std,accuracy_mean,accuracy_std\n";
  for (const auto& r : rows) os << r.noise_std << ',' << r.accuracy_mean << ',' << r.accuracy_std << '\n';
}

}  // namespace wast
