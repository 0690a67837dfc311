#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wast/cost.hpp"
#include "wast/data.hpp"
#include "wast/error.hpp"
#include "wast/random.hpp"
#include "wast/sparse_layer.hpp"
#include "wast/topology.hpp"

namespace wast {

struct TrainConfig {
  std::size_t hidden = 200;
  double sparsity = 0.8;
  double alpha = 0.3;
  double lambda = 0.9;  // 0.4 suits image-like data
  double lr = 0.1;  // applies to the loss averaged over features, see train_batch
  double momentum = 0.9;
  MomentumForm momentum_form = MomentumForm::classical;
  std::size_t batch = 128;
  std::size_t epochs = 10;
  double noise_std = 0.2;
  bool noisy_target = false;
  Schedule schedule = Schedule::per_batch;
  GrowRule grow_rule = GrowRule::wast;
  Variant variant = Variant::full;
  std::uint64_t seed = 0;

  // Evaluation settings.
  std::size_t knn_k = 5;
  std::size_t eval_k = 20;  // K used by per-epoch evaluation
  bool eval_each_epoch = false;

  TopologyPolicy policy() const { return {grow_rule, schedule, alpha, variant}; }

  void validate(std::size_t n_samples) const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
    if (hidden == 0) fail("hidden must be >= 1");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) fail("sparsity must lie in [0, 1)");
    if (!(alpha >= 0.0 && alpha < 1.0)) fail("alpha must lie in [0, 1)");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
    if (!(lr > 0.0)) fail("lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
    if (batch == 0) fail("batch must be >= 1");
    if (n_samples > 0 && batch > n_samples) fail("batch exceeds the number of samples");
    if (!(noise_std >= 0.0)) fail("noise_std must be >= 0");
    if (knn_k == 0) fail("knn_k must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean batch loss on the corrupted inputs
  double clean_loss = 0.0;  // reconstruction loss on the uncorrupted data
  std::size_t topology_steps = 0;
  std::optional<double> accuracy;
  std::optional<double> precision_at_k;
};

struct TrainedModel {
  SparseLayer w1;
  SparseLayer w2;
  ImportanceState importance;
  std::vector<EpochRecord> history;
  std::uint64_t samples_seen = 0;
  std::uint64_t flops_consumed = 0;
  TrainConfig config;
};

/// Seeded permutation of [0, n) cut into batches of `batch`; the last batch
/// keeps the remainder.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, Rng& rng) {
  if (batch == 0) throw Error(ErrorKind::Config, "batch must be >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

// Independent random streams of one run.
enum class Stream : std::uint64_t { init = 1, shuffle = 2, noise = 3, topology = 4 };

/// Stepwise training state. train() drives it over whole epochs; tests can
/// feed it individual batches.
class TrainSession {
 public:
  TrainSession(const TrainConfig& config, std::size_t features)
      : config_(config),
        init_rng_(derive_seed(config.seed, static_cast<std::uint64_t>(Stream::init))),
        shuffle_rng_(derive_seed(config.seed, static_cast<std::uint64_t>(Stream::shuffle))),
        noise_rng_(derive_seed(config.seed, static_cast<std::uint64_t>(Stream::noise))),
        topology_rng_(derive_seed(config.seed, static_cast<std::uint64_t>(Stream::topology))) {
    if (features == 0) throw Error(ErrorKind::Input, "dataset has no features");
    w1_ = init_sparse_layer(features, config.hidden, config.sparsity, init_rng_);
    w2_ = init_sparse_layer(config.hidden, features, config.sparsity, init_rng_);
    importance_ = ImportanceState(features, effective_lambda(config.lambda, config.variant));
  }

  const SparseLayer& w1() const noexcept { return w1_; }
  const SparseLayer& w2() const noexcept { return w2_; }
  const ImportanceState& importance() const noexcept { return importance_; }
  const TrainConfig& config() const noexcept { return config_; }
  std::uint64_t samples_seen() const noexcept { return samples_seen_; }

  /// One optimisation step on a clean batch: corrupt, reconstruct, update
  /// weights, accumulate importance. Returns the batch loss.
  double train_batch(const Matrix& clean) {
    Matrix input = add_gaussian_noise(clean, config_.noise_std, noise_rng_);
    Matrix target = config_.noisy_target ? input : clean;
    const auto acts = forward(w1_, w2_, input, std::move(target));
    const double loss = mse_loss(acts);
    if (!std::isfinite(loss)) throw Error(ErrorKind::Divergence, "non-finite loss");
    const auto grads = backward(w1_, w2_, acts);
    // The step follows the per-element mean of the loss, i.e. lr / m on the
    // gradients of the per-sample sum.
    const double step = config_.lr / static_cast<double>(clean.cols());
    sgd_momentum_step(w1_, grads.w1, step, config_.momentum, config_.momentum_form);
    sgd_momentum_step(w2_, grads.w2, step, config_.momentum, config_.momentum_form);
    accumulate_importance(importance_, sample_gradients(grads.output), w1_, w2_,
                          config_.variant != Variant::no_momentum);
    samples_seen_ += clean.rows();
    return loss;
  }

  TopologyStepResult topology_step() {
    return wast::topology_step(w1_, w2_, importance_, config_.policy(), topology_rng_);
  }

  /// One pass over the data. Returns the record with train_loss and the
  /// number of topology steps filled in.
  EpochRecord train_epoch(const Matrix& x, std::size_t epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const auto batches = epoch_batches(x.rows(), config_.batch, shuffle_rng_);
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Matrix batch = x.gather_rows(batches[bi]);
      try {
        loss_sum += train_batch(batch) * static_cast<double>(batch.rows());
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Divergence && e.kind() != ErrorKind::Numeric) throw;
        throw Error(ErrorKind::Divergence, "training diverged at epoch " + std::to_string(epoch) +
                                               ", batch " + std::to_string(bi) + " (" + e.what() + ")");
      }
      if (config_.schedule == Schedule::per_batch) {
        topology_step();
        ++rec.topology_steps;
      }
    }
    if (config_.schedule == Schedule::per_epoch) {
      topology_step();
      ++rec.topology_steps;
    }
    rec.train_loss = loss_sum / static_cast<double>(x.rows());
    return rec;
  }

  double clean_loss(const Matrix& x) const { return mse_loss(forward(w1_, w2_, x)); }

  TrainedModel finish(std::vector<EpochRecord> history) && {
    TrainedModel m;
    m.w1 = std::move(w1_);
    m.w2 = std::move(w2_);
    m.importance = std::move(importance_);
    m.history = std::move(history);
    m.samples_seen = samples_seen_;
    m.flops_consumed = 3 * forward_flops_per_sample(count_params(m.w1, m.w2), config_.hidden) * samples_seen_;
    m.config = config_;
    return m;
  }

 private:
  // Per-sample loss gradients dL_j/d output_j = 2 (output_j - x_j), recovered
  // from the gradient of the batch-mean loss.
  static Matrix sample_gradients(const Matrix& batch_grad) {
    Matrix g = batch_grad;
    const auto b = static_cast<double>(batch_grad.rows());
    for (auto& v : g.data()) v *= b;
    return g;
  }

  TrainConfig config_;
  Rng init_rng_;
  Rng shuffle_rng_;
  Rng noise_rng_;
  Rng topology_rng_;
  SparseLayer w1_;
  SparseLayer w2_;
  ImportanceState importance_;
  std::uint64_t samples_seen_ = 0;
};

// Called after every epoch with the live session; may fill the optional
// metrics of the record.
using EpochHook = std::function<void(const TrainSession&, EpochRecord&)>;

/// Denoising sparse autoencoder training with drop-and-grow topology updates.
inline TrainedModel train(const TrainConfig& config, const Dataset& data, const EpochHook& hook = {}) {
  if (data.samples() == 0) throw Error(ErrorKind::Input, "dataset is empty");
  config.validate(data.samples());
  TrainSession session(config, data.features());
  std::vector<EpochRecord> history;
  history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto rec = session.train_epoch(data.x, epoch);
    rec.clean_loss = session.clean_loss(data.x);
    if (!std::isfinite(rec.clean_loss)) {
      throw Error(ErrorKind::Divergence, "non-finite clean loss after epoch " + std::to_string(epoch));
    }
    if (hook) hook(session, rec);
    history.push_back(rec);
  }
  return std::move(session).finish(std::move(history));
}

}  // namespace wast
