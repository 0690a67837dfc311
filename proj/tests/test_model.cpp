#include <gtest/gtest.h>

#include <cmath>

#include "dense_oracle.hpp"
#include "wast/model.hpp"
#include "wast/selection.hpp"

using namespace wast;

namespace {

Dataset small_data(std::size_t n, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  SynthParams p;
  p.samples = n;
  p.features = m;
  p.informative = std::min<std::size_t>(4, m);
  auto d = synth_informative(p, rng);
  standardize(d);
  return d;
}

TrainConfig small_config() {
  TrainConfig c;
  c.hidden = 8;
  c.batch = 16;
  c.epochs = 3;
  return c;
}

}  // namespace

TEST(EpochBatches, RemainderBatchKept) {
  Rng rng(0);
  auto b = epoch_batches(5, 2, rng);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 2u);
  EXPECT_EQ(b[1].size(), 2u);
  EXPECT_EQ(b[2].size(), 1u);
  Rng r2(0);
  EXPECT_EQ(epoch_batches(256, 128, r2).size(), 2u);
}

TEST(EpochBatches, SeededPermutation) {
  Rng a(7), b(7);
  const auto x = epoch_batches(50, 8, a);
  EXPECT_EQ(x, epoch_batches(50, 8, b));
  std::vector<std::size_t> all;
  for (const auto& batch : x) all.insert(all.end(), batch.begin(), batch.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(all[i], i);
}

TEST(Train, ZeroEpochsLeavesInitialState) {
  auto data = small_data(40, 12, 1);
  auto c = small_config();
  c.epochs = 0;
  auto model = train(c, data);
  for (double v : model.importance.input) EXPECT_EQ(v, 0.0);
  for (double v : model.importance.output) EXPECT_EQ(v, 0.0);
  TrainSession fresh(c, 12);
  EXPECT_EQ(model.w1.to_dense(), fresh.w1().to_dense());
  EXPECT_EQ(model.w2.to_dense(), fresh.w2().to_dense());
  EXPECT_TRUE(model.history.empty());
  EXPECT_EQ(model.flops_consumed, 0u);
}

TEST(Train, HistoryParamsAndFlops) {
  auto data = small_data(40, 12, 2);
  auto c = small_config();
  auto model = train(c, data);
  ASSERT_EQ(model.history.size(), 3u);
  for (const auto& h : model.history) {
    EXPECT_TRUE(std::isfinite(h.clean_loss));
    EXPECT_EQ(h.topology_steps, 3u);  // ceil(40 / 16) batches
  }
  const auto nnz = target_nnz(12, 8, 0.8);
  EXPECT_EQ(model.w1.nnz(), nnz);
  EXPECT_EQ(model.w2.nnz(), nnz);
  EXPECT_EQ(model.samples_seen, 120u);
  EXPECT_EQ(model.flops_consumed, count_flops(model.w1, model.w2, 40, 3).flops_total);
}

TEST(Train, PerEpochScheduleStepsOncePerEpoch) {
  auto data = small_data(40, 12, 2);
  auto c = small_config();
  c.schedule = Schedule::per_epoch;
  auto model = train(c, data);
  for (const auto& h : model.history) EXPECT_EQ(h.topology_steps, 1u);
}

TEST(Train, DeterministicForSeed) {
  auto data = small_data(60, 20, 3);
  auto c = small_config();
  c.seed = 99;
  auto a = train(c, data);
  auto b = train(c, data);
  EXPECT_EQ(a.importance.input, b.importance.input);
  EXPECT_EQ(a.w1.to_dense(), b.w1.to_dense());
  EXPECT_EQ(select_features(a.importance.input, 5), select_features(b.importance.input, 5));
  c.seed = 100;
  auto other = train(c, data);
  EXPECT_NE(a.importance.input, other.importance.input);
}

TEST(Train, ImportanceAccumulatesUnderRandomGrowth) {
  auto data = small_data(40, 12, 4);
  auto c = small_config();
  c.grow_rule = GrowRule::random;
  auto model = train(c, data);
  for (double v : model.importance.input) EXPECT_GT(v, 0.0);
}

TEST(Train, AblationLambdaSwitches) {
  auto c = small_config();
  c.lambda = 0.4;
  c.variant = Variant::no_gradient;
  EXPECT_EQ(TrainSession(c, 10).importance().lambda, 0.0);
  c.variant = Variant::no_weight;
  EXPECT_EQ(TrainSession(c, 10).importance().lambda, 1.0);
  c.variant = Variant::full;
  EXPECT_EQ(TrainSession(c, 10).importance().lambda, 0.4);
}

TEST(Train, InputErrors) {
  auto c = small_config();
  Dataset empty;
  empty.x = Matrix(0, 5);
  try {
    train(c, empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Input);
  }
  auto data = small_data(10, 6, 1);
  c.batch = 11;
  EXPECT_THROW(train(c, data), Error);
  c.batch = 4;
  c.lambda = 2;
  EXPECT_THROW(train(c, data), Error);
}

TEST(Train, DivergenceNamesEpochAndBatch) {
  auto data = small_data(32, 6, 1);
  for (auto& v : data.x.data()) v *= 1e6;
  auto c = small_config();
  c.hidden = 6;
  c.sparsity = 0.0;
  c.lr = 1e300;
  try {
    train(c, data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Divergence);
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

TEST(TrainSession, DenseNoiselessMatchesDenseOracleTrajectory) {
  auto data = small_data(24, 7, 5);
  auto c = small_config();
  c.hidden = 5;
  c.sparsity = 0.0;
  c.noise_std = 0.0;
  c.alpha = 0.0;
  c.batch = 8;
  TrainSession session(c, 7);
  oracle::DenseTrainer ref(oracle::densify(session.w1(), session.w2()));
  Rng rng(1);
  const auto batches = epoch_batches(24, 8, rng);
  for (const auto& idx : batches) {
    const auto x = data.x.gather_rows(idx);
    const double got = session.train_batch(x);
    session.topology_step();
    const double want = ref.step(x, x, c.lr / 7.0, c.momentum);
    EXPECT_NEAR(got, want, 1e-9);
  }
  const auto w1 = session.w1().to_dense();
  for (std::size_t i = 0; i < w1.size(); ++i) EXPECT_NEAR(w1.data()[i], ref.net.w1.data()[i], 1e-12);
}
