#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "cgl/autoencoder.hpp"
#include "cgl/commands.hpp"
#include "cgl/objectives.hpp"
#include "cgl/scene.hpp"
#include "cgl/trainer.hpp"

using namespace cgl;

namespace {

ModelConfig tiny_model(std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.pixels = 64;
  cfg.slots = 2;
  cfg.slot_dim = 3;
  cfg.encoder_hidden = {16};
  cfg.decoder_hidden = {16};
  cfg.init_seed = seed;
  return cfg;
}

TrainConfig tiny_train(std::size_t epochs, std::size_t warmup, double lambda) {
  TrainConfig t;
  t.epochs = epochs;
  t.warmup = warmup;
  t.lambda = lambda;
  t.batch = 16;
  t.seed = 3;
  t.contrast_points = 10;
  return t;
}

DatasetSplits tiny_data() {
  SceneConfig scene;
  scene.seed = 4;
  return generate_datasets(scene, {128, 20, 20});
}

}  // namespace

TEST(RecLoss, Examples) {
  ModelConfig cfg;
  cfg.pixels = 2;
  cfg.slots = 1;
  cfg.slot_dim = 1;
  cfg.encoder_hidden = {};
  cfg.decoder_hidden = {};
  ModelParams p = init_params(cfg);
  // Encoder and decoder collapse to zero maps, so recon = 0 and the loss is mean ||x||^2.
  for (auto& a : p.arrays()) std::fill(a.data.begin(), a.data.end(), 0.0);
  Tape tape;
  const BoundParams bound = bind(tape, p, false);
  EXPECT_DOUBLE_EQ(rec_loss(cfg, bound, tape.constant(Tensor({1, 2}, std::vector<double>{0, 0}))).value().item(), 0.0);
  EXPECT_DOUBLE_EQ(rec_loss(cfg, bound, tape.constant(Tensor({1, 2}, std::vector<double>{1, 0}))).value().item(), 1.0);
  EXPECT_DOUBLE_EQ(
      rec_loss(cfg, bound, tape.constant(Tensor({2, 2}, std::vector<double>{1, 1, 1, 1}))).value().item(), 2.0);
}

TEST(Recombine, Examples) {
  const std::vector<double> za{1, 2, 3, 4}, zb{5, 6, 7, 8};
  const std::vector<std::uint8_t> r12{1, 2}, r21{2, 1}, r11{1, 1};
  EXPECT_EQ(recombine(za, zb, r12, 2), (std::vector<double>{1, 2, 7, 8}));
  EXPECT_EQ(recombine(za, zb, r21, 2), (std::vector<double>{5, 6, 3, 4}));
  EXPECT_EQ(recombine(za, zb, r11, 2), za);
  EXPECT_THROW(recombine(za, std::vector<double>{1}, r12, 2), ShapeError);
}

TEST(Recombine, PlansAreDeterministicAndInRange) {
  Rng a(5), b(5);
  const auto pa = draw_plans(10, 3, 200, a);
  const auto pb = draw_plans(10, 3, 200, b);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].a, pb[i].a);
    EXPECT_EQ(pa[i].rho, pb[i].rho);
    EXPECT_LT(pa[i].a, 10U);
    EXPECT_LT(pa[i].b, 10U);
    for (auto r : pa[i].rho) EXPECT_TRUE(r == 1 || r == 2);
  }
}

TEST(Recombine, MarginalsOfRecombinedGroundTruthStayUniform) {
  SceneConfig scene;
  Rng rng(6);
  const auto zs = sample_in_band(scene, 10000, rng);
  const auto plans = draw_plans(zs.size(), 2, 10000, rng);
  std::vector<std::vector<double>> cols(4);
  std::size_t outside = 0;
  for (const RecombinationPlan& p : plans) {
    const std::vector<double> z = recombine(zs[p.a].values(), zs[p.b].values(), p.rho, 2);
    for (std::size_t c = 0; c < 4; ++c) cols[c].push_back(z[c]);
    if (!in_band(z, 2, 2, scene.band)) ++outside;
  }
  for (std::size_t c = 0; c < 4; ++c) EXPECT_LT(ks_uniform_distance(cols[c]), 0.05) << "coordinate " << c;
  // Mixed selectors land out of band most of the time.
  EXPECT_GT(outside, 2000U);
}

TEST(ConsLoss, MatchedConsistencyZeroForSwapsAndIdentity) {
  Tape tape;
  const std::vector<double> t{0.1, 0.9, 0.4, 0.2, 0.7, 0.3, 0.5, 0.8, 0.6, 0.0, 0.3, 0.9};
  std::vector<double> swapped(t.size());
  // Three samples of two slots of width two; swap the slots of every sample.
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t d = 0; d < 2; ++d) {
      swapped[b * 4 + d] = t[b * 4 + 2 + d];
      swapped[b * 4 + 2 + d] = t[b * 4 + d];
    }
  }
  Var target = tape.constant(Tensor({3, 4}, t));
  EXPECT_NEAR(matched_consistency(target, tape.constant(Tensor({3, 4}, t)), 2, 2).value().item(), 0.0, 1e-20);
  EXPECT_NEAR(matched_consistency(target, tape.constant(Tensor({3, 4}, swapped)), 2, 2).value().item(), 0.0, 1e-20);
}

TEST(ConsLoss, SingleSlotReducesToStandardizedMse) {
  Tape tape;
  const std::vector<double> t{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> r{3.0, 2.0, 1.0, 0.0};
  const double loss = matched_consistency(tape.constant(Tensor({4, 1}, t)), tape.constant(Tensor({4, 1}, r)), 1, 1)
                          .value()
                          .item();
  // Both columns z-score to +-(1.5, 0.5)/sqrt(1.25); the reversed one is the negation.
  const std::vector<double> zt{-1.5, -0.5, 0.5, 1.5};
  double expected = 0.0;
  for (double v : zt) expected += 4 * v * v / 1.25;
  EXPECT_NEAR(loss, expected / 4, 1e-12);
}

TEST(ConsLoss, InvariantToSlotPermutationOfReencoding) {
  Rng rng(7);
  Tape tape;
  std::vector<double> t(5 * 6), r(5 * 6);
  for (double& v : t) v = rng.uniform();
  for (double& v : r) v = rng.uniform();
  std::vector<double> rp(r.size());
  const std::size_t perm[3] = {2, 0, 1};
  for (std::size_t b = 0; b < 5; ++b) {
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t d = 0; d < 2; ++d) rp[b * 6 + k * 2 + d] = r[b * 6 + perm[k] * 2 + d];
    }
  }
  Var target = tape.constant(Tensor({5, 6}, t));
  const double a = matched_consistency(target, tape.constant(Tensor({5, 6}, r)), 3, 2).value().item();
  const double b = matched_consistency(target, tape.constant(Tensor({5, 6}, rp)), 3, 2).value().item();
  EXPECT_NEAR(a, b, 1e-12);
  EXPECT_GT(a, 0.0);
}

TEST(ConsLoss, NeedsBatchOfTwo) {
  const ModelConfig cfg = tiny_model();
  const ModelParams p = init_params(cfg);
  Tape tape;
  const BoundParams bound = bind(tape, p, true);
  Rng rng(1);
  EXPECT_THROW(cons_loss(cfg, bound, tape.constant(Tensor({1, 64})), rng, ConsistencyGrad::kEncoderOnly),
               std::invalid_argument);
}

TEST(ConsLoss, EncoderOnlyLeavesDecoderGradientsZero) {
  const ModelConfig cfg = tiny_model();
  const ModelParams p = init_params(cfg);
  const DatasetSplits data = tiny_data();
  const Tensor x({8, 64}, std::vector<double>(data.train.observations.begin(), data.train.observations.begin() + 8 * 64));
  for (ConsistencyGrad mode : {ConsistencyGrad::kEncoderOnly, ConsistencyGrad::kFull}) {
    Tape tape;
    const BoundParams bound = bind(tape, p, true);
    Rng rng(2);
    tape.backward(cons_loss(cfg, bound, tape.constant(x), rng, mode));
    double decoder_norm = 0.0, encoder_norm = 0.0;
    for (std::size_t i = 0; i < p.arrays().size(); ++i) {
      double s = 0.0;
      for (double g : tape.grad(bound.vars[i]).values()) s += g * g;
      (p.arrays()[i].name.rfind("decoder", 0) == 0 ? decoder_norm : encoder_norm) += s;
    }
    EXPECT_GT(encoder_norm, 0.0);
    if (mode == ConsistencyGrad::kEncoderOnly) {
      EXPECT_EQ(decoder_norm, 0.0);
    } else {
      EXPECT_GT(decoder_norm, 0.0);
    }
  }
}

TEST(Schedule, ConstantAndRampDecay) {
  TrainConfig t;
  EXPECT_EQ(learning_rate(t, 0), 1e-3);
  EXPECT_EQ(learning_rate(t, 149), 1e-3);
  t.schedule = LrSchedule::kRampDecay;
  EXPECT_DOUBLE_EQ(learning_rate(t, 0), 1e-7);
  EXPECT_DOUBLE_EQ(learning_rate(t, 1), 2e-7);
  EXPECT_DOUBLE_EQ(learning_rate(t, 13), 1e-7 * 8192);
  // 1e-7 * 2^14 > 1e-3, so the peak is reached at epoch 14.
  EXPECT_DOUBLE_EQ(learning_rate(t, 14), 1e-3);
  EXPECT_DOUBLE_EQ(learning_rate(t, 63), 1e-3);
  EXPECT_DOUBLE_EQ(learning_rate(t, 64), 5e-4);
  EXPECT_DOUBLE_EQ(learning_rate(t, 114), 2.5e-4);
  EXPECT_DOUBLE_EQ(learning_rate(t, 100000), 1e-7);
}

TEST(TrainConfig, ValidationNamesField) {
  TrainConfig t;
  t.warmup = 200;
  try {
    t.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "train.warmup");
  }
  t = TrainConfig{};
  t.batch = 1;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.lambda = -1;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Train, DeterministicGivenConfigs) {
  const DatasetSplits data = tiny_data();
  const TrainResult a = train(tiny_model(), tiny_train(3, 1, 1.0), data.train, data.id_test);
  const TrainResult b = train(tiny_model(), tiny_train(3, 1, 1.0), data.train, data.id_test);
  EXPECT_EQ(a.checkpoint, b.checkpoint);
  ASSERT_EQ(a.log.rows.size(), 3U);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.log.rows[i].l_rec, b.log.rows[i].l_rec);
    EXPECT_EQ(a.log.rows[i].l_cons, b.log.rows[i].l_cons);
    EXPECT_EQ(a.log.rows[i].contrast, b.log.rows[i].contrast);
  }
  EXPECT_EQ(a.log.rows[0].l_cons, 0.0);
  EXPECT_GT(a.log.rows[1].l_cons, 0.0);
  // 128 / 16 = 8 steps per epoch.
  EXPECT_EQ(a.checkpoint.step, 24);
}

TEST(Train, LambdaZeroMatchesReconstructionOnly) {
  const DatasetSplits data = tiny_data();
  const TrainResult zero = train(tiny_model(), tiny_train(3, 1, 0.0), data.train, data.id_test);
  const TrainResult rec_only = train(tiny_model(), tiny_train(3, 3, 1.0), data.train, data.id_test);
  EXPECT_EQ(zero.checkpoint.params, rec_only.checkpoint.params);
  for (const EpochRow& r : zero.log.rows) EXPECT_EQ(r.l_cons, 0.0);
}

TEST(Train, ReconstructionLossDecreases) {
  const DatasetSplits data = tiny_data();
  TrainConfig t = tiny_train(15, 15, 0.0);
  t.lr = 3e-3;
  const TrainResult r = train(tiny_model(), t, data.train, data.id_test);
  EXPECT_LT(r.log.rows.back().l_rec, 0.5 * r.log.rows.front().l_rec);
}

TEST(Train, NonFiniteLossAborts) {
  DatasetSplits data = tiny_data();
  for (double& v : data.train.observations) v = std::nan("");
  try {
    train(tiny_model(), tiny_train(2, 1, 1.0), data.train, data.id_test);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 1U);
    EXPECT_EQ(e.step(), 0U);
  }
}

TEST(Train, CheckpointHookFiresOnSchedule) {
  const DatasetSplits data = tiny_data();
  TrainConfig t = tiny_train(4, 4, 0.0);
  t.checkpoint_every = 2;
  std::vector<std::size_t> epochs;
  std::size_t rows = 0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRow&) { ++rows; };
  hooks.on_checkpoint = [&](const Checkpoint& c, std::size_t e) {
    epochs.push_back(e);
    EXPECT_EQ(c.step, static_cast<std::int64_t>(e * 8));
  };
  train(tiny_model(), t, data.train, data.id_test, hooks);
  EXPECT_EQ(epochs, (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(rows, 4U);
}

TEST(TrainLog, CsvRoundTrip) {
  TrainLog log;
  log.rows.push_back({1, 0.25, 0.0, 1.5, 2.0});
  log.rows.push_back({2, 0.125, 0.1, 0.3333333333333333, 4.5});
  const std::string csv = train_log_csv(log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,l_rec,l_cons,contrast,seconds");
  const TrainLog back = parse_train_log_csv(csv);
  ASSERT_EQ(back.rows.size(), 2U);
  EXPECT_EQ(back.rows[1].contrast, 0.3333333333333333);
  EXPECT_THROW(parse_train_log_csv("nope\n"), std::invalid_argument);
}
