#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rlac/dpo.hpp"
#include "support.hpp"

using namespace rlac;

namespace {

Instruction inst() { return {"s", TaskKind::Factual, 0}; }

GeneratorPolicy tabular(std::vector<double> table) {
  const std::size_t values = table.size();
  return GeneratorPolicy(TaskKind::Factual, {1, 1, values}, std::move(table));
}

OutputValue out(int v) { return OutputValue::factual_from_values(std::vector{v}); }

InteractionRecord record(const std::string& s, int value, int reward) {
  InteractionRecord r;
  r.instruction = {s, TaskKind::Factual, 0};
  r.output = out(value);
  r.proposal = FactualProposal{1, 0, value};
  r.rewards = {reward, 1 - reward};
  return r;
}

}  // namespace

TEST(DpoLoss, AtReferenceIsLn2) { EXPECT_NEAR(dpo_loss(-1.3, -2.2, -1.3, -2.2, 0.1), std::log(2.0), 1e-9); }

TEST(DpoLoss, MarginLn3AtBetaOne) {
  EXPECT_NEAR(dpo_loss(std::log(3.0), 0.0, 0.0, 0.0, 1.0), -std::log(0.75), 1e-12);
  EXPECT_NEAR(-std::log(0.75), 0.287682, 1e-6);
}

TEST(DpoLoss, MonotoneAndPositive) {
  double prev = std::numeric_limits<double>::infinity();
  for (double m = -50; m <= 50; m += 0.5) {
    const double l = dpo_loss(m, 0, 0, 0, 0.3);
    EXPECT_GT(l, 0.0);
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_LT(dpo_loss(1e4, 0, 0, 0, 1.0), 1e-300 + 1e-12);
  EXPECT_GT(dpo_loss(-1e4, 0, 0, 0, 1.0), 9999.0);
}

TEST(DpoLoss, BetaScalingEqualsDoubledMargin) {
  for (double m : {-3.0, -0.2, 0.0, 0.7, 5.0})
    EXPECT_DOUBLE_EQ(dpo_loss(m, 0, 0, 0, 0.2), dpo_loss(2 * m, 0, 0, 0, 0.1));
}

TEST(DpoLoss, NonFiniteInputThrows) {
  try {
    dpo_loss(std::nan(""), 0, 0, 0, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
}

TEST(DpoGradient, AtReferenceIsHalfBetaScoreDifference) {
  auto p = tabular({0.4, -0.3, 1.1});
  const GeneratorSnapshot ref(p);
  const PreferencePair pair{inst(), Player::Generator, out(0), out(2), {}};
  const double beta = 0.1;
  const auto g = densify(dpo_gradient(pair, p, ref, beta).gradient);
  const auto sw = densify(p.grad_log_prob(inst(), out(0)));
  const auto sl = densify(p.grad_log_prob(inst(), out(2)));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(g.at(k), -beta / 2 * (sw.at(k) - sl.at(k)), 1e-15);
}

TEST(DpoGradient, SwapNegatesMarginAndFlipsScoreSign) {
  auto p = tabular({0.4, -0.3, 1.1});
  auto r = tabular({0.1, 0.2, -0.5});
  const GeneratorSnapshot ref(r);
  const PreferencePair ab{inst(), Player::Generator, out(0), out(1), {}};
  const PreferencePair ba{inst(), Player::Generator, out(1), out(0), {}};
  const auto t1 = dpo_gradient(ab, p, ref, 0.5), t2 = dpo_gradient(ba, p, ref, 0.5);
  EXPECT_NEAR(t1.margin, -t2.margin, 1e-15);
  const double c1 = -0.5 / (1 + std::exp(0.5 * t1.margin)), c2 = -0.5 / (1 + std::exp(0.5 * t2.margin));
  const auto g1 = densify(t1.gradient), g2 = densify(t2.gradient);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(g1.at(k) / c1, -g2.at(k) / c2, 1e-12);
}

TEST(BuildPairs, CrossProductPerGroup) {
  Rng rng(1);
  std::vector<InteractionRecord> recs{record("a", 0, 1), record("a", 1, 1), record("a", 2, 0)};
  EXPECT_EQ(build_pairs(recs, Player::Generator, 16, rng).pairs.size(), 2u);
}

TEST(BuildPairs, NoContrastNoPairs) {
  Rng rng(1);
  std::vector<InteractionRecord> ones{record("a", 0, 1), record("a", 1, 1)};
  std::vector<InteractionRecord> zeros{record("a", 0, 0), record("a", 1, 0)};
  EXPECT_TRUE(build_pairs(ones, Player::Generator, 16, rng).pairs.empty());
  EXPECT_TRUE(build_pairs(zeros, Player::Generator, 16, rng).pairs.empty());
}

TEST(BuildPairs, CapIsExactAndSeeded) {
  std::vector<InteractionRecord> recs;
  for (int k = 0; k < 10; ++k) recs.push_back(record("a", k, k < 6 ? 1 : 0));
  Rng r1(5), r2(5);
  const auto d1 = build_pairs(recs, Player::Generator, 8, r1);
  const auto d2 = build_pairs(recs, Player::Generator, 8, r2);
  ASSERT_EQ(d1.pairs.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(canonical(d1.pairs[i].winner), canonical(d2.pairs[i].winner));
    EXPECT_EQ(canonical(d1.pairs[i].loser), canonical(d2.pairs[i].loser));
  }
}

TEST(BuildPairs, CriticGroupsByOutput) {
  auto mk = [](int value, int proposal_value, int critic_reward) {
    auto r = record("a", value, 1 - critic_reward);
    r.proposal = FactualProposal{1, 0, proposal_value};
    return r;
  };
  // two outputs; only the first has contrast
  std::vector<InteractionRecord> recs{mk(0, 0, 1), mk(0, 1, 0), mk(1, 0, 1), mk(1, 1, 1)};
  Rng rng(2);
  const auto d = build_pairs(recs, Player::Critic, 16, rng);
  ASSERT_EQ(d.pairs.size(), 1u);
  EXPECT_EQ(d.pairs[0].context, out(0));
}

TEST(ApplyUpdates, EmptyDatasetIsNoOp) {
  auto p = tabular({0.1, 0.2});
  const auto before = std::vector<double>(p.params().begin(), p.params().end());
  Rng rng(1);
  const auto trace = apply_updates(p, PreferenceDataset{}, GeneratorSnapshot(p), OptimizerConfig{}, rng);
  EXPECT_TRUE(trace.empty());
  EXPECT_EQ(std::vector<double>(p.params().begin(), p.params().end()), before);
  EXPECT_EQ(p.version(), 0u);
}

TEST(ApplyUpdates, RepeatedPairLossDecreases) {
  auto p = tabular({0.0, 0.0, 0.0});
  const GeneratorSnapshot ref(p);
  PreferenceDataset d;
  d.pairs.push_back({inst(), Player::Generator, out(1), out(2), {}});
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs_per_round = 5;
  Rng rng(1);
  const auto trace = apply_updates(p, d, ref, cfg, rng);
  ASSERT_EQ(trace.size(), 5u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LT(trace[i], trace[i - 1]);
}

TEST(ApplyUpdates, ZeroLearningRateKeepsBits) {
  auto p = tabular({0.3, -0.7, 0.2});
  const auto before = std::vector<double>(p.params().begin(), p.params().end());
  PreferenceDataset d;
  d.pairs.push_back({inst(), Player::Generator, out(0), out(1), {}});
  OptimizerConfig cfg;
  cfg.learning_rate = 0.0;
  Rng rng(1);
  apply_updates(p, d, GeneratorSnapshot(p), cfg, rng);
  EXPECT_EQ(std::vector<double>(p.params().begin(), p.params().end()), before);
}

TEST(ApplyUpdates, Reproducible) {
  auto task = rlac::testing::small_factual();
  GeneratorPolicy base(task->kind(), task->generator_shape(), task->generator_basis());
  PreferenceDataset d;
  Rng sample(3);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto& s = task->instructions()[i % 20];
    auto w = base.sample_output(s, sample), l = base.sample_output(s, sample);
    if (w != l) d.pairs.push_back({s, Player::Generator, w, l, {}});
  }
  auto a = base, b = base;
  Rng ra(9), rb(9);
  apply_updates(a, d, GeneratorSnapshot(base), OptimizerConfig{}, ra);
  apply_updates(b, d, GeneratorSnapshot(base), OptimizerConfig{}, rb);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
}

TEST(ApplyUpdates, DivergenceIsReported) {
  auto p = tabular({0.0, 0.0});
  PreferenceDataset d;
  d.pairs.push_back({inst(), Player::Generator, out(0), out(1), {}});
  OptimizerConfig cfg;
  cfg.learning_rate = std::numeric_limits<double>::infinity();
  Rng rng(1);
  try {
    apply_updates(p, d, GeneratorSnapshot(p), cfg, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivergedUpdate);
  }
}
