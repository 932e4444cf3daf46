#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "rlac/checks.hpp"
#include "rlac/policy.hpp"
#include "support.hpp"

using namespace rlac;

namespace {

Instruction inst(std::size_t payload = 0) { return {"s" + std::to_string(payload), TaskKind::Factual, payload}; }

GeneratorPolicy tabular(std::size_t slots, std::size_t values, std::vector<double> table = {}) {
  if (table.empty()) table.assign(slots * values, 0.0);
  return GeneratorPolicy(TaskKind::Factual, {1, slots, values}, std::move(table));
}

/// One candidate per feature, as a critic basis with a one-hot row each.
class OneHotBasis final : public CriticBasis {
 public:
  explicit OneHotBasis(std::size_t n) : n_(n) {}
  std::size_t dim() const override { return n_; }
  CandidateSet candidates(const Instruction&, const OutputValue&) const override {
    CandidateSet set;
    for (std::size_t i = 0; i < n_; ++i) {
      set.proposals.emplace_back(FactualProposal{static_cast<int>(i + 1), static_cast<int>(i), 0});
      set.features.push_back({{i, 1.0}});
    }
    return set;
  }

 private:
  std::size_t n_;
};

const OutputValue kAnyOutput = OutputValue::factual_from_values(std::vector<int>(8, 0));

}  // namespace

TEST(SampleOutput, UniformPassesChiSquare) {
  auto p = tabular(1, 4);
  Rng rng(123);
  std::vector<int> counts(4, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(p.sample_output(inst(), rng).slot_values()[0])];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
  EXPECT_LT(chi2, 16.27);  // 3 dof, p = 0.001
}

TEST(SampleOutput, PeakedLogitDominates) {
  auto p = tabular(1, 4, {0, 0, 20, 0});
  Rng rng(1);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += p.sample_output(inst(), rng).slot_values()[0] == 2;
  EXPECT_GE(hits / 10000.0, 0.999);
}

TEST(SampleOutput, SameSeedSameOutput) {
  auto task = rlac::testing::small_factual();
  GeneratorPolicy p(task->kind(), task->generator_shape(), task->generator_basis());
  Rng a(42), b(42);
  EXPECT_EQ(p.sample_output(task->instructions()[3], a), p.sample_output(task->instructions()[3], b));
}

TEST(LogProb, UniformTwoSlotsEightValues) {
  auto p = tabular(2, 8);
  EXPECT_NEAR(p.log_prob_output(inst(), OutputValue::factual_from_values(std::vector{3, 5})), -2 * std::log(8.0), 1e-12);
  EXPECT_NEAR(-2 * std::log(8.0), -4.158883, 1e-6);
}

TEST(LogProb, MatchesMonteCarloFrequency) {
  auto p = tabular(2, 3, {0.5, -0.2, 1.0, 0.0, 0.3, -1.0});
  const auto target = OutputValue::factual_from_values(std::vector{2, 1});
  const double prob = std::exp(p.log_prob_output(inst(), target));
  Rng rng(77);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += p.sample_output(inst(), rng) == target;
  const double sigma = std::sqrt(prob * (1 - prob) / n);
  EXPECT_NEAR(hits / double(n), prob, 3 * sigma);
}

TEST(LogProb, ArgmaxUnderPeakedLogits) {
  std::vector<double> t(3 * 5, 0.0);
  for (std::size_t j = 0; j < 3; ++j) t[j * 5 + j] = 30.0;
  auto p = tabular(3, 5, t);
  EXPECT_GT(p.log_prob_output(inst(), p.mode_output(inst())), -0.01);
}

TEST(LogProb, RejectsForeignOutputs) {
  auto p = tabular(2, 4);
  EXPECT_THROW(p.log_prob_output(inst(), OutputValue::factual_from_values(std::vector{1, 9})), Error);
  EXPECT_THROW(p.log_prob_output(inst(), OutputValue::factual_from_values(std::vector{1})), Error);
  EXPECT_THROW(p.log_prob_output(inst(5), OutputValue::factual_from_values(std::vector{1, 1})), Error);
}

TEST(Critic, ZeroWeightsAreUniform) {
  CriticPolicy c(std::make_shared<OneHotBasis>(8));
  const auto probs = c.probabilities(inst(), kAnyOutput);
  for (double p : probs) EXPECT_NEAR(p, 0.125, 1e-15);
  const auto any = c.candidates(inst(), kAnyOutput).proposals[5];
  EXPECT_NEAR(c.log_prob_rubric(inst(), kAnyOutput, any), -std::log(8.0), 1e-12);
  EXPECT_NEAR(-std::log(8.0), -2.079442, 1e-6);
}

TEST(Critic, HeavyWeightSelectsCandidate) {
  CriticPolicy c(std::make_shared<OneHotBasis>(8));
  c.mutable_params()[3] = 20.0;
  const auto target = c.candidates(inst(), kAnyOutput).proposals[3];
  Rng rng(3);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += c.sample_rubric(inst(), kAnyOutput, rng) == target;
  EXPECT_GE(hits / 10000.0, 0.999);
}

TEST(Critic, FactualProposalsStayInsideTheOutput) {
  auto task = rlac::testing::small_factual();
  CriticPolicy c(task->critic_basis());
  Rng rng(8);
  for (auto& w : c.mutable_params()) w = std::normal_distribution<double>(0, 1)(rng);
  GeneratorPolicy g(task->kind(), task->generator_shape(), task->generator_basis());
  for (int i = 0; i < 500; ++i) {
    const auto& s = task->instructions()[static_cast<std::size_t>(i) % 30];
    const auto a = g.sample_output(s, rng);
    const auto prop = c.sample_rubric(s, a, rng);
    ASSERT_NE(prop.factual(), nullptr);
    EXPECT_GE(prop.factual()->claim_index, 1);
    EXPECT_LE(prop.factual()->claim_index, 8);
  }
}

TEST(Critic, ProbabilitiesNormalizeAndMatchSampling) {
  auto task = rlac::testing::small_code();
  CriticPolicy c(task->critic_basis());
  Rng rng(5);
  for (auto& w : c.mutable_params()) w = std::normal_distribution<double>(0, 0.7)(rng);
  GeneratorPolicy g(task->kind(), task->generator_shape(), task->generator_basis());
  const auto& s = task->instructions()[1];
  const auto a = g.sample_output(s, rng);
  const auto probs = c.probabilities(s, a);
  EXPECT_NEAR(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-12);

  const auto set = c.candidates(s, a);
  const std::size_t k = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  const int n = 50000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += c.sample_rubric(s, a, rng) == set.proposals[k];
  EXPECT_NEAR(hits / double(n), probs[k], 3 * std::sqrt(probs[k] * (1 - probs[k]) / n));
}

TEST(GradLogProb, TwoValueUniformSlot) {
  auto p = tabular(1, 2);
  const auto g = densify(p.grad_log_prob(inst(), OutputValue::factual_from_values(std::vector{1})));
  EXPECT_DOUBLE_EQ(g.at(0), -0.5);
  EXPECT_DOUBLE_EQ(g.at(1), 0.5);
}

TEST(GradLogProb, SumsToZeroPerSlot) {
  auto p = tabular(3, 6, {});
  Rng rng(2);
  for (auto& x : p.mutable_params()) x = std::normal_distribution<double>(0, 2)(rng);
  const auto g = densify(p.grad_log_prob(inst(), p.sample_output(inst(), rng)));
  for (std::size_t j = 0; j < 3; ++j) {
    double sum = 0.0;
    for (std::size_t v = 0; v < 6; ++v) sum += g.count(j * 6 + v) ? g.at(j * 6 + v) : 0.0;
    EXPECT_NEAR(sum, 0.0, 1e-12);
  }
}

TEST(GradLogProb, MatchesFiniteDifferences) {
  auto ft = rlac::testing::small_factual();
  auto ct = rlac::testing::small_code();
  for (const Task* t : {static_cast<const Task*>(ft.get()), static_cast<const Task*>(ct.get())}) {
    const auto g = generator_gradient_check(*t, 20, 11);
    const auto c = critic_gradient_check(*t, 20, 11);
    EXPECT_EQ(g.points, 20u);
    EXPECT_LE(g.max_rel_error, 1e-6);
    EXPECT_LE(c.max_rel_error, 1e-6);
  }
}

TEST(Kl, SelfIsZero) {
  auto task = rlac::testing::small_factual();
  GeneratorPolicy p(task->kind(), task->generator_shape(), task->generator_basis());
  EXPECT_EQ(kl_to_base(p, GeneratorSnapshot(p), task->eval_instructions()), 0.0);
}

TEST(Kl, ClosedFormTwoValues) {
  auto p = tabular(1, 2, {0.0, 0.0});
  auto q = tabular(1, 2, {std::log(0.25), std::log(0.75)});
  const std::vector<Instruction> s{inst()};
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  EXPECT_NEAR(kl_to_base(p, GeneratorSnapshot(q), s), expected, 1e-12);
  EXPECT_NEAR(expected, 0.143841, 1e-6);
}

TEST(Kl, NonNegativeForRandomPairs) {
  Rng rng(4);
  std::normal_distribution<double> n(0, 2);
  const std::vector<Instruction> s{inst()};
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(12), b(12);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    ASSERT_GE(kl_to_base(tabular(3, 4, a), GeneratorSnapshot(tabular(3, 4, b)), s), 0.0);
  }
}

TEST(Kl, ShapeMismatchThrows) {
  const std::vector<Instruction> s{inst()};
  EXPECT_THROW(kl_to_base(tabular(1, 2), GeneratorSnapshot(tabular(1, 3)), s), Error);
}
