#pragma once

// Frozen proxy reward model: a linear scorer over value-identity features,
// fitted once on offline pairs from the base policy and never updated.

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "rlac/error.hpp"
#include "rlac/policy.hpp"
#include "rlac/rng.hpp"
#include "rlac/task.hpp"

namespace rlac {

class RewardModelBaseline {
 public:
  RewardModelBaseline(std::shared_ptr<const Task> task, std::vector<double> weights, double heldout_accuracy)
      : task_(std::move(task)), weights_(std::move(weights)), heldout_accuracy_(heldout_accuracy) {}

  double score(const Instruction& s, const OutputValue& a) const { return dot(task_->reward_features(s, a), weights_); }
  /// Positive when the model prefers `a` over `b`.
  double preference(const Instruction& s, const OutputValue& a, const OutputValue& b) const {
    return score(s, a) - score(s, b);
  }
  std::span<const double> weights() const { return weights_; }
  double heldout_accuracy() const { return heldout_accuracy_; }

 private:
  std::shared_ptr<const Task> task_;
  std::vector<double> weights_;
  double heldout_accuracy_;
};

struct RewardModelFitOptions {
  std::size_t iterations = 400;
  double learning_rate = 0.5;
  double l2 = 1e-3;
  double heldout_fraction = 0.25;
};

namespace detail {

struct LabeledPair {
  SparseRow diff;  // features(preferred) - features(other)
};

inline std::vector<LabeledPair> sample_offline_pairs(const GeneratorPolicy& base, const Task& task, std::size_t count,
                                                     Rng& rng) {
  std::vector<LabeledPair> out;
  const auto train = task.train_instructions();
  if (train.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& s = train[pick(rng)];
    const auto a = base.sample_output(s, rng);
    const auto b = base.sample_output(s, rng);
    const auto sa = task.exact_output_score(s, a), sb = task.exact_output_score(s, b);
    const double pa = static_cast<double>(sa.num_correct) / static_cast<double>(sa.num_correct + sa.num_incorrect);
    const double pb = static_cast<double>(sb.num_correct) / static_cast<double>(sb.num_correct + sb.num_incorrect);
    if (pa == pb) continue;
    const auto& [win, lose] = pa > pb ? std::pair{&a, &b} : std::pair{&b, &a};
    LabeledPair p;
    p.diff = task.reward_features(s, *win);
    add_scaled(p.diff, task.reward_features(s, *lose), -1.0);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace detail

/// Offline pairs from the base policy, labeled by true precision, fitted by
/// L2-regularized pairwise logistic regression (full-batch gradient descent).
inline RewardModelBaseline fit_reward_model(const GeneratorPolicy& base, std::shared_ptr<const Task> task,
                                            std::size_t pair_count, Rng& rng,
                                            const RewardModelFitOptions& opt = {}) {
  auto pairs = detail::sample_offline_pairs(base, *task, pair_count, rng);
  if (pairs.size() < 2) throw Error(ErrorCode::FitFailed, "offline preference data is degenerate (all ties)");
  const auto n_holdout = std::max<std::size_t>(1, static_cast<std::size_t>(opt.heldout_fraction * pairs.size()));
  const std::size_t n_train = pairs.size() - n_holdout;
  if (n_train == 0) throw Error(ErrorCode::FitFailed, "not enough offline pairs to fit");

  std::vector<double> w(task->reward_feature_dim(), 0.0);
  std::vector<double> g(w.size());
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < n_train; ++i) {
      const double z = dot(pairs[i].diff, w);
      const double coeff = -1.0 / (1.0 + std::exp(z));  // d/dz log(1 + e^-z)
      for (const auto& [k, x] : pairs[i].diff) g[k] += coeff * x;
    }
    for (std::size_t k = 0; k < w.size(); ++k)
      w[k] -= opt.learning_rate * (g[k] / static_cast<double>(n_train) + opt.l2 * w[k]);
  }
  for (double x : w)
    if (!std::isfinite(x)) throw Error(ErrorCode::FitFailed, "reward model weights diverged");

  std::size_t correct = 0;
  for (std::size_t i = n_train; i < pairs.size(); ++i)
    if (dot(pairs[i].diff, w) > 0) ++correct;
  const double acc = static_cast<double>(correct) / static_cast<double>(n_holdout);
  return RewardModelBaseline(std::move(task), std::move(w), acc);
}

}  // namespace rlac
