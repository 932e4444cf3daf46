#pragma once

// Self-checks shared by `rlac oracle-check` and the acceptance suite:
// product == min on binary vectors, worst-case rubric == enumerative reward
// == ground truth on sampled (s, a), and finite-difference gradients.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rlac/dpo.hpp"
#include "rlac/game.hpp"
#include "rlac/oracle.hpp"
#include "rlac/policy.hpp"
#include "rlac/rng.hpp"
#include "rlac/task.hpp"

namespace rlac {

struct OracleMismatch {
  std::string instruction;
  std::string output;
  std::string detail;
};

struct OracleReport {
  std::size_t vectors_checked = 0;
  std::size_t pairs_checked = 0;
  std::size_t validator_calls = 0;
  std::vector<OracleMismatch> mismatches;  // first few only
  std::size_t mismatch_count = 0;
  bool ok() const { return mismatch_count == 0; }

  void add(OracleMismatch m) {
    ++mismatch_count;
    if (mismatches.size() < 10) mismatches.push_back(std::move(m));
  }
};

/// Every 0/1 vector of length 1..max_exhaustive, then `random_vectors`
/// longer ones (length max_exhaustive+1 .. 4*max_exhaustive).
inline OracleReport min_identity_sweep(std::size_t max_exhaustive, std::size_t random_vectors, std::uint64_t seed) {
  OracleReport rep;
  std::vector<int> v;
  auto check = [&] {
    ++rep.vectors_checked;
    if (product_reward(v) != min_reward(v)) {
      std::string s;
      for (int x : v) s += static_cast<char>('0' + x);
      rep.add({"", s, "product != min"});
    }
  };
  for (std::size_t n = 1; n <= max_exhaustive; ++n) {
    v.assign(n, 0);
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
      for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<int>((bits >> i) & 1u);
      check();
    }
  }
  auto rng = make_stream(seed, {tag("identity")});
  std::uniform_int_distribution<std::size_t> len(max_exhaustive + 1, 4 * max_exhaustive + 1);
  std::bernoulli_distribution one(0.9);  // mostly ones so all-one vectors occur
  for (std::size_t k = 0; k < random_vectors; ++k) {
    v.resize(len(rng));
    for (auto& x : v) x = one(rng) ? 1 : 0;
    if (k % 4 == 0) std::fill(v.begin(), v.end(), 1);
    check();
  }
  return rep;
}

/// Outputs are drawn half from the base generator and half uniformly.
inline OracleReport oracle_sweep(const Task& task, const Validator& validator, std::size_t samples,
                                 std::uint64_t seed) {
  OracleReport rep;
  const auto instructions = task.instructions();
  if (instructions.empty()) throw Error(ErrorCode::Config, "task has no instructions");
  if (!task.enumerable()) throw Error(ErrorCode::NotEnumerable, "oracle sweep needs an enumerable task");
  const GeneratorPolicy base(task.kind(), task.generator_shape(), task.generator_basis());
  const auto shape = task.generator_shape();
  auto rng = make_stream(seed, {tag("oracle-sweep")});
  std::uniform_int_distribution<std::size_t> pick(0, instructions.size() - 1);
  std::uniform_int_distribution<int> value(0, static_cast<int>(shape.values) - 1);
  for (std::size_t i = 0; i < samples; ++i) {
    const auto& s = instructions[pick(rng)];
    OutputValue a;
    if (i % 2 == 0) {
      a = base.sample_output(s, rng);
    } else {
      std::vector<int> vals(shape.slots);
      for (auto& x : vals) x = value(rng);
      a = task.kind() == TaskKind::Factual ? OutputValue::factual_from_values(vals)
                                           : OutputValue::code_from_table(std::move(vals));
    }
    const auto rubrics = task.enumerate_rubrics(s, a);
    std::vector<int> verdicts;
    for (std::size_t k = 0; k < rubrics.size(); ++k)
      verdicts.push_back(assign_rewards(validator.validate(s, a, rubrics[k], derive_seed(i, {k}))).generator_reward);
    const auto enumerative = enumerative_reward(s, a, task, validator, i);
    const auto worst = worst_case_rubric(s, a, task, validator, i);
    const bool truth = task.exact_output_score(s, a).num_incorrect == 0;
    rep.validator_calls += verdicts.size() + enumerative.calls + worst.calls;
    ++rep.pairs_checked;
    std::string why;
    if (product_reward(verdicts) != min_reward(verdicts)) why = "product != min over verdicts";
    else if (enumerative.reward != worst.value) why = "enumerative reward != worst-case rubric value";
    else if (enumerative.reward != (truth ? 1 : 0)) why = "enumerative reward disagrees with ground truth";
    if (!why.empty()) rep.add({s.id, a.canonical(), why});
  }
  return rep;
}

struct GradientReport {
  std::size_t points = 0;
  std::size_t components = 0;
  double max_rel_error = 0.0;
};

namespace detail {

/// |a - n| / max(|a|, |n|, floor): relative for ordinary components,
/// absolute (scaled by 1/floor) for near-zero ones.
inline double rel_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

template <class Policy, class Loss>
void fd_compare(Policy& policy, const SparseGradient& analytic, Loss loss, double h, Rng& rng, GradientReport& rep) {
  auto dense = densify(analytic);
  std::vector<std::size_t> idx;
  for (const auto& [k, g] : dense) idx.push_back(k);
  std::sort(idx.begin(), idx.end());
  // a few components outside the support, which must be zero
  std::uniform_int_distribution<std::size_t> any(0, policy.num_params() - 1);
  for (int extra = 0; extra < 3; ++extra) idx.push_back(any(rng));
  auto params = policy.mutable_params();
  for (std::size_t k : idx) {
    const double saved = params[k];
    params[k] = saved + h;
    const double up = loss();
    params[k] = saved - h;
    const double down = loss();
    params[k] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = dense.count(k) ? dense[k] : 0.0;
    rep.max_rel_error = std::max(rep.max_rel_error, rel_error(a, numeric));
    ++rep.components;
  }
}

template <class Policy>
void perturb(Policy& p, Rng& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& x : p.mutable_params()) x += n(rng);
}

}  // namespace detail

/// grad_log_prob and dpo_gradient of the generator at `points` random
/// parameter settings, against central differences with step h.
inline GradientReport generator_gradient_check(const Task& task, std::size_t points, std::uint64_t seed,
                                               double h = 1e-5, double beta = 0.1) {
  GradientReport rep;
  auto rng = make_stream(seed, {tag("gradcheck-generator")});
  const auto train = task.instructions();
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  for (std::size_t i = 0; i < points; ++i) {
    GeneratorPolicy policy(task.kind(), task.generator_shape(), task.generator_basis());
    GeneratorPolicy ref_policy = policy;
    detail::perturb(policy, rng, 0.5);
    detail::perturb(ref_policy, rng, 0.5);
    const GeneratorSnapshot ref(ref_policy);
    const auto& s = train[pick(rng)];
    const auto w = policy.sample_output(s, rng);
    auto l = policy.sample_output(s, rng);
    for (int tries = 0; tries < 8 && l == w; ++tries) l = policy.sample_output(s, rng);

    detail::fd_compare(policy, policy.grad_log_prob(s, w), [&] { return policy.log_prob_output(s, w); }, h, rng, rep);
    const PreferencePair pair{s, Player::Generator, w, l, {}};
    const auto term = dpo_gradient(pair, policy, ref, beta);
    detail::fd_compare(policy, term.gradient, [&] { return dpo_pair_loss(pair, policy, ref, beta); }, h, rng, rep);
    ++rep.points;
  }
  return rep;
}

inline GradientReport critic_gradient_check(const Task& task, std::size_t points, std::uint64_t seed, double h = 1e-5,
                                            double beta = 0.1) {
  GradientReport rep;
  auto rng = make_stream(seed, {tag("gradcheck-critic")});
  const auto train = task.instructions();
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  const GeneratorPolicy gen(task.kind(), task.generator_shape(), task.generator_basis());
  for (std::size_t i = 0; i < points; ++i) {
    CriticPolicy critic(task.critic_basis());
    CriticPolicy ref_policy = critic;
    detail::perturb(critic, rng, 0.5);
    detail::perturb(ref_policy, rng, 0.5);
    const CriticSnapshot ref(ref_policy);
    const auto& s = train[pick(rng)];
    const auto a = gen.sample_output(s, rng);
    const auto set = critic.candidates(s, a);
    std::uniform_int_distribution<std::size_t> cand(0, set.proposals.size() - 1);
    const auto cw = set.proposals[cand(rng)];
    auto cl = set.proposals[cand(rng)];
    for (int tries = 0; tries < 8 && cl == cw; ++tries) cl = set.proposals[cand(rng)];

    detail::fd_compare(critic, critic.grad_log_prob(s, a, cw), [&] { return critic.log_prob_rubric(s, a, cw); }, h,
                       rng, rep);
    const PreferencePair pair{s, Player::Critic, cw, cl, a};
    const auto term = dpo_gradient(pair, critic, ref, beta);
    detail::fd_compare(critic, term.gradient, [&] { return dpo_pair_loss(pair, critic, ref, beta); }, h, rng, rep);
    ++rep.points;
  }
  return rep;
}

}  // namespace rlac
