#pragma once

// Pairwise DPO for both players: loss, exact gradient through the policy's
// score function, preference-pair construction from binary rewards and a
// per-pair SGD loop.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rlac/error.hpp"
#include "rlac/game.hpp"
#include "rlac/policy.hpp"
#include "rlac/rng.hpp"

namespace rlac {

enum class Player { Generator, Critic };

inline std::string to_string(Player p) { return p == Player::Generator ? "generator" : "critic"; }

using Choice = std::variant<OutputValue, RubricProposal>;

inline std::string canonical(const Choice& c) {
  return std::visit([](const auto& x) { return x.canonical(); }, c);
}

struct PreferencePair {
  Instruction instruction;
  Player player = Player::Generator;
  Choice winner;
  Choice loser;
  OutputValue context;  // the critiqued output, critic pairs only
};

struct PreferenceDataset {
  std::vector<PreferencePair> pairs;
  std::size_t round = 0;
  std::string source = "rlac";  // rlac | enumerative | reward-model
};

struct OptimizerConfig {
  double beta = 0.1;
  double learning_rate = 0.05;
  std::size_t epochs_per_round = 3;
  std::size_t pair_cap_per_instruction = 16;
};

/// -ln sigmoid(beta * margin) in softplus form.
inline double dpo_loss(double lp_w, double lp_l, double ref_lp_w, double ref_lp_l, double beta) {
  if (!std::isfinite(lp_w) || !std::isfinite(lp_l) || !std::isfinite(ref_lp_w) || !std::isfinite(ref_lp_l) ||
      !std::isfinite(beta))
    throw Error(ErrorCode::NonFinite, "dpo_loss input is not finite");
  const double x = -beta * ((lp_w - ref_lp_w) - (lp_l - ref_lp_l));
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct DpoTerm {
  double loss = 0.0;
  double margin = 0.0;  // (lp_w - ref_w) - (lp_l - ref_l)
  SparseGradient gradient;
};

namespace detail {

inline double log_prob(const GeneratorPolicy& p, const PreferencePair& pair, const Choice& c) {
  return p.log_prob_output(pair.instruction, std::get<OutputValue>(c));
}
inline double log_prob(const CriticPolicy& p, const PreferencePair& pair, const Choice& c) {
  return p.log_prob_rubric(pair.instruction, pair.context, std::get<RubricProposal>(c));
}
inline SparseGradient grad(const GeneratorPolicy& p, const PreferencePair& pair, const Choice& c) {
  return p.grad_log_prob(pair.instruction, std::get<OutputValue>(c));
}
inline SparseGradient grad(const CriticPolicy& p, const PreferencePair& pair, const Choice& c) {
  return p.grad_log_prob(pair.instruction, pair.context, std::get<RubricProposal>(c));
}

}  // namespace detail

/// Gradient of the pair's DPO loss w.r.t. the policy parameters:
/// -sigmoid(-beta*margin) * beta * (score(winner) - score(loser)).
/// The reference only contributes constants.
template <class Policy>
DpoTerm dpo_gradient(const PreferencePair& pair, const Policy& policy, const PolicySnapshot<Policy>& reference,
                     double beta) {
  const auto& ref = reference.policy();
  const double lp_w = detail::log_prob(policy, pair, pair.winner);
  const double lp_l = detail::log_prob(policy, pair, pair.loser);
  const double ref_w = detail::log_prob(ref, pair, pair.winner);
  const double ref_l = detail::log_prob(ref, pair, pair.loser);
  DpoTerm term;
  term.loss = dpo_loss(lp_w, lp_l, ref_w, ref_l, beta);
  term.margin = (lp_w - ref_w) - (lp_l - ref_l);
  const double coeff = -beta / (1.0 + std::exp(beta * term.margin));
  add_scaled(term.gradient, detail::grad(policy, pair, pair.winner), coeff);
  add_scaled(term.gradient, detail::grad(policy, pair, pair.loser), -coeff);
  return term;
}

template <class Policy>
double dpo_pair_loss(const PreferencePair& pair, const Policy& policy, const PolicySnapshot<Policy>& reference,
                     double beta) {
  const auto& ref = reference.policy();
  return dpo_loss(detail::log_prob(policy, pair, pair.winner), detail::log_prob(policy, pair, pair.loser),
                  detail::log_prob(ref, pair, pair.winner), detail::log_prob(ref, pair, pair.loser), beta);
}

/// Positives x negatives within each group (instruction for the generator,
/// (instruction, output) for the critic), shuffled and capped per group.
/// Groups are emitted in order of first appearance in `records`.
inline PreferenceDataset build_pairs(const std::vector<InteractionRecord>& records, Player player, std::size_t cap,
                                     Rng& rng) {
  PreferenceDataset out;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const InteractionRecord*>> groups;
  for (const auto& r : records) {
    std::string key = r.instruction.id;
    if (player == Player::Critic) key += "\x1f" + r.output.canonical();
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  for (const auto& key : order) {
    const auto& group = groups[key];
    std::vector<const InteractionRecord*> pos, neg;
    for (const auto* r : group) {
      const int label = player == Player::Generator ? r->rewards.generator_reward : r->rewards.critic_reward;
      (label == 1 ? pos : neg).push_back(r);
    }
    std::vector<PreferencePair> local;
    for (const auto* w : pos) {
      for (const auto* l : neg) {
        PreferencePair pair;
        pair.instruction = w->instruction;
        pair.player = player;
        if (player == Player::Generator) {
          if (w->output == l->output) continue;
          pair.winner = w->output;
          pair.loser = l->output;
        } else {
          if (w->proposal == l->proposal) continue;
          pair.winner = w->proposal;
          pair.loser = l->proposal;
          pair.context = w->output;
        }
        local.push_back(std::move(pair));
      }
    }
    std::shuffle(local.begin(), local.end(), rng);
    if (local.size() > cap) local.resize(cap);
    for (auto& p : local) out.pairs.push_back(std::move(p));
  }
  out.source = "rlac";
  return out;
}

/// epochs_per_round passes of per-pair gradient steps in shuffled order.
/// Returns the mean pre-step loss of each epoch; empty when there is nothing
/// to learn from.
template <class Policy>
std::vector<double> apply_updates(Policy& policy, const PreferenceDataset& dataset,
                                  const PolicySnapshot<Policy>& reference, const OptimizerConfig& cfg, Rng& rng) {
  std::vector<double> trace;
  if (dataset.pairs.empty()) return trace;
  std::vector<std::size_t> idx(dataset.pairs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto params = policy.mutable_params();
  for (std::size_t epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double sum = 0.0;
    for (std::size_t i : idx) {
      const auto term = dpo_gradient(dataset.pairs[i], policy, reference, cfg.beta);
      sum += term.loss;
      for (const auto& [k, g] : term.gradient) params[k] -= cfg.learning_rate * g;
      for (const auto& [k, g] : term.gradient)
        if (!std::isfinite(params[k]))
          throw Error(ErrorCode::DivergedUpdate, "parameter " + std::to_string(k) + " became non-finite in epoch " +
                                                     std::to_string(epoch) + " (loss " + std::to_string(term.loss) + ")");
    }
    trace.push_back(sum / static_cast<double>(idx.size()));
  }
  policy.bump_version();
  return trace;
}

}  // namespace rlac
