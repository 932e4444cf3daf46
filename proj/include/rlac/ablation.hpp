#pragma once

// Four-mode battery (RLAC, StaticCritic, NoisyValidator, RewardModel) on one
// config and seed, plus the direction checks on its round logs.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rlac/experiment.hpp"
#include "rlac/metrics.hpp"

namespace rlac {

struct AblationRuns {
  RunArtifacts rlac;
  RunArtifacts static_critic;
  RunArtifacts noisy;
  RunArtifacts reward_model;

  std::vector<RunArtifacts> all() const { return {rlac, static_critic, noisy, reward_model}; }
};

struct AblationTolerances {
  double noisy_gain_max = 0.03;        // noisy validator: final <= base + this
  double static_detection_drop = 0.05; // static critic: final <= round 1 - this
  double rlac_detection_band = 0.05;   // RLAC: final >= running max - this
};

struct DirectionCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline AblationRuns run_ablation(const ExperimentConfig& base, const std::filesystem::path& root = {},
                                 const std::function<void(const std::string&, const RoundLog&)>& on_round = {}) {
  auto one = [&](Mode m) {
    ExperimentConfig cfg = base;
    cfg.training.mode = m;
    cfg.name = base.name + "-" + to_string(m);
    ExperimentHooks hooks;
    if (on_round) hooks.on_round = [&, name = cfg.name](const RoundLog& r) { on_round(name, r); };
    return run_experiment(cfg, root.empty() ? root : root / to_string(m), hooks);
  };
  AblationRuns runs;
  runs.rlac = one(Mode::RLAC);
  runs.static_critic = one(Mode::StaticCritic);
  runs.noisy = one(Mode::NoisyValidator);
  runs.reward_model = one(Mode::RewardModel);
  return runs;
}

namespace detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

inline double detection_at(const RunArtifacts& run, std::size_t round) {
  if (round >= run.rounds.size() || !run.rounds[round].detection_rate)
    throw Error(ErrorCode::Config, "run '" + run.run_id + "' has no detection rate at round " + std::to_string(round));
  return *run.rounds[round].detection_rate;
}

}  // namespace detail

inline std::vector<DirectionCheck> ablation_checks(const AblationRuns& runs, const AblationTolerances& tol = {}) {
  using detail::num;
  std::vector<DirectionCheck> out;
  const double base = runs.rlac.rounds.front().precision;
  const auto& rl = runs.rlac.final_round();

  {
    const double fin = runs.noisy.final_round().precision;
    out.push_back({"noisy validator does not improve", fin <= base + tol.noisy_gain_max,
                   "final " + num(fin) + " vs base " + num(base) + " + " + num(tol.noisy_gain_max)});
  }
  {
    const auto& sc = runs.static_critic;
    const double first = detail::detection_at(sc, 1), last = detail::detection_at(sc, sc.rounds.size() - 1);
    double peak = 0.0;
    for (std::size_t r = 1; r < runs.rlac.rounds.size(); ++r) peak = std::max(peak, detail::detection_at(runs.rlac, r));
    const double rl_last = detail::detection_at(runs.rlac, runs.rlac.rounds.size() - 1);
    const bool pass = last <= first - tol.static_detection_drop && rl_last >= peak - tol.rlac_detection_band;
    out.push_back({"static critic detection decays, RLAC holds", pass,
                   "static " + num(first) + " -> " + num(last) + "; RLAC final " + num(rl_last) + " vs max " + num(peak)});
  }
  {
    const double sc = *runs.static_critic.final_round().validator_outcome_rate;
    const double r = *rl.validator_outcome_rate;
    out.push_back({"static critic outcome rate above RLAC", sc > r, "static " + num(sc) + " vs RLAC " + num(r)});
  }
  {
    const auto& rm = runs.reward_model.final_round();
    // RLAC's KL at the first round matching the reward-model run's final precision
    double matched_kl = rl.kl_from_base;
    for (const auto& r : runs.rlac.rounds)
      if (r.precision >= rm.precision) {
        matched_kl = r.kl_from_base;
        break;
      }
    const double rm_gain = rm.precision - base, rl_gain = rl.precision - base;
    const bool pass = rm.kl_from_base >= matched_kl && rm_gain < 0.5 * rl_gain;
    out.push_back({"reward model drifts without gains", pass,
                   "KL " + num(rm.kl_from_base) + " vs RLAC@matched " + num(matched_kl) + "; gain " + num(rm_gain) +
                       " vs half RLAC " + num(0.5 * rl_gain)});
  }
  return out;
}

}  // namespace rlac
