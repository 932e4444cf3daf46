#pragma once

// Outer training loop: policy evaluation (sample, critique, validate), pair
// construction and DPO improvement for each player, for RLAC and the
// comparison modes.

#include <algorithm>
#include <future>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rlac/dpo.hpp"
#include "rlac/error.hpp"
#include "rlac/game.hpp"
#include "rlac/metrics.hpp"
#include "rlac/oracle.hpp"
#include "rlac/policy.hpp"
#include "rlac/reward_model.hpp"
#include "rlac/rng.hpp"
#include "rlac/task.hpp"

namespace rlac {

enum class Mode { RLAC, Enumerative, StaticCritic, NoisyValidator, RewardModel };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::RLAC: return "RLAC";
    case Mode::Enumerative: return "Enumerative";
    case Mode::StaticCritic: return "StaticCritic";
    case Mode::NoisyValidator: return "NoisyValidator";
    case Mode::RewardModel: return "RewardModel";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::RLAC, Mode::Enumerative, Mode::StaticCritic, Mode::NoisyValidator, Mode::RewardModel})
    if (to_string(m) == s) return m;
  throw Error(ErrorCode::Config, "unknown mode '" + s + "'");
}

struct TrainingConfig {
  Mode mode = Mode::RLAC;
  std::size_t outputs_per_prompt = 10;   // K
  std::size_t critic_proposals = 4;      // N, critic-phase proposals per (s, a)
  std::size_t proposals_per_output_reward = 1;
  bool critic_phase = true;
  std::size_t rounds = 20;
  std::size_t batch = 120;               // training instructions per round
  OptimizerConfig generator_optimizer;
  OptimizerConfig critic_optimizer;
  std::uint64_t seed = 0;
  std::uint64_t noise_seed = 0;
  std::size_t eval_samples = 10;         // sampled outputs per held-out instruction
  std::size_t reward_model_pairs = 4000;
  bool parallel_rollouts = false;

  bool trains_critic() const { return (mode == Mode::RLAC || mode == Mode::NoisyValidator) && critic_phase; }

  void validate() const {
    auto positive = [](const OptimizerConfig& o) {
      return o.beta > 0 && o.learning_rate > 0 && o.epochs_per_round > 0 && o.pair_cap_per_instruction > 0;
    };
    if (outputs_per_prompt < 2) throw Error(ErrorCode::Config, "outputs_per_prompt (K) must be at least 2");
    if (trains_critic() && critic_proposals < 2) throw Error(ErrorCode::Config, "critic_proposals (N) must be at least 2");
    if (proposals_per_output_reward < 1) throw Error(ErrorCode::Config, "proposals_per_output_reward must be >= 1");
    if (batch == 0) throw Error(ErrorCode::Config, "batch must be positive");
    if (eval_samples == 0) throw Error(ErrorCode::Config, "eval_samples must be positive");
    if (!positive(generator_optimizer) || !positive(critic_optimizer))
      throw Error(ErrorCode::Config, "optimizer settings must be strictly positive");
  }
};

struct CallLedger {
  std::uint64_t training = 0;
  std::uint64_t evaluation = 0;
};

class TrainerState {
 public:
  TrainerState(std::shared_ptr<const Task> task, TrainingConfig cfg)
      : task_(std::move(task)),
        cfg_(std::move(cfg)),
        generator_(task_->kind(), task_->generator_shape(), task_->generator_basis()),
        critic_(task_->critic_basis()),
        generator_ref_(generator_),
        base_generator_(generator_),
        critic_ref_(critic_) {
    cfg_.validate();
    if (task_->train_instructions().empty() || task_->eval_instructions().empty())
      throw Error(ErrorCode::Config, "task needs both training and held-out instructions");
    std::shared_ptr<const Validator> exact(task_, static_cast<const Validator*>(task_.get()));
    validator_ = cfg_.mode == Mode::NoisyValidator
                     ? wrap_noise(exact, {NoiseMode::RandomLabels, cfg_.noise_seed})
                     : exact;
  }

  const Task& task() const { return *task_; }
  std::shared_ptr<const Task> task_ptr() const { return task_; }
  const TrainingConfig& config() const { return cfg_; }
  const GeneratorPolicy& generator() const { return generator_; }
  const CriticPolicy& critic() const { return critic_; }
  GeneratorPolicy& generator() { return generator_; }
  CriticPolicy& critic() { return critic_; }
  const GeneratorSnapshot& generator_reference() const { return generator_ref_; }
  const CriticSnapshot& critic_reference() const { return critic_ref_; }
  const GeneratorSnapshot& base_generator() const { return base_generator_; }
  const CallLedger& ledger() const { return ledger_; }
  std::size_t round() const { return round_; }
  const std::optional<RewardModelBaseline>& reward_model() const { return reward_model_; }

  void set_validator(std::shared_ptr<const Validator> v) { validator_ = std::move(v); }
  const Validator& validator() const { return *validator_; }

  /// Frozen proxy for RewardModel mode; fitted from the base policy.
  void fit_reward_model() {
    auto rng = make_stream(cfg_.seed, {tag("reward-model")});
    reward_model_.emplace(rlac::fit_reward_model(base_generator_.policy(), task_, cfg_.reward_model_pairs, rng));
  }

  /// Held-out evaluation; never mutates the policies and never touches the
  /// training call counter. Uses the same sample streams every round.
  RoundLog evaluate() {
    RoundLog log;
    log.round = round_;
    std::uint64_t exact = 0;
    for (const auto& s : task_->eval_instructions()) {
      for (std::size_t i = 0; i < cfg_.eval_samples; ++i) {
        auto rng = make_stream(cfg_.seed, {tag("eval"), s.payload, i});
        const auto a = generator_.sample_output(s, rng);
        const auto score = task_->exact_output_score(s, a);
        ledger_.evaluation += 1;
        log.num_correct += score.num_correct;
        log.num_incorrect += score.num_incorrect;
        log.num_outputs += 1;
        if (score.num_incorrect == 0) ++exact;
      }
    }
    log.precision = precision(static_cast<double>(log.num_correct), static_cast<double>(log.num_incorrect));
    log.exact_match_rate = static_cast<double>(exact) / static_cast<double>(log.num_outputs);
    log.kl_from_base = kl_to_base(generator_, base_generator_, task_->eval_instructions());
    log.validator_calls_cumulative = ledger_.training;
    return log;
  }

  /// One round of the configured mode followed by held-out evaluation.
  RoundLog run_round() {
    ++round_;
    const auto batch = batch_instructions();
    Rollout roll = cfg_.mode == Mode::RewardModel ? Rollout{} : collect(batch);
    ledger_.training += roll.calls;

    PreferenceDataset gen_pairs;
    if (cfg_.mode == Mode::RewardModel) {
      gen_pairs = reward_model_pairs(batch);
    } else {
      auto rng = make_stream(cfg_.seed, {tag("generator-pairs"), round_});
      gen_pairs = build_pairs(roll.generator_records, Player::Generator,
                              cfg_.generator_optimizer.pair_cap_per_instruction, rng);
      gen_pairs.source = cfg_.mode == Mode::Enumerative ? "enumerative" : "rlac";
    }
    gen_pairs.round = round_;

    PreferenceDataset critic_pairs;
    if (cfg_.trains_critic()) {
      auto rng = make_stream(cfg_.seed, {tag("critic-pairs"), round_});
      critic_pairs = build_pairs(roll.critic_records, Player::Critic, cfg_.critic_optimizer.pair_cap_per_instruction, rng);
      critic_pairs.round = round_;
    }

    auto gen_rng = make_stream(cfg_.seed, {tag("generator-update"), round_});
    const auto gen_trace = apply_updates(generator_, gen_pairs, generator_ref_, cfg_.generator_optimizer, gen_rng);
    generator_ref_ = GeneratorSnapshot(generator_);

    std::vector<double> critic_trace;
    if (cfg_.trains_critic()) {
      auto crit_rng = make_stream(cfg_.seed, {tag("critic-update"), round_});
      critic_trace = apply_updates(critic_, critic_pairs, critic_ref_, cfg_.critic_optimizer, crit_rng);
      critic_ref_ = CriticSnapshot(critic_);
    }

    RoundLog log = evaluate();
    if (roll.valid_proposals > 0) {
      log.detection_rate = static_cast<double>(roll.detected) / static_cast<double>(roll.valid_proposals);
      log.validator_outcome_rate = 1.0 - *log.detection_rate;
    }
    if (roll.proposals > 0)
      log.invalid_rate = static_cast<double>(roll.proposals - roll.valid_proposals) / static_cast<double>(roll.proposals);
    if (roll.claims > 0) log.train_precision = static_cast<double>(roll.correct_claims) / static_cast<double>(roll.claims);
    if (!gen_trace.empty()) log.loss_generator = gen_trace.back();
    if (!critic_trace.empty()) log.loss_critic = critic_trace.back();
    log.generator_pairs = gen_pairs.pairs.size();
    log.critic_pairs = critic_pairs.pairs.size();
    return log;
  }

  std::vector<Instruction> batch_instructions() const {
    const auto train = task_->train_instructions();
    std::vector<Instruction> out(train.begin(), train.end());
    if (cfg_.batch < out.size()) {
      auto rng = make_stream(cfg_.seed, {tag("batch"), round_});
      std::shuffle(out.begin(), out.end(), rng);
      out.resize(cfg_.batch);
      std::sort(out.begin(), out.end(), [](const Instruction& a, const Instruction& b) { return a.payload < b.payload; });
    }
    return out;
  }

 private:
  struct Rollout {
    std::vector<InteractionRecord> generator_records;
    std::vector<InteractionRecord> critic_records;
    std::uint64_t calls = 0;
    std::uint64_t proposals = 0;
    std::uint64_t valid_proposals = 0;
    std::uint64_t detected = 0;
    std::uint64_t claims = 0;
    std::uint64_t correct_claims = 0;

    void append(Rollout&& o) {
      std::move(o.generator_records.begin(), o.generator_records.end(), std::back_inserter(generator_records));
      std::move(o.critic_records.begin(), o.critic_records.end(), std::back_inserter(critic_records));
      calls += o.calls;
      proposals += o.proposals;
      valid_proposals += o.valid_proposals;
      detected += o.detected;
      claims += o.claims;
      correct_claims += o.correct_claims;
    }
  };

  std::uint64_t nonce(std::initializer_list<std::uint64_t> path) const { return derive_seed(cfg_.seed, path); }

  /// Policy evaluation for one instruction; a pure function of the current
  /// policies and the instruction, so instructions can run in any order.
  Rollout rollout(const Instruction& s) const {
    Rollout r;
    const bool critic_phase = cfg_.trains_critic();
    for (std::size_t k = 0; k < cfg_.outputs_per_prompt; ++k) {
      auto gen_rng = make_stream(cfg_.seed, {tag("generate"), round_, s.payload, k});
      auto a = generator_.sample_output(s, gen_rng);
      const auto truth = task_->exact_output_score(s, a);
      r.claims += truth.num_correct + truth.num_incorrect;
      r.correct_claims += truth.num_correct;

      InteractionRecord rec;
      rec.instruction = s;
      rec.output_index = k;
      if (cfg_.mode == Mode::Enumerative) {
        if (!task_->enumerable()) throw Error(ErrorCode::NotEnumerable, "enumerative mode needs an enumerable task");
        const auto rubrics = task_->enumerate_rubrics(s, a);
        int reward = 1;
        for (std::size_t i = 0; i < rubrics.size(); ++i) {
          const auto v = validator_->validate(s, a, rubrics[i], nonce({tag("enum"), round_, s.payload, k, i}));
          const int g = assign_rewards(v).generator_reward;
          if (g < reward || i == 0) {
            rec.proposal = rubrics[i];
            rec.verdict = v;
          }
          reward = std::min(reward, g);
        }
        rec.rewards = {reward, 1 - reward};
        rec.validator_calls_consumed = rubrics.size();
        r.calls += rubrics.size();
      } else {
        int reward = 1;
        for (std::size_t p = 0; p < cfg_.proposals_per_output_reward; ++p) {
          auto crit_rng = make_stream(cfg_.seed, {tag("critique"), round_, s.payload, k, p});
          const auto c = critic_.sample_rubric(s, a, crit_rng);
          const auto v = validator_->validate(s, a, c, nonce({tag("validate"), round_, s.payload, k, p}));
          ++r.calls;
          ++r.proposals;
          if (v.kind != Verdict::InvalidProposal) {
            ++r.valid_proposals;
            if (v.kind == Verdict::GeneratorFails) ++r.detected;
          }
          const int g = assign_rewards(v).generator_reward;
          if (p == 0 || g < reward) {
            rec.proposal = c;
            rec.verdict = v;
          }
          reward = std::min(reward, g);
        }
        rec.rewards = {reward, 1 - reward};
        rec.validator_calls_consumed = cfg_.proposals_per_output_reward;
      }
      rec.output = a;

      if (critic_phase) {
        for (std::size_t j = 0; j < cfg_.critic_proposals; ++j) {
          auto crit_rng = make_stream(cfg_.seed, {tag("critic-phase"), round_, s.payload, k, j});
          InteractionRecord cr;
          cr.instruction = s;
          cr.output = a;
          cr.output_index = k;
          cr.proposal = critic_.sample_rubric(s, a, crit_rng);
          cr.verdict = validator_->validate(s, a, cr.proposal, nonce({tag("critic-validate"), round_, s.payload, k, j}));
          cr.rewards = assign_rewards(cr.verdict);
          r.calls += 1;
          r.critic_records.push_back(std::move(cr));
        }
      }
      r.generator_records.push_back(std::move(rec));
    }
    return r;
  }

  Rollout collect(const std::vector<Instruction>& batch) const {
    Rollout all;
    if (!cfg_.parallel_rollouts || batch.size() < 2) {
      for (const auto& s : batch) all.append(rollout(s));
      return all;
    }
    const std::size_t workers = std::max<std::size_t>(2, std::min<std::size_t>(8, std::thread::hardware_concurrency()));
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    std::vector<std::future<Rollout>> futures;
    for (std::size_t begin = 0; begin < batch.size(); begin += chunk) {
      const std::size_t end = std::min(batch.size(), begin + chunk);
      futures.push_back(std::async(std::launch::async, [this, &batch, begin, end] {
        Rollout part;
        for (std::size_t i = begin; i < end; ++i) part.append(rollout(batch[i]));
        return part;
      }));
    }
    for (auto& f : futures) all.append(f.get());  // reduced in instruction order
    return all;
  }

  /// K samples per instruction ranked by the frozen reward model; top half
  /// preferred over bottom half.
  PreferenceDataset reward_model_pairs(const std::vector<Instruction>& batch) const {
    if (!reward_model_) throw Error(ErrorCode::Config, "reward-model mode requires a fitted reward model");
    PreferenceDataset out;
    out.source = "reward-model";
    auto pair_rng = make_stream(cfg_.seed, {tag("generator-pairs"), round_});
    for (const auto& s : batch) {
      std::vector<std::pair<double, OutputValue>> scored;
      for (std::size_t k = 0; k < cfg_.outputs_per_prompt; ++k) {
        auto rng = make_stream(cfg_.seed, {tag("generate"), round_, s.payload, k});
        auto a = generator_.sample_output(s, rng);
        const double sc = reward_model_->score(s, a);
        scored.emplace_back(sc, std::move(a));
      }
      std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
      const std::size_t half = scored.size() / 2;
      std::vector<PreferencePair> local;
      for (std::size_t i = 0; i < half; ++i)
        for (std::size_t j = scored.size() - half; j < scored.size(); ++j) {
          if (!(scored[i].first > scored[j].first) || scored[i].second == scored[j].second) continue;
          local.push_back({s, Player::Generator, scored[i].second, scored[j].second, {}});
        }
      std::shuffle(local.begin(), local.end(), pair_rng);
      if (local.size() > cfg_.generator_optimizer.pair_cap_per_instruction)
        local.resize(cfg_.generator_optimizer.pair_cap_per_instruction);
      for (auto& p : local) out.pairs.push_back(std::move(p));
    }
    return out;
  }

  std::shared_ptr<const Task> task_;
  TrainingConfig cfg_;
  std::shared_ptr<const Validator> validator_;
  GeneratorPolicy generator_;
  CriticPolicy critic_;
  GeneratorSnapshot generator_ref_;
  GeneratorSnapshot base_generator_;
  CriticSnapshot critic_ref_;
  std::optional<RewardModelBaseline> reward_model_;
  CallLedger ledger_;
  std::size_t round_ = 0;
};

}  // namespace rlac
