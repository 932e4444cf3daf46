#pragma once

// run_experiment: task construction from a spec, the round loop, and the
// artifacts written into a run directory.

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>

#include "rlac/checkpoint.hpp"
#include "rlac/code_task.hpp"
#include "rlac/error.hpp"
#include "rlac/factual_task.hpp"
#include "rlac/metrics.hpp"
#include "rlac/trainer.hpp"

namespace rlac {

struct FactualFixtureGen {
  std::size_t train = 120;
  std::size_t test = 50;
  std::size_t slots = 8;
  std::size_t values = 8;
  double zipf = 1.0;
  std::uint64_t seed = 3;
};

struct CodeFixtureGen {
  std::size_t train = 120;
  std::size_t test = 50;
  std::size_t domain = 32;
  std::size_t codomain = 16;
  std::uint64_t seed = 5;
};

struct TaskSpec {
  TaskKind kind = TaskKind::Factual;
  std::filesystem::path fixture;  // empty: generate from the *_gen settings
  FactualFixtureGen factual_gen;
  CodeFixtureGen code_gen;
  FactualTaskConfig factual;
  CodeTaskConfig code;
};

struct ExperimentConfig {
  std::string name = "run";
  TaskSpec task;
  TrainingConfig training;
  bool write_checkpoints = true;
  double report_threshold = 0.75;  // precision level for calls-to-threshold
  std::string config_echo;         // resolved configuration text
};

inline std::shared_ptr<const Task> make_task(const TaskSpec& spec) {
  auto open = [&](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::Config, "cannot open task fixture '" + p.string() + "'");
    return in;
  };
  if (spec.kind == TaskKind::Factual) {
    KnowledgeBase kb;
    if (spec.fixture.empty()) {
      const auto& g = spec.factual_gen;
      kb = generate_knowledge_base(g.train, g.test, g.slots, g.values, g.zipf, g.seed);
    } else {
      auto in = open(spec.fixture);
      kb = read_knowledge_base(in, spec.fixture.string());
    }
    return std::make_shared<FactualTask>(std::move(kb), spec.factual);
  }
  CodeProblemSet set;
  if (spec.fixture.empty()) {
    const auto& g = spec.code_gen;
    set = generate_code_problems(g.train, g.test, g.domain, g.codomain, g.seed);
  } else {
    auto in = open(spec.fixture);
    set = read_code_problems(in, spec.fixture.string());
  }
  return std::make_shared<CodeTask>(std::move(set), spec.code);
}

struct ExperimentHooks {
  std::function<void(const RoundLog&)> on_round;
  /// Test hook: replaces the training validator (e.g. a corrupted one).
  std::function<std::shared_ptr<const Validator>(const Task&)> validator;
};

namespace detail {

inline void write_run_dir(const RunArtifacts& run, const std::filesystem::path& dir) {
  export_rounds(run, dir);
  write_file(dir / "config.json", run.config_echo);
  if (!run.generator_checkpoint.empty()) write_file(dir / "generator.ckpt", run.generator_checkpoint);
  if (!run.critic_checkpoint.empty()) write_file(dir / "critic.ckpt", run.critic_checkpoint);
}

}  // namespace detail

/// Round 0 is the base policy's evaluation; rounds 1..R follow the configured
/// mode. With a non-empty `run_dir`, logs are written there, including the
/// rounds completed so far when a round throws.
inline RunArtifacts run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& run_dir = {},
                                   const ExperimentHooks& hooks = {}) {
  const auto task = make_task(cfg.task);
  TrainerState state(task, cfg.training);
  if (hooks.validator) state.set_validator(hooks.validator(*task));

  RunArtifacts run;
  run.run_id = cfg.name;
  run.mode = to_string(cfg.training.mode);
  run.config_echo = cfg.config_echo;
  run.fixture_fingerprint = task->fixture_fingerprint();
  run.seed = cfg.training.seed;

  try {
    if (cfg.training.mode == Mode::RewardModel) state.fit_reward_model();
    run.rounds.push_back(state.evaluate());
    if (hooks.on_round) hooks.on_round(run.rounds.back());
    for (std::size_t r = 0; r < cfg.training.rounds; ++r) {
      run.rounds.push_back(state.run_round());
      if (hooks.on_round) hooks.on_round(run.rounds.back());
    }
  } catch (...) {
    if (!run_dir.empty()) {
      try {
        export_rounds(run, run_dir);
      } catch (...) {
        // keep the original error
      }
    }
    throw;
  }

  if (cfg.write_checkpoints) {
    run.generator_checkpoint = save_checkpoint(state.generator());
    if (cfg.training.trains_critic() || cfg.training.mode == Mode::StaticCritic)
      run.critic_checkpoint = save_checkpoint(state.critic());
  }
  if (!run_dir.empty()) detail::write_run_dir(run, run_dir);
  return run;
}

}  // namespace rlac
