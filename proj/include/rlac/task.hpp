#pragma once

// Task handle: instruction registry, ground-truth validator, rubric
// enumeration and the feature bases the policies are built on.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlac/error.hpp"
#include "rlac/game.hpp"
#include "rlac/policy.hpp"
#include "rlac/rng.hpp"

namespace rlac {

/// A single validator call on (s, a, c). `nonce` identifies the call so that
/// stochastic validators stay pure functions of their inputs.
class Validator {
 public:
  virtual ~Validator() = default;
  virtual ValidatorVerdict validate(const Instruction& s, const OutputValue& a, const RubricProposal& c,
                                    std::uint64_t nonce) const = 0;
};

struct OutputScore {
  std::size_t num_correct = 0;
  std::size_t num_incorrect = 0;
  friend bool operator==(const OutputScore&, const OutputScore&) = default;
};

class Task : public Validator {
 public:
  virtual TaskKind kind() const = 0;

  /// Training instructions followed by held-out instructions; payload == index.
  virtual std::span<const Instruction> instructions() const = 0;
  virtual std::size_t num_train() const = 0;

  std::span<const Instruction> train_instructions() const { return instructions().first(num_train()); }
  std::span<const Instruction> eval_instructions() const { return instructions().subspan(num_train()); }

  const Instruction& instruction(std::size_t payload) const {
    if (payload >= instructions().size())
      throw Error(ErrorCode::UnknownInstruction, "no instruction with payload " + std::to_string(payload));
    return instructions()[payload];
  }

  void check_instruction(const Instruction& s) const {
    if (s.task_kind != kind() || s.payload >= instructions().size() || instructions()[s.payload].id != s.id)
      throw Error(ErrorCode::UnknownInstruction, "instruction '" + s.id + "' is not part of this task");
  }

  virtual GeneratorShape generator_shape() const = 0;
  virtual std::shared_ptr<const GeneratorBasis> generator_basis() const = 0;
  virtual std::shared_ptr<const CriticBasis> critic_basis() const = 0;

  virtual bool enumerable() const { return true; }
  /// Every rubric of C(s) relevant to `a`, in deterministic order.
  virtual std::vector<RubricProposal> enumerate_rubrics(const Instruction& s, const OutputValue& a) const = 0;

  /// Omniscient tally against ground truth (evaluation only).
  virtual OutputScore exact_output_score(const Instruction& s, const OutputValue& a) const = 0;

  /// Value-identity features without instruction conditioning (reward-model proxy).
  virtual std::size_t reward_feature_dim() const = 0;
  virtual SparseRow reward_features(const Instruction& s, const OutputValue& a) const = 0;

  /// Stable identifier of the ground-truth fixtures and prior.
  virtual std::string fixture_fingerprint() const = 0;
};

enum class NoiseMode { Off, RandomLabels };

struct NoiseConfig {
  NoiseMode mode = NoiseMode::Off;
  std::uint64_t seed = 0;
};

/// Replaces truth-stage verdicts by fair coin flips; authenticity rejections
/// pass through unchanged.
class NoisyValidator : public Validator {
 public:
  NoisyValidator(std::shared_ptr<const Validator> inner, NoiseConfig cfg) : inner_(std::move(inner)), cfg_(cfg) {}

  ValidatorVerdict validate(const Instruction& s, const OutputValue& a, const RubricProposal& c,
                            std::uint64_t nonce) const override {
    auto verdict = inner_->validate(s, a, c, nonce);
    if (cfg_.mode == NoiseMode::Off || verdict.kind == Verdict::InvalidProposal) return verdict;
    const auto h = derive_seed(cfg_.seed, {fnv1a64(s.id), fnv1a64(a.canonical()), fnv1a64(c.canonical()), nonce});
    return {(h >> 63) ? Verdict::GeneratorFails : Verdict::GeneratorPasses, "random label"};
  }

 private:
  std::shared_ptr<const Validator> inner_;
  NoiseConfig cfg_;
};

inline std::shared_ptr<const Validator> wrap_noise(std::shared_ptr<const Validator> validator, NoiseConfig cfg) {
  return std::make_shared<NoisyValidator>(std::move(validator), cfg);
}

/// Non-owning adapter so a Task held by reference can be wrapped.
inline std::shared_ptr<const Validator> borrow(const Validator& v) {
  return std::shared_ptr<const Validator>(&v, [](const Validator*) {});
}

/// Test hook for the oracle negative control: reports every rubric on the
/// first slot / input as satisfied.
class CorruptedValidator : public Validator {
 public:
  explicit CorruptedValidator(std::shared_ptr<const Validator> inner) : inner_(std::move(inner)) {}

  ValidatorVerdict validate(const Instruction& s, const OutputValue& a, const RubricProposal& c,
                            std::uint64_t nonce) const override {
    auto verdict = inner_->validate(s, a, c, nonce);
    const bool first = c.factual() ? c.factual()->claim_index == 1 : c.code()->input == 0;
    if (first && verdict.kind == Verdict::GeneratorFails) return {Verdict::GeneratorPasses, "corrupted"};
    return verdict;
  }

 private:
  std::shared_ptr<const Validator> inner_;
};

}  // namespace rlac
