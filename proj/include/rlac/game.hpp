#pragma once

// Objects of the generator/critic game: instructions, outputs, rubric
// proposals, validator verdicts and the zero-sum reward split.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rlac/error.hpp"

namespace rlac {

enum class TaskKind { Factual, Code };

inline std::string to_string(TaskKind kind) { return kind == TaskKind::Factual ? "Factual" : "Code"; }

struct Instruction {
  std::string id;
  TaskKind task_kind = TaskKind::Factual;
  std::size_t payload = 0;  // topic index (Factual) or problem index (Code)

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// One atomic claim of a factual output. `slot` is 1-based.
struct Claim {
  int slot = 1;
  int attribute = 0;
  int value = 0;

  friend bool operator==(const Claim&, const Claim&) = default;
};

struct FactualBody {
  std::vector<Claim> claims;
  friend bool operator==(const FactualBody&, const FactualBody&) = default;
};

/// Candidate program as a total table over the input domain {0..|D|-1}.
struct CodeBody {
  std::vector<int> table;
  friend bool operator==(const CodeBody&, const CodeBody&) = default;
};

class OutputValue {
 public:
  OutputValue() = default;
  explicit OutputValue(FactualBody body) : body_(std::move(body)) {}
  explicit OutputValue(CodeBody body) : body_(std::move(body)) {}

  /// Builds a factual output from per-slot values; slot i asserts attribute i-1.
  static OutputValue factual_from_values(std::span<const int> values) {
    FactualBody body;
    body.claims.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      body.claims.push_back({static_cast<int>(i + 1), static_cast<int>(i), values[i]});
    return OutputValue(std::move(body));
  }
  static OutputValue code_from_table(std::vector<int> table) { return OutputValue(CodeBody{std::move(table)}); }

  TaskKind task_kind() const { return std::holds_alternative<FactualBody>(body_) ? TaskKind::Factual : TaskKind::Code; }
  const FactualBody* factual() const { return std::get_if<FactualBody>(&body_); }
  const CodeBody* code() const { return std::get_if<CodeBody>(&body_); }

  /// Value chosen in each slot, ordered by slot (Factual) or input (Code).
  /// Throws ShapeMismatch when factual slots are not exactly 1..m.
  std::vector<int> slot_values() const {
    if (const auto* c = code()) return c->table;
    const auto& claims = factual()->claims;
    std::vector<int> values(claims.size(), 0);
    std::vector<bool> seen(claims.size(), false);
    for (const auto& claim : claims) {
      if (claim.slot < 1 || static_cast<std::size_t>(claim.slot) > claims.size() ||
          seen[static_cast<std::size_t>(claim.slot - 1)])
        throw Error(ErrorCode::ShapeMismatch, "factual output slots must be exactly 1..m");
      seen[static_cast<std::size_t>(claim.slot - 1)] = true;
      values[static_cast<std::size_t>(claim.slot - 1)] = claim.value;
    }
    return values;
  }

  std::size_t size() const {
    if (const auto* c = code()) return c->table.size();
    return factual()->claims.size();
  }

  /// Deterministic byte representation: equal bodies give equal strings.
  std::string canonical() const {
    std::string out;
    if (const auto* f = factual()) {
      out = "F";
      std::vector<Claim> sorted = f->claims;
      std::sort(sorted.begin(), sorted.end(), [](const Claim& a, const Claim& b) { return a.slot < b.slot; });
      for (const auto& c : sorted)
        out += "|" + std::to_string(c.slot) + ":" + std::to_string(c.attribute) + "=" + std::to_string(c.value);
    } else {
      out = "C";
      for (int v : code()->table) out += "|" + std::to_string(v);
    }
    return out;
  }

  friend bool operator==(const OutputValue&, const OutputValue&) = default;

 private:
  std::variant<FactualBody, CodeBody> body_;
};

struct FactualProposal {
  int claim_index = 1;  // 1..m
  int attribute = 0;
  int value = 0;
  friend bool operator==(const FactualProposal&, const FactualProposal&) = default;
};

struct CodeProposal {
  long long input = 0;
  friend bool operator==(const CodeProposal&, const CodeProposal&) = default;
};

class RubricProposal {
 public:
  RubricProposal() = default;
  RubricProposal(FactualProposal p) : body_(p) {}  // NOLINT(google-explicit-constructor)
  RubricProposal(CodeProposal p) : body_(p) {}     // NOLINT(google-explicit-constructor)

  TaskKind task_kind() const {
    return std::holds_alternative<FactualProposal>(body_) ? TaskKind::Factual : TaskKind::Code;
  }
  const FactualProposal* factual() const { return std::get_if<FactualProposal>(&body_); }
  const CodeProposal* code() const { return std::get_if<CodeProposal>(&body_); }

  std::string canonical() const {
    if (const auto* f = factual())
      return "F|claim=" + std::to_string(f->claim_index) + ";attr=" + std::to_string(f->attribute) +
             ";value=" + std::to_string(f->value);
    return "C|x=" + std::to_string(code()->input);
  }

  friend bool operator==(const RubricProposal&, const RubricProposal&) = default;

 private:
  std::variant<FactualProposal, CodeProposal> body_;
};

enum class Verdict { GeneratorPasses, GeneratorFails, InvalidProposal };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::GeneratorPasses: return "GeneratorPasses";
    case Verdict::GeneratorFails: return "GeneratorFails";
    case Verdict::InvalidProposal: return "InvalidProposal";
  }
  return "?";
}

struct ValidatorVerdict {
  Verdict kind = Verdict::GeneratorPasses;
  std::optional<std::string> detail;
};

struct RewardAssignment {
  int generator_reward = 0;
  int critic_reward = 0;
  friend bool operator==(const RewardAssignment&, const RewardAssignment&) = default;
};

/// Zero-sum split. An unauthentic proposal is a critic failure: it did not
/// exhibit a genuine error, so the generator keeps reward 1.
constexpr RewardAssignment assign_rewards(Verdict verdict) {
  switch (verdict) {
    case Verdict::GeneratorFails: return {0, 1};
    case Verdict::GeneratorPasses:
    case Verdict::InvalidProposal: return {1, 0};
  }
  return {1, 0};
}
inline RewardAssignment assign_rewards(const ValidatorVerdict& v) { return assign_rewards(v.kind); }

/// All-rubrics reward as a product of binary verdicts.
inline int product_reward(std::span<const int> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyRubricSet, "product_reward of an empty rubric set");
  int p = 1;
  for (int v : values) p *= v;
  return p;
}

/// All-rubrics reward as a minimum; agrees with product_reward on {0,1}^n.
inline int min_reward(std::span<const int> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyRubricSet, "min_reward of an empty rubric set");
  return *std::min_element(values.begin(), values.end());
}

struct InteractionRecord {
  Instruction instruction;
  OutputValue output;
  RubricProposal proposal;
  ValidatorVerdict verdict;
  RewardAssignment rewards;
  std::size_t validator_calls_consumed = 1;
  std::size_t output_index = 0;  // position among the K samples for this instruction
};

}  // namespace rlac
