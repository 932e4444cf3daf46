#pragma once

// Exhaustive checks over C(s): the all-rubrics reward and the worst-case
// rubric. Used as the enumerative baseline and as the oracle that certifies
// the min/min-max reformulation.

#include <cstdint>
#include <utility>
#include <vector>

#include "rlac/error.hpp"
#include "rlac/game.hpp"
#include "rlac/task.hpp"

namespace rlac {

struct EnumerativeResult {
  int reward = 0;
  std::size_t calls = 0;
};

inline EnumerativeResult enumerative_reward(const Instruction& s, const OutputValue& a, const Task& task,
                                            const Validator& validator, std::uint64_t nonce = 0) {
  if (!task.enumerable()) throw Error(ErrorCode::NotEnumerable, "task rubric space for '" + s.id + "' is not enumerable");
  const auto rubrics = task.enumerate_rubrics(s, a);
  std::vector<int> verdicts;
  verdicts.reserve(rubrics.size());
  for (std::size_t i = 0; i < rubrics.size(); ++i) {
    const auto v = validator.validate(s, a, rubrics[i], derive_seed(nonce, {i}));
    verdicts.push_back(assign_rewards(v).generator_reward);
  }
  return {product_reward(verdicts), rubrics.size()};
}

inline EnumerativeResult enumerative_reward(const Instruction& s, const OutputValue& a, const Task& task) {
  return enumerative_reward(s, a, task, task);
}

struct WorstCase {
  RubricProposal rubric;
  int value = 1;
  std::size_t calls = 0;
};

/// argmin over C(s) of R(s, a, c); the first failing rubric in enumeration
/// order wins ties.
inline WorstCase worst_case_rubric(const Instruction& s, const OutputValue& a, const Task& task,
                                   const Validator& validator, std::uint64_t nonce = 0) {
  if (!task.enumerable()) throw Error(ErrorCode::NotEnumerable, "task rubric space for '" + s.id + "' is not enumerable");
  const auto rubrics = task.enumerate_rubrics(s, a);
  if (rubrics.empty()) throw Error(ErrorCode::EmptyRubricSet, "no rubrics for '" + s.id + "'");
  WorstCase worst{rubrics.front(), 1, 0};
  for (std::size_t i = 0; i < rubrics.size(); ++i) {
    const int r = assign_rewards(validator.validate(s, a, rubrics[i], derive_seed(nonce, {i}))).generator_reward;
    ++worst.calls;
    if (r < worst.value) {
      worst.value = r;
      worst.rubric = rubrics[i];
    }
  }
  return worst;
}

inline WorstCase worst_case_rubric(const Instruction& s, const OutputValue& a, const Task& task) {
  return worst_case_rubric(s, a, task, task);
}

}  // namespace rlac
