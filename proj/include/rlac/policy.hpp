#pragma once

// Generator and critic policies. Both are linear-softmax families: every
// categorical group (a generator slot, a critic candidate set) scores its
// members with a sparse feature row dotted into the parameter vector, so
// log-probabilities, score-function gradients and KL are exact.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rlac/error.hpp"
#include "rlac/game.hpp"
#include "rlac/rng.hpp"

namespace rlac {

/// (parameter index, value) entries; indices may repeat.
using SparseRow = std::vector<std::pair<std::size_t, double>>;
using SparseGradient = SparseRow;

inline double dot(const SparseRow& row, std::span<const double> params) {
  double s = 0.0;
  for (const auto& [i, v] : row) s += params[i] * v;
  return s;
}

/// Sums duplicate indices; handy for comparing gradients.
inline std::unordered_map<std::size_t, double> densify(const SparseGradient& g) {
  std::unordered_map<std::size_t, double> out;
  for (const auto& [i, v] : g) out[i] += v;
  return out;
}

inline void add_scaled(SparseGradient& into, const SparseGradient& g, double scale) {
  into.reserve(into.size() + g.size());
  for (const auto& [i, v] : g) into.emplace_back(i, v * scale);
}

namespace softmax {

inline double log_sum_exp(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logits) mx = std::max(mx, l);
  double s = 0.0;
  for (double l : logits) s += std::exp(l - mx);
  return mx + std::log(s);
}

inline std::vector<double> probabilities(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

inline std::size_t sample(std::span<const double> logits, Rng& rng) {
  const auto p = probabilities(logits);
  double u = uniform01(rng);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (u < p[i]) return i;
    u -= p[i];
  }
  return p.size() - 1;
}

/// KL(p || q) between two categoricals given as logits.
inline double kl(std::span<const double> p_logits, std::span<const double> q_logits) {
  const double lp = log_sum_exp(p_logits);
  const double lq = log_sum_exp(q_logits);
  double s = 0.0;
  for (std::size_t i = 0; i < p_logits.size(); ++i) {
    const double log_p = p_logits[i] - lp;
    const double log_q = q_logits[i] - lq;
    s += std::exp(log_p) * (log_p - log_q);
  }
  return std::max(s, 0.0);
}

}  // namespace softmax

/// Frozen structure on top of the generator's per-instruction logit table:
/// features shared across instructions (e.g. the pretrained knowledge prior).
class GeneratorBasis {
 public:
  virtual ~GeneratorBasis() = default;
  virtual std::size_t shared_dim() const = 0;
  virtual std::vector<double> initial_shared() const = 0;
  /// Appends features of choosing `value` at `slot` (0-based); indices are
  /// relative to the shared block.
  virtual void shared_features(std::size_t payload, std::size_t slot, int value, SparseRow& out) const = 0;
};

struct GeneratorShape {
  std::size_t payloads = 0;
  std::size_t slots = 0;
  std::size_t values = 0;
  friend bool operator==(const GeneratorShape&, const GeneratorShape&) = default;
};

class GeneratorPolicy {
 public:
  GeneratorPolicy() = default;

  /// Pure tabular policy with the given initial logits laid out [payload][slot][value].
  GeneratorPolicy(TaskKind kind, GeneratorShape shape, std::vector<double> table)
      : kind_(kind), shape_(shape), params_(std::move(table)) {
    if (params_.size() != table_size()) throw Error(ErrorCode::ShapeMismatch, "logit table size does not match shape");
    check_finite();
  }

  /// Zero table plus shared weights from `basis`.
  GeneratorPolicy(TaskKind kind, GeneratorShape shape, std::shared_ptr<const GeneratorBasis> basis)
      : kind_(kind), shape_(shape), basis_(std::move(basis)), params_(table_size(), 0.0) {
    if (basis_) {
      const auto shared = basis_->initial_shared();
      if (shared.size() != basis_->shared_dim()) throw Error(ErrorCode::ShapeMismatch, "basis initial weights");
      params_.insert(params_.end(), shared.begin(), shared.end());
    }
    check_finite();
  }

  TaskKind task_kind() const { return kind_; }
  const GeneratorShape& shape() const { return shape_; }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  std::size_t num_params() const { return params_.size(); }
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  std::size_t table_index(std::size_t payload, std::size_t slot, std::size_t value) const {
    return (payload * shape_.slots + slot) * shape_.values + value;
  }

  void check_instruction(const Instruction& s) const {
    if (s.task_kind != kind_ || s.payload >= shape_.payloads)
      throw Error(ErrorCode::UnknownInstruction, "instruction '" + s.id + "' is not registered with this generator");
  }

  /// Logits of the categorical at (payload, slot).
  std::vector<double> logits(std::size_t payload, std::size_t slot) const {
    std::vector<double> out(shape_.values);
    SparseRow row;
    for (std::size_t v = 0; v < shape_.values; ++v) {
      out[v] = params_[table_index(payload, slot, v)];
      if (basis_) {
        row.clear();
        basis_->shared_features(payload, slot, static_cast<int>(v), row);
        for (const auto& [i, x] : row) out[v] += params_[table_size() + i] * x;
      }
    }
    return out;
  }

  OutputValue sample_output(const Instruction& s, Rng& rng) const {
    check_instruction(s);
    std::vector<int> values(shape_.slots);
    for (std::size_t j = 0; j < shape_.slots; ++j) {
      const auto l = logits(s.payload, j);
      values[j] = static_cast<int>(softmax::sample(l, rng));
    }
    return make_output(std::move(values));
  }

  /// Most likely value in every slot.
  OutputValue mode_output(const Instruction& s) const {
    check_instruction(s);
    std::vector<int> values(shape_.slots);
    for (std::size_t j = 0; j < shape_.slots; ++j) {
      const auto l = logits(s.payload, j);
      values[j] = static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
    }
    return make_output(std::move(values));
  }

  double log_prob_output(const Instruction& s, const OutputValue& a) const {
    const auto values = checked_values(s, a);
    double lp = 0.0;
    for (std::size_t j = 0; j < shape_.slots; ++j) {
      const auto l = logits(s.payload, j);
      lp += l[static_cast<std::size_t>(values[j])] - softmax::log_sum_exp(l);
    }
    return lp;
  }

  /// Score function of log pi(a|s): per slot, phi(chosen) - E_pi[phi].
  SparseGradient grad_log_prob(const Instruction& s, const OutputValue& a) const {
    const auto values = checked_values(s, a);
    SparseGradient g;
    SparseRow row;
    for (std::size_t j = 0; j < shape_.slots; ++j) {
      const auto p = softmax::probabilities(logits(s.payload, j));
      const auto chosen = static_cast<std::size_t>(values[j]);
      for (std::size_t v = 0; v < shape_.values; ++v) {
        const double coeff = (v == chosen ? 1.0 : 0.0) - p[v];
        g.emplace_back(table_index(s.payload, j, v), coeff);
        if (basis_) {
          row.clear();
          basis_->shared_features(s.payload, j, static_cast<int>(v), row);
          for (const auto& [i, x] : row) g.emplace_back(table_size() + i, coeff * x);
        }
      }
    }
    return g;
  }

  bool same_structure(const GeneratorPolicy& other) const {
    return kind_ == other.kind_ && shape_ == other.shape_ && params_.size() == other.params_.size() &&
           basis_ == other.basis_;
  }

  void check_finite() const {
    for (double p : params_)
      if (!std::isfinite(p)) throw Error(ErrorCode::NonFinite, "generator parameter is not finite");
  }

 private:
  std::size_t table_size() const { return shape_.payloads * shape_.slots * shape_.values; }

  OutputValue make_output(std::vector<int> values) const {
    if (kind_ == TaskKind::Factual) return OutputValue::factual_from_values(values);
    return OutputValue::code_from_table(std::move(values));
  }

  std::vector<int> checked_values(const Instruction& s, const OutputValue& a) const {
    check_instruction(s);
    if (a.task_kind() != kind_) throw Error(ErrorCode::ShapeMismatch, "output kind does not match generator");
    auto values = a.slot_values();
    if (values.size() != shape_.slots) throw Error(ErrorCode::ShapeMismatch, "output has wrong number of slots");
    for (int v : values)
      if (v < 0 || static_cast<std::size_t>(v) >= shape_.values)
        throw Error(ErrorCode::ShapeMismatch, "output value outside the vocabulary");
    return values;
  }

  TaskKind kind_ = TaskKind::Factual;
  GeneratorShape shape_;
  std::shared_ptr<const GeneratorBasis> basis_;
  std::vector<double> params_;
  std::uint64_t version_ = 0;
};

/// The finite proposal set a critic chooses from for one (s, a), with one
/// feature row per proposal.
struct CandidateSet {
  std::vector<RubricProposal> proposals;
  std::vector<SparseRow> features;
};

class CriticBasis {
 public:
  virtual ~CriticBasis() = default;
  virtual std::size_t dim() const = 0;
  /// Deterministic in (s, a).
  virtual CandidateSet candidates(const Instruction& s, const OutputValue& a) const = 0;
};

class CriticPolicy {
 public:
  CriticPolicy() = default;
  explicit CriticPolicy(std::shared_ptr<const CriticBasis> basis)
      : basis_(std::move(basis)), weights_(basis_->dim(), 0.0) {}

  std::span<const double> params() const { return weights_; }
  std::span<double> mutable_params() { return weights_; }
  std::size_t num_params() const { return weights_.size(); }
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }
  const CriticBasis& basis() const { return *basis_; }

  CandidateSet candidates(const Instruction& s, const OutputValue& a) const {
    auto set = basis_->candidates(s, a);
    if (set.proposals.empty()) throw Error(ErrorCode::NoCandidates, "critic has no candidates for '" + s.id + "'");
    return set;
  }

  std::vector<double> logits(const CandidateSet& set) const {
    std::vector<double> l(set.features.size());
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = dot(set.features[i], weights_);
    return l;
  }

  std::vector<double> probabilities(const Instruction& s, const OutputValue& a) const {
    return softmax::probabilities(logits(candidates(s, a)));
  }

  RubricProposal sample_rubric(const Instruction& s, const OutputValue& a, Rng& rng) const {
    const auto set = candidates(s, a);
    return set.proposals[softmax::sample(logits(set), rng)];
  }

  double log_prob_rubric(const Instruction& s, const OutputValue& a, const RubricProposal& c) const {
    const auto set = candidates(s, a);
    const auto l = logits(set);
    return l[index_of(set, c)] - softmax::log_sum_exp(l);
  }

  /// phi(c) - sum_c' pi(c') phi(c')
  SparseGradient grad_log_prob(const Instruction& s, const OutputValue& a, const RubricProposal& c) const {
    const auto set = candidates(s, a);
    const auto p = softmax::probabilities(logits(set));
    const std::size_t chosen = index_of(set, c);
    SparseGradient g;
    for (std::size_t k = 0; k < set.proposals.size(); ++k) {
      const double coeff = (k == chosen ? 1.0 : 0.0) - p[k];
      for (const auto& [i, x] : set.features[k]) g.emplace_back(i, coeff * x);
    }
    return g;
  }

  bool same_structure(const CriticPolicy& other) const {
    return basis_ == other.basis_ && weights_.size() == other.weights_.size();
  }

  void check_finite() const {
    for (double w : weights_)
      if (!std::isfinite(w)) throw Error(ErrorCode::NonFinite, "critic weight is not finite");
  }

 private:
  static std::size_t index_of(const CandidateSet& set, const RubricProposal& c) {
    for (std::size_t k = 0; k < set.proposals.size(); ++k)
      if (set.proposals[k] == c) return k;
    throw Error(ErrorCode::ShapeMismatch, "proposal " + c.canonical() + " is not in the critic's candidate set");
  }

  std::shared_ptr<const CriticBasis> basis_;
  std::vector<double> weights_;
  std::uint64_t version_ = 0;
};

/// Immutable copy of a policy, used as DPO reference or KL base.
template <class Policy>
class PolicySnapshot {
 public:
  explicit PolicySnapshot(const Policy& policy)
      : policy_(std::make_shared<const Policy>(policy)), version_(policy.version()) {}

  const Policy& policy() const { return *policy_; }
  std::uint64_t version() const { return version_; }

 private:
  std::shared_ptr<const Policy> policy_;
  std::uint64_t version_;
};

using GeneratorSnapshot = PolicySnapshot<GeneratorPolicy>;
using CriticSnapshot = PolicySnapshot<CriticPolicy>;

/// Mean over instructions of the summed per-slot KL(current || base).
inline double kl_to_base(const GeneratorPolicy& policy, const GeneratorSnapshot& base,
                         std::span<const Instruction> instructions) {
  const auto& b = base.policy();
  if (!policy.same_structure(b)) throw Error(ErrorCode::ShapeMismatch, "kl_to_base: policy shapes differ");
  if (instructions.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : instructions) {
    policy.check_instruction(s);
    for (std::size_t j = 0; j < policy.shape().slots; ++j)
      total += softmax::kl(policy.logits(s.payload, j), b.logits(s.payload, j));
  }
  return total / static_cast<double>(instructions.size());
}

}  // namespace rlac
