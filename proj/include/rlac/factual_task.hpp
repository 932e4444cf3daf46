#pragma once

// Knowledge-base factual task. Each topic has m attribute slots with one true
// value from a vocabulary of size V. An output asserts one value per slot;
// the validator checks a proposed claim for authenticity, then against the KB.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "rlac/error.hpp"
#include "rlac/rng.hpp"
#include "rlac/task.hpp"

namespace rlac {

struct KnowledgeBase {
  std::vector<std::string> topics;
  std::size_t slots = 0;
  std::size_t values = 0;
  std::size_t num_train = 0;
  std::vector<int> truth;  // [topic][slot]

  int true_value(std::size_t topic, std::size_t slot) const { return truth[topic * slots + slot]; }
};

/// True values follow a per-slot Zipf marginal over a shuffled vocabulary, so
/// some values are genuinely more common than others for each attribute.
inline KnowledgeBase generate_knowledge_base(std::size_t num_train, std::size_t num_test, std::size_t slots,
                                             std::size_t values, double zipf_exponent, std::uint64_t seed) {
  KnowledgeBase kb;
  kb.slots = slots;
  kb.values = values;
  kb.num_train = num_train;
  const std::size_t n = num_train + num_test;
  for (std::size_t t = 0; t < n; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "topic-%04zu", t);
    kb.topics.emplace_back(name);
  }
  kb.truth.resize(n * slots);
  for (std::size_t j = 0; j < slots; ++j) {
    auto rng = make_stream(seed, {tag("kb-slot"), j});
    std::vector<int> order(values);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> weights(values);
    for (std::size_t r = 0; r < values; ++r) weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), zipf_exponent);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    for (std::size_t t = 0; t < n; ++t) kb.truth[t * slots + j] = order[pick(rng)];
  }
  return kb;
}

inline void write_knowledge_base(const KnowledgeBase& kb, std::ostream& out) {
  out << "# rlac knowledge-base fixture\n"
      << "# directive: !kb <slots> <values> <num_train>   (topics after num_train are held out)\n"
      << "# record:    <topic> <slot 1..slots> <value 0..values-1>\n"
      << "!kb " << kb.slots << ' ' << kb.values << ' ' << kb.num_train << '\n';
  for (std::size_t t = 0; t < kb.topics.size(); ++t)
    for (std::size_t j = 0; j < kb.slots; ++j) out << kb.topics[t] << ' ' << (j + 1) << ' ' << kb.true_value(t, j) << '\n';
}

inline KnowledgeBase read_knowledge_base(std::istream& in, const std::string& origin = "<stream>") {
  KnowledgeBase kb;
  bool have_header = false;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<int>> rows;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::Config, origin + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (line[0] == '!') {
      std::string word;
      ls >> word >> kb.slots >> kb.values >> kb.num_train;
      if (word != "!kb" || !ls || kb.slots == 0 || kb.values < 2) fail("bad !kb directive");
      have_header = true;
      continue;
    }
    if (!have_header) fail("record before !kb directive");
    std::string topic;
    long long slot = 0, value = 0;
    if (!(ls >> topic >> slot >> value)) fail("expected '<topic> <slot> <value>'");
    if (slot < 1 || static_cast<std::size_t>(slot) > kb.slots) fail("slot out of range");
    if (value < 0 || static_cast<std::size_t>(value) >= kb.values) fail("value out of range");
    auto [it, inserted] = index.try_emplace(topic, rows.size());
    if (inserted) {
      kb.topics.push_back(topic);
      rows.emplace_back(kb.slots, -1);
    }
    auto& cell = rows[it->second][static_cast<std::size_t>(slot - 1)];
    if (cell != -1) fail("duplicate record for " + topic + " slot " + std::to_string(slot));
    cell = static_cast<int>(value);
  }
  if (!have_header) throw Error(ErrorCode::Config, origin + ": missing !kb directive");
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < kb.slots; ++j) {
      if (rows[t][j] < 0)
        throw Error(ErrorCode::Config, origin + ": topic " + kb.topics[t] + " lacks slot " + std::to_string(j + 1));
      kb.truth.push_back(rows[t][j]);
    }
  if (kb.num_train > kb.topics.size()) throw Error(ErrorCode::Config, origin + ": num_train exceeds topic count");
  return kb;
}

struct FactualTaskConfig {
  std::size_t claims = 8;  // m; must not exceed the KB's slot count
  double b_true = 2.8;
  double sigma_init = 1.0;
  double slot_difficulty_spread = 1.0;
  std::uint64_t prior_seed = 7;
  bool misquote_candidates = true;
  // The critic's own pretrained belief about each claim, drawn independently
  // of the generator's prior. Its feature weight starts at 0 like the rest.
  double critic_b_true = 2.8;
  double critic_sigma = 1.0;
  double critic_doubt_scale = 0.075;  // multiplies the surprisal feature
};

namespace detail {

/// Pretrained-knowledge prior: truth bias (harder slots get less) plus noise.
/// Shared generator features: a per-slot scale on the prior logit and a
/// per-(slot, value) bias.
class FactualGeneratorBasis final : public GeneratorBasis {
 public:
  FactualGeneratorBasis(std::vector<double> prior, std::size_t slots, std::size_t values)
      : prior_(std::move(prior)), slots_(slots), values_(values) {}

  std::size_t shared_dim() const override { return slots_ + slots_ * values_; }
  std::vector<double> initial_shared() const override {
    std::vector<double> w(shared_dim(), 0.0);
    std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(slots_), 1.0);
    return w;
  }
  void shared_features(std::size_t payload, std::size_t slot, int value, SparseRow& out) const override {
    const auto v = static_cast<std::size_t>(value);
    out.emplace_back(slot, prior_[(payload * slots_ + slot) * values_ + v]);
    out.emplace_back(slots_ + slot * values_ + v, 1.0);
  }
  double prior(std::size_t payload, std::size_t slot, std::size_t value) const {
    return prior_[(payload * slots_ + slot) * values_ + value];
  }

 private:
  std::vector<double> prior_;
  std::size_t slots_;
  std::size_t values_;
};

/// Candidate claims: every authentic claim of the output, plus (optionally)
/// one misquote per slot asserting a value that appears nowhere in the output.
class FactualCriticBasis final : public CriticBasis {
 public:
  FactualCriticBasis(std::size_t topics, std::size_t slots, std::size_t values, bool misquotes,
                     std::vector<double> surprisal)
      : topics_(topics), slots_(slots), values_(values), misquotes_(misquotes), surprisal_(std::move(surprisal)) {}

  static constexpr std::size_t kFreqBuckets = 4;

  std::size_t dim() const override { return topics_ * slots_ + slots_ + slots_ * values_ + kFreqBuckets + 1; }

  CandidateSet candidates(const Instruction& s, const OutputValue& a) const override {
    CandidateSet set;
    const auto* body = a.factual();
    if (!body) return set;
    const auto vals = a.slot_values();
    std::vector<std::size_t> freq(values_, 0);
    for (int v : vals)
      if (v >= 0 && static_cast<std::size_t>(v) < values_) ++freq[static_cast<std::size_t>(v)];
    for (std::size_t j = 0; j < vals.size(); ++j) push(set, s, j, vals[j], vals[j], freq);
    if (misquotes_) {
      for (std::size_t j = 0; j < vals.size(); ++j) {
        for (std::size_t step = 1; step < values_; ++step) {
          const auto v = (static_cast<std::size_t>(vals[j]) + step) % values_;
          if (freq[v] == 0) {
            push(set, s, j, static_cast<int>(v), vals[j], freq);
            break;
          }
        }
      }
    }
    return set;
  }

 private:
  // `quoted` is the output's own value at slot j; doubt is about that claim
  // even when the candidate misquotes it.
  void push(CandidateSet& set, const Instruction& s, std::size_t j, int value, int quoted,
            const std::vector<std::size_t>& freq) const {
    const auto v = static_cast<std::size_t>(value);
    set.proposals.emplace_back(FactualProposal{static_cast<int>(j + 1), static_cast<int>(j), value});
    SparseRow row;
    row.emplace_back(s.payload * slots_ + j, 1.0);
    std::size_t base = topics_ * slots_;
    row.emplace_back(base + j, 1.0);
    base += slots_;
    row.emplace_back(base + j * values_ + v, 1.0);
    base += slots_ * values_;
    row.emplace_back(base + std::min(freq[v], kFreqBuckets - 1), 1.0);
    base += kFreqBuckets;
    row.emplace_back(base, surprisal_[(s.payload * slots_ + j) * values_ + static_cast<std::size_t>(quoted)]);
    set.features.push_back(std::move(row));
  }

  std::size_t topics_, slots_, values_;
  bool misquotes_;
  std::vector<double> surprisal_;
};

}  // namespace detail

class FactualTask final : public Task {
 public:
  FactualTask(KnowledgeBase kb, FactualTaskConfig cfg) : kb_(std::move(kb)), cfg_(cfg) {
    if (cfg_.claims == 0 || cfg_.claims > kb_.slots)
      throw Error(ErrorCode::Config, "claims per output must be within 1..kb slots");
    for (std::size_t t = 0; t < kb_.topics.size(); ++t)
      instructions_.push_back({kb_.topics[t], TaskKind::Factual, t});

    const std::size_t m = cfg_.claims, V = kb_.values;
    std::vector<double> prior(kb_.topics.size() * m * V);
    for (std::size_t t = 0; t < kb_.topics.size(); ++t) {
      for (std::size_t j = 0; j < m; ++j) {
        auto rng = make_stream(cfg_.prior_seed, {tag("factual-prior"), t, j});
        std::normal_distribution<double> noise(0.0, cfg_.sigma_init);
        const double offset =
            m > 1 ? cfg_.slot_difficulty_spread * (static_cast<double>(j) / static_cast<double>(m - 1) - 0.5) : 0.0;
        for (std::size_t v = 0; v < V; ++v) {
          const bool truth = static_cast<int>(v) == kb_.true_value(t, j);
          prior[(t * m + j) * V + v] = (truth ? cfg_.b_true + offset : 0.0) + noise(rng);
        }
      }
    }
    std::vector<double> surprisal(prior.size());
    std::vector<double> logits(V);
    for (std::size_t t = 0; t < kb_.topics.size(); ++t) {
      for (std::size_t j = 0; j < m; ++j) {
        auto rng = make_stream(cfg_.prior_seed, {tag("critic-prior"), t, j});
        std::normal_distribution<double> noise(0.0, cfg_.critic_sigma);
        for (std::size_t v = 0; v < V; ++v)
          logits[v] = (static_cast<int>(v) == kb_.true_value(t, j) ? cfg_.critic_b_true : 0.0) + noise(rng);
        const double lse = softmax::log_sum_exp(logits);
        for (std::size_t v = 0; v < V; ++v) surprisal[(t * m + j) * V + v] = cfg_.critic_doubt_scale * (lse - logits[v]);
      }
    }
    generator_basis_ = std::make_shared<detail::FactualGeneratorBasis>(std::move(prior), m, V);
    critic_basis_ = std::make_shared<detail::FactualCriticBasis>(kb_.topics.size(), m, V, cfg_.misquote_candidates,
                                                                 std::move(surprisal));
  }

  TaskKind kind() const override { return TaskKind::Factual; }
  std::span<const Instruction> instructions() const override { return instructions_; }
  std::size_t num_train() const override { return kb_.num_train; }
  const KnowledgeBase& knowledge_base() const { return kb_; }
  const FactualTaskConfig& config() const { return cfg_; }
  std::size_t claims() const { return cfg_.claims; }

  GeneratorShape generator_shape() const override { return {kb_.topics.size(), cfg_.claims, kb_.values}; }
  std::shared_ptr<const GeneratorBasis> generator_basis() const override { return generator_basis_; }
  std::shared_ptr<const CriticBasis> critic_basis() const override { return critic_basis_; }
  const detail::FactualGeneratorBasis& prior() const { return *generator_basis_; }

  /// Stage 1: the proposal must quote the output's claim at claim_index.
  /// Stage 2: the quoted value is compared with the KB.
  ValidatorVerdict validate(const Instruction& s, const OutputValue& a, const RubricProposal& c,
                            std::uint64_t /*nonce*/) const override {
    check_instruction(s);
    const auto* p = c.factual();
    const auto* body = a.factual();
    if (!p || !body) return {Verdict::InvalidProposal, "proposal or output is not factual"};
    const Claim* quoted = nullptr;
    for (const auto& claim : body->claims)
      if (claim.slot == p->claim_index) quoted = &claim;
    if (!quoted || quoted->attribute != p->attribute || quoted->value != p->value)
      return {Verdict::InvalidProposal, "proposed fact does not appear in sentence " + std::to_string(p->claim_index)};
    if (p->attribute < 0 || static_cast<std::size_t>(p->attribute) >= cfg_.claims)
      return {Verdict::InvalidProposal, "unknown attribute"};
    if (kb_.true_value(s.payload, static_cast<std::size_t>(p->attribute)) != p->value)
      return {Verdict::GeneratorFails, "claim contradicts the knowledge base"};
    return {Verdict::GeneratorPasses, std::nullopt};
  }

  std::vector<RubricProposal> enumerate_rubrics(const Instruction& s, const OutputValue& a) const override {
    check_instruction(s);
    std::vector<RubricProposal> out;
    if (const auto* body = a.factual()) {
      auto claims = body->claims;
      std::sort(claims.begin(), claims.end(), [](const Claim& x, const Claim& y) { return x.slot < y.slot; });
      for (const auto& claim : claims) out.emplace_back(FactualProposal{claim.slot, claim.attribute, claim.value});
    }
    return out;
  }

  OutputScore exact_output_score(const Instruction& s, const OutputValue& a) const override {
    check_instruction(s);
    OutputScore score;
    for (const auto& claim : a.factual()->claims) {
      const bool ok = claim.attribute >= 0 && static_cast<std::size_t>(claim.attribute) < cfg_.claims &&
                      kb_.true_value(s.payload, static_cast<std::size_t>(claim.attribute)) == claim.value;
      ++(ok ? score.num_correct : score.num_incorrect);
    }
    return score;
  }

  std::size_t reward_feature_dim() const override { return cfg_.claims * kb_.values; }
  SparseRow reward_features(const Instruction&, const OutputValue& a) const override {
    SparseRow row;
    const auto vals = a.slot_values();
    for (std::size_t j = 0; j < vals.size(); ++j)
      row.emplace_back(j * kb_.values + static_cast<std::size_t>(vals[j]), 1.0);
    return row;
  }

  std::string fixture_fingerprint() const override {
    std::ostringstream os;
    write_knowledge_base(kb_, os);
    os << "claims=" << cfg_.claims << " b_true=" << cfg_.b_true << " sigma=" << cfg_.sigma_init
       << " spread=" << cfg_.slot_difficulty_spread << " prior_seed=" << cfg_.prior_seed
       << " misquotes=" << cfg_.misquote_candidates << " critic_b=" << cfg_.critic_b_true
       << " critic_sigma=" << cfg_.critic_sigma << " doubt_scale=" << cfg_.critic_doubt_scale;
    char buf[32];
    std::snprintf(buf, sizeof buf, "factual-%016llx", static_cast<unsigned long long>(fnv1a64(os.str())));
    return buf;
  }

 private:
  KnowledgeBase kb_;
  FactualTaskConfig cfg_;
  std::vector<Instruction> instructions_;
  std::shared_ptr<const detail::FactualGeneratorBasis> generator_basis_;
  std::shared_ptr<const detail::FactualCriticBasis> critic_basis_;
};

}  // namespace rlac
