#pragma once

// Reference-program code task. A problem is a reference function over a
// finite input domain D = {0..|D|-1} into {0..W-1}; a candidate program is an
// output table over D and a test case is a single input.

#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rlac/error.hpp"
#include "rlac/rng.hpp"
#include "rlac/task.hpp"

namespace rlac {

struct CodeProblem {
  std::string name;
  bool piecewise = false;
  int threshold = 0;  // piecewise only: x < threshold uses the first branch
  int a1 = 1, b1 = 0;
  int a2 = 1, b2 = 0;
};

struct CodeProblemSet {
  std::vector<CodeProblem> problems;
  std::size_t domain = 32;
  std::size_t codomain = 16;
  std::size_t num_train = 0;

  static int affine(int a, int b, int x, std::size_t w) {
    return static_cast<int>(((static_cast<long long>(a) * x + b) % static_cast<long long>(w) + static_cast<long long>(w)) %
                            static_cast<long long>(w));
  }

  int reference(std::size_t problem, int x) const {
    const auto& p = problems[problem];
    if (p.piecewise && x >= p.threshold) return affine(p.a2, p.b2, x, codomain);
    return affine(p.a1, p.b1, x, codomain);
  }

  /// Inputs where generators are prone to slip: domain ends and branch boundaries.
  bool is_edge(std::size_t problem, int x) const {
    const auto& p = problems[problem];
    if (x == 0 || x == static_cast<int>(domain) - 1) return true;
    return p.piecewise && (x == p.threshold || x == p.threshold - 1);
  }

  /// The plausible wrong answer at x: the other branch near a boundary,
  /// otherwise off-by-one.
  int plausible_bug(std::size_t problem, int x) const {
    const auto& p = problems[problem];
    const int ref = reference(problem, x);
    int alt = (ref + 1) % static_cast<int>(codomain);
    if (p.piecewise && (x == p.threshold || x == p.threshold - 1)) {
      const int other = x >= p.threshold ? affine(p.a1, p.b1, x, codomain) : affine(p.a2, p.b2, x, codomain);
      if (other != ref) alt = other;
    }
    return alt;
  }
};

inline CodeProblemSet generate_code_problems(std::size_t num_train, std::size_t num_test, std::size_t domain,
                                             std::size_t codomain, std::uint64_t seed) {
  if (domain < 8) throw Error(ErrorCode::Config, "code domain must have at least 8 inputs");
  CodeProblemSet set;
  set.domain = domain;
  set.codomain = codomain;
  set.num_train = num_train;
  const int w = static_cast<int>(codomain);
  for (std::size_t i = 0; i < num_train + num_test; ++i) {
    auto rng = make_stream(seed, {tag("code-problem"), i});
    std::uniform_int_distribution<int> coef(1, w - 1), off(0, w - 1);
    std::uniform_int_distribution<int> thr(4, static_cast<int>(domain) - 4);
    CodeProblem p;
    char name[32];
    std::snprintf(name, sizeof name, "problem-%04zu", i);
    p.name = name;
    p.piecewise = (rng() & 1) != 0;
    p.a1 = coef(rng);
    p.b1 = off(rng);
    if (p.piecewise) {
      p.threshold = thr(rng);
      p.a2 = coef(rng);
      p.b2 = off(rng);
    }
    set.problems.push_back(p);
  }
  return set;
}

inline void write_code_problems(const CodeProblemSet& set, std::ostream& out) {
  out << "# rlac code-problem fixture\n"
      << "# directive: !code <domain> <codomain> <num_train>\n"
      << "# record:    <name> affine <a> <b>                 f(x) = (a*x + b) mod codomain\n"
      << "#            <name> piecewise <t> <a1> <b1> <a2> <b2>   x < t uses (a1, b1), else (a2, b2)\n"
      << "!code " << set.domain << ' ' << set.codomain << ' ' << set.num_train << '\n';
  for (const auto& p : set.problems) {
    if (p.piecewise)
      out << p.name << " piecewise " << p.threshold << ' ' << p.a1 << ' ' << p.b1 << ' ' << p.a2 << ' ' << p.b2 << '\n';
    else
      out << p.name << " affine " << p.a1 << ' ' << p.b1 << '\n';
  }
}

inline CodeProblemSet read_code_problems(std::istream& in, const std::string& origin = "<stream>") {
  CodeProblemSet set;
  bool have_header = false;
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
      ls >> word >> set.domain >> set.codomain >> set.num_train;
      if (word != "!code" || !ls || set.domain < 8 || set.codomain < 2) fail("bad !code directive");
      have_header = true;
      continue;
    }
    if (!have_header) fail("record before !code directive");
    CodeProblem p;
    std::string kind;
    if (!(ls >> p.name >> kind)) fail("expected '<name> <kind> ...'");
    if (kind == "affine") {
      if (!(ls >> p.a1 >> p.b1)) fail("affine needs <a> <b>");
    } else if (kind == "piecewise") {
      p.piecewise = true;
      if (!(ls >> p.threshold >> p.a1 >> p.b1 >> p.a2 >> p.b2)) fail("piecewise needs <t> <a1> <b1> <a2> <b2>");
      if (p.threshold < 1 || p.threshold >= static_cast<int>(set.domain)) fail("threshold outside the domain");
    } else {
      fail("unknown problem kind '" + kind + "'");
    }
    set.problems.push_back(p);
  }
  if (!have_header) throw Error(ErrorCode::Config, origin + ": missing !code directive");
  if (set.num_train > set.problems.size()) throw Error(ErrorCode::Config, origin + ": num_train exceeds problem count");
  return set;
}

struct CodeTaskConfig {
  double b_true = 8.0;
  double b_bug = 8.5;
  double sigma_init = 0.8;
  std::uint64_t prior_seed = 11;
  std::size_t input_buckets = 8;
};

namespace detail {

/// Prior: truth bias everywhere, a stronger pull towards the plausible bug at
/// edge inputs, plus noise. Shared features per input class (interior/edge):
/// a scale on the prior logit and an indicator of the plausible bug.
class CodeGeneratorBasis final : public GeneratorBasis {
 public:
  CodeGeneratorBasis(std::vector<double> prior, std::vector<int> bug, std::vector<char> edge, std::size_t domain,
                     std::size_t codomain)
      : prior_(std::move(prior)), bug_(std::move(bug)), edge_(std::move(edge)), domain_(domain), codomain_(codomain) {}

  std::size_t shared_dim() const override { return 4; }
  std::vector<double> initial_shared() const override { return {1.0, 1.0, 0.0, 0.0}; }
  void shared_features(std::size_t payload, std::size_t slot, int value, SparseRow& out) const override {
    const std::size_t cls = edge_[payload * domain_ + slot] ? 1 : 0;
    out.emplace_back(cls, prior_[(payload * domain_ + slot) * codomain_ + static_cast<std::size_t>(value)]);
    if (bug_[payload * domain_ + slot] == value) out.emplace_back(2 + cls, 1.0);
  }

 private:
  std::vector<double> prior_;
  std::vector<int> bug_;
  std::vector<char> edge_;
  std::size_t domain_, codomain_;
};

/// Candidate test inputs: all of D. Features: problem x input bucket, input
/// bucket, parity and magnitude of the candidate's output, and whether the
/// candidate's table breaks its own local slope at that input.
class CodeCriticBasis final : public CriticBasis {
 public:
  CodeCriticBasis(std::size_t problems, std::size_t domain, std::size_t codomain, std::size_t buckets)
      : problems_(problems), domain_(domain), codomain_(codomain), buckets_(std::max<std::size_t>(buckets, 3)) {}

  std::size_t dim() const override { return problems_ * buckets_ + buckets_ + 2 + 4 + 2; }

  /// Domain ends get their own buckets; the interior is split evenly.
  std::size_t bucket(std::size_t x) const {
    if (x == 0) return 0;
    if (x + 1 == domain_) return buckets_ - 1;
    return 1 + (x - 1) * (buckets_ - 2) / (domain_ - 2);
  }

  CandidateSet candidates(const Instruction& s, const OutputValue& a) const override {
    CandidateSet set;
    const auto* body = a.code();
    if (!body || body->table.size() != domain_) return set;
    const auto& t = body->table;
    const auto w = static_cast<long long>(codomain_);
    auto diff = [&](std::size_t x) { return ((t[x] - t[x - 1]) % w + w) % w; };
    for (std::size_t x = 0; x < domain_; ++x) {
      set.proposals.emplace_back(CodeProposal{static_cast<long long>(x)});
      SparseRow row;
      const std::size_t b = bucket(x);
      row.emplace_back(s.payload * buckets_ + b, 1.0);
      std::size_t base = problems_ * buckets_;
      row.emplace_back(base + b, 1.0);
      base += buckets_;
      const int out = t[x];
      row.emplace_back(base + static_cast<std::size_t>(out & 1), 1.0);
      base += 2;
      row.emplace_back(base + std::min<std::size_t>(3, static_cast<std::size_t>(out) * 4 / codomain_), 1.0);
      base += 4;
      // slope break: the step into x differs from both neighbouring steps
      bool brk = false;
      if (x >= 1) {
        const auto d = diff(x);
        const bool left = x >= 2 && diff(x - 1) != d;
        const bool right = x + 1 < domain_ && diff(x + 1) != d;
        brk = (x >= 2 ? left : true) && (x + 1 < domain_ ? right : true);
      } else if (domain_ >= 3) {
        brk = diff(1) != diff(2);
      }
      row.emplace_back(base + (brk ? 1 : 0), 1.0);
      set.features.push_back(std::move(row));
    }
    return set;
  }

 private:
  std::size_t problems_, domain_, codomain_, buckets_;
};

}  // namespace detail

class CodeTask final : public Task {
 public:
  CodeTask(CodeProblemSet problems, CodeTaskConfig cfg) : set_(std::move(problems)), cfg_(cfg) {
    const std::size_t P = set_.problems.size(), D = set_.domain, W = set_.codomain;
    for (std::size_t i = 0; i < P; ++i) instructions_.push_back({set_.problems[i].name, TaskKind::Code, i});
    std::vector<double> prior(P * D * W);
    std::vector<int> bug(P * D);
    std::vector<char> edge(P * D);
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t x = 0; x < D; ++x) {
        const int xi = static_cast<int>(x);
        const int ref = set_.reference(i, xi);
        const bool is_edge = set_.is_edge(i, xi);
        bug[i * D + x] = set_.plausible_bug(i, xi);
        edge[i * D + x] = is_edge ? 1 : 0;
        auto rng = make_stream(cfg_.prior_seed, {tag("code-prior"), i, x});
        std::normal_distribution<double> noise(0.0, cfg_.sigma_init);
        for (std::size_t v = 0; v < W; ++v) {
          double l = noise(rng);
          if (static_cast<int>(v) == ref) l += cfg_.b_true;
          if (is_edge && static_cast<int>(v) == bug[i * D + x]) l += cfg_.b_bug;
          prior[(i * D + x) * W + v] = l;
        }
      }
    }
    generator_basis_ = std::make_shared<detail::CodeGeneratorBasis>(std::move(prior), std::move(bug), std::move(edge), D, W);
    critic_basis_ = std::make_shared<detail::CodeCriticBasis>(P, D, W, cfg_.input_buckets);
  }

  TaskKind kind() const override { return TaskKind::Code; }
  std::span<const Instruction> instructions() const override { return instructions_; }
  std::size_t num_train() const override { return set_.num_train; }
  const CodeProblemSet& problems() const { return set_; }
  const CodeTaskConfig& config() const { return cfg_; }

  GeneratorShape generator_shape() const override { return {set_.problems.size(), set_.domain, set_.codomain}; }
  std::shared_ptr<const GeneratorBasis> generator_basis() const override { return generator_basis_; }
  std::shared_ptr<const CriticBasis> critic_basis() const override { return critic_basis_; }

  /// Runs the test input on the reference and on the candidate table.
  ValidatorVerdict validate(const Instruction& s, const OutputValue& a, const RubricProposal& c,
                            std::uint64_t /*nonce*/) const override {
    check_instruction(s);
    const auto* p = c.code();
    if (!p) return {Verdict::InvalidProposal, "proposal is not a test input"};
    if (p->input < 0 || p->input >= static_cast<long long>(set_.domain))
      return {Verdict::InvalidProposal, "test input " + std::to_string(p->input) + " is outside the domain"};
    const int x = static_cast<int>(p->input);
    const int expected = set_.reference(s.payload, x);
    const auto* body = a.code();
    if (!body || static_cast<std::size_t>(x) >= body->table.size())
      return {Verdict::GeneratorFails, "candidate has no output for input " + std::to_string(x)};
    if (body->table[static_cast<std::size_t>(x)] != expected)
      return {Verdict::GeneratorFails, "expected " + std::to_string(expected) + ", got " +
                                           std::to_string(body->table[static_cast<std::size_t>(x)])};
    return {Verdict::GeneratorPasses, std::nullopt};
  }

  std::vector<RubricProposal> enumerate_rubrics(const Instruction& s, const OutputValue&) const override {
    check_instruction(s);
    std::vector<RubricProposal> out;
    for (std::size_t x = 0; x < set_.domain; ++x) out.emplace_back(CodeProposal{static_cast<long long>(x)});
    return out;
  }

  OutputScore exact_output_score(const Instruction& s, const OutputValue& a) const override {
    check_instruction(s);
    OutputScore score;
    const auto* body = a.code();
    for (std::size_t x = 0; x < set_.domain; ++x) {
      const bool ok = body && x < body->table.size() && body->table[x] == set_.reference(s.payload, static_cast<int>(x));
      ++(ok ? score.num_correct : score.num_incorrect);
    }
    return score;
  }

  std::size_t reward_feature_dim() const override { return cfg_.input_buckets * set_.codomain; }
  SparseRow reward_features(const Instruction&, const OutputValue& a) const override {
    SparseRow row;
    const auto& t = a.code()->table;
    for (std::size_t x = 0; x < t.size(); ++x) {
      const std::size_t b = x * cfg_.input_buckets / set_.domain;
      row.emplace_back(b * set_.codomain + static_cast<std::size_t>(t[x]), 1.0);
    }
    return row;
  }

  std::string fixture_fingerprint() const override {
    std::ostringstream os;
    write_code_problems(set_, os);
    os << "b_true=" << cfg_.b_true << " b_bug=" << cfg_.b_bug << " sigma=" << cfg_.sigma_init
       << " prior_seed=" << cfg_.prior_seed << " buckets=" << cfg_.input_buckets;
    char buf[32];
    std::snprintf(buf, sizeof buf, "code-%016llx", static_cast<unsigned long long>(fnv1a64(os.str())));
    return buf;
  }

 private:
  CodeProblemSet set_;
  CodeTaskConfig cfg_;
  std::vector<Instruction> instructions_;
  std::shared_ptr<const detail::CodeGeneratorBasis> generator_basis_;
  std::shared_ptr<const detail::CodeCriticBasis> critic_basis_;
};

}  // namespace rlac
