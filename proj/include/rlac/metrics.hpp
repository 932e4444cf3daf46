#pragma once

// Round logs, run records and the metrics computed from them.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlac/error.hpp"

namespace rlac {

/// Correct / (correct + incorrect). Accepts fractional (averaged) counts.
inline double precision(double num_correct, double num_incorrect) {
  const double total = num_correct + num_incorrect;
  if (!(total > 0.0)) throw Error(ErrorCode::UndefinedPrecision, "precision of zero facts");
  return num_correct / total;
}

struct RoundLog {
  std::size_t round = 0;
  double precision = 0.0;            // held-out
  std::uint64_t num_correct = 0;     // held-out totals
  std::uint64_t num_incorrect = 0;
  std::uint64_t num_outputs = 0;     // held-out outputs scored
  double exact_match_rate = 0.0;     // held-out outputs with no incorrect rubric
  double kl_from_base = 0.0;         // held-out instructions
  std::uint64_t validator_calls_cumulative = 0;
  std::optional<double> detection_rate;          // valid proposals exposing an error
  std::optional<double> validator_outcome_rate;  // valid proposals the output satisfies
  std::optional<double> invalid_rate;            // proposals rejected as unauthentic
  std::optional<double> train_precision;         // sampled training outputs
  std::optional<double> loss_generator;          // mean over the round's final epoch
  std::optional<double> loss_critic;
  std::uint64_t generator_pairs = 0;
  std::uint64_t critic_pairs = 0;

  double mean_correct() const { return num_outputs ? double(num_correct) / double(num_outputs) : 0.0; }
  double mean_incorrect() const { return num_outputs ? double(num_incorrect) / double(num_outputs) : 0.0; }
};

inline constexpr const char* kRoundsSchema = "rlac-rounds/1";
inline constexpr const char* kLibraryVersion = "0.3.0";

struct RunArtifacts {
  std::string run_id;
  std::string mode;
  std::string config_echo;           // resolved configuration text, verbatim
  std::string fixture_fingerprint;
  std::uint64_t seed = 0;
  std::string version = kLibraryVersion;
  std::vector<RoundLog> rounds;      // rounds[i].round == i, round 0 is the base policy
  std::string generator_checkpoint;  // checkpoint text, empty if not kept
  std::string critic_checkpoint;

  const RoundLog& final_round() const {
    if (rounds.empty()) throw Error(ErrorCode::Config, "run '" + run_id + "' has no rounds");
    return rounds.back();
  }
};

namespace detail {

inline std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

inline std::string fixed6(const std::optional<double>& x) { return x ? fixed6(*x) : std::string(); }

inline nlohmann::ordered_json optional_json(const std::optional<double>& x) {
  return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

}  // namespace detail

inline constexpr const char* kRoundColumns =
    "round,precision,correct,incorrect,kl,calls_cum,detection_rate,outcome_rate,loss_gen,loss_critic";

/// Comma-separated table; correct/incorrect are per-output means. Empty
/// fields mean "not defined for this round/mode".
inline std::string rounds_csv(const RunArtifacts& run) {
  std::ostringstream os;
  os << "# schema=" << kRoundsSchema << " run=" << run.run_id << " mode=" << run.mode << "\n";
  os << kRoundColumns << "\n";
  for (const auto& r : run.rounds) {
    os << r.round << ',' << detail::fixed6(r.precision) << ',' << detail::fixed6(r.mean_correct()) << ','
       << detail::fixed6(r.mean_incorrect()) << ',' << detail::fixed6(r.kl_from_base) << ','
       << r.validator_calls_cumulative << ',' << detail::fixed6(r.detection_rate) << ','
       << detail::fixed6(r.validator_outcome_rate) << ',' << detail::fixed6(r.loss_generator) << ','
       << detail::fixed6(r.loss_critic) << "\n";
  }
  return os.str();
}

/// One header record (schema, fingerprint, config echo) then one record per round.
inline std::string rounds_jsonl(const RunArtifacts& run) {
  using nlohmann::ordered_json;
  std::ostringstream os;
  ordered_json head;
  head["schema"] = kRoundsSchema;
  head["run"] = run.run_id;
  head["mode"] = run.mode;
  head["seed"] = run.seed;
  head["version"] = run.version;
  head["fixture"] = run.fixture_fingerprint;
  head["config"] = run.config_echo;
  os << head.dump() << "\n";
  for (const auto& r : run.rounds) {
    ordered_json j;
    j["round"] = r.round;
    j["precision"] = r.precision;
    j["correct"] = r.mean_correct();
    j["incorrect"] = r.mean_incorrect();
    j["kl"] = r.kl_from_base;
    j["calls_cum"] = r.validator_calls_cumulative;
    j["detection_rate"] = detail::optional_json(r.detection_rate);
    j["outcome_rate"] = detail::optional_json(r.validator_outcome_rate);
    j["loss_gen"] = detail::optional_json(r.loss_generator);
    j["loss_critic"] = detail::optional_json(r.loss_critic);
    j["exact_match"] = r.exact_match_rate;
    j["invalid_rate"] = detail::optional_json(r.invalid_rate);
    j["train_precision"] = detail::optional_json(r.train_precision);
    j["generator_pairs"] = r.generator_pairs;
    j["critic_pairs"] = r.critic_pairs;
    j["outputs"] = r.num_outputs;
    os << j.dump() << "\n";
  }
  return os.str();
}

struct ExportedFiles {
  std::filesystem::path csv;
  std::filesystem::path jsonl;
};

inline ExportedFiles export_rounds(const RunArtifacts& run, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
  ExportedFiles files{dir / "rounds.csv", dir / "rounds.jsonl"};
  detail::write_file(files.csv, rounds_csv(run));
  detail::write_file(files.jsonl, rounds_jsonl(run));
  return files;
}

/// Calls spent when precision first reaches `threshold`, interpolating
/// linearly between the bracketing rounds. nullopt if never reached.
inline std::optional<double> calls_to_threshold(const std::vector<RoundLog>& rounds, double threshold) {
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (rounds[i].precision < threshold) continue;
    const double c1 = static_cast<double>(rounds[i].validator_calls_cumulative);
    if (i == 0) return c1;
    const double p0 = rounds[i - 1].precision, p1 = rounds[i].precision;
    const double c0 = static_cast<double>(rounds[i - 1].validator_calls_cumulative);
    return c0 + (threshold - p0) / (p1 - p0) * (c1 - c0);
  }
  return std::nullopt;
}

/// Calls at the first logged round whose precision reaches `threshold`.
inline std::optional<std::uint64_t> calls_at_first_round_reaching(const std::vector<RoundLog>& rounds,
                                                                  double threshold) {
  for (const auto& r : rounds)
    if (r.precision >= threshold) return r.validator_calls_cumulative;
  return std::nullopt;
}

struct CompareRow {
  std::string run_id;
  std::string mode;
  double final_precision = 0.0;
  std::uint64_t total_calls = 0;
  double final_kl = 0.0;
  std::optional<double> calls_to_threshold;
  friend bool operator==(const CompareRow&, const CompareRow&) = default;
};

struct CompareSummary {
  double threshold = 0.0;
  std::vector<CompareRow> rows;  // sorted by run id
};

inline CompareSummary compare_runs(const std::vector<RunArtifacts>& runs, double threshold) {
  CompareSummary out;
  out.threshold = threshold;
  std::set<std::string> fixtures;
  for (const auto& r : runs) fixtures.insert(r.fixture_fingerprint);
  if (fixtures.size() > 1) {
    std::string list;
    for (const auto& f : fixtures) list += (list.empty() ? "" : ", ") + f;
    throw Error(ErrorCode::IncomparableRuns, "runs use different task fixtures: " + list);
  }
  for (const auto& r : runs) {
    const auto& last = r.final_round();
    out.rows.push_back({r.run_id, r.mode, last.precision, last.validator_calls_cumulative, last.kl_from_base,
                        calls_to_threshold(r.rounds, threshold)});
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const CompareRow& a, const CompareRow& b) { return a.run_id < b.run_id; });
  return out;
}

inline std::string format_summary(const CompareSummary& s) {
  std::ostringstream os;
  os << "run\tmode\tfinal_precision\ttotal_calls\tfinal_kl\tcalls_to_" << detail::fixed6(s.threshold) << "\n";
  for (const auto& r : s.rows) {
    os << r.run_id << '\t' << r.mode << '\t' << detail::fixed6(r.final_precision) << '\t' << r.total_calls << '\t'
       << detail::fixed6(r.final_kl) << '\t';
    if (r.calls_to_threshold) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.1f", *r.calls_to_threshold);
      os << buf;
    } else {
      os << "unreached";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace rlac
