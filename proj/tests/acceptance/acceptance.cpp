// Acceptance battery: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Runs from the committed configs and fixtures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "rlac/ablation.hpp"
#include "rlac/bridge/collect.hpp"
#include "rlac/checks.hpp"
#include "rlac/code_task.hpp"
#include "rlac/config.hpp"
#include "rlac/dpo.hpp"
#include "rlac/experiment.hpp"
#include "rlac/metrics.hpp"
#include "rlac/trainer.hpp"
#include "../mock_endpoint.hpp"

namespace fs = std::filesystem;
using namespace rlac;

namespace {

const fs::path kSource(RLAC_SOURCE_DIR);

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
    if (!ok) {
      detail += " [x]";
      pass = false;
    }
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig load(const std::string& name, std::vector<std::string> overrides = {}) {
  return to_experiment(load_config_file(kSource / "configs" / name, overrides));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("rlac-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Every regular file under `a` exists under `b` with the same bytes.
bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
  files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    if (slurp(e.path()) != slurp(b / fs::relative(e.path(), a))) return false;
  }
  return files > 0;
}

// State shared between criteria: criterion 9 re-runs the artifacts of 5 and 6.
struct Shared {
  fs::path rlac_dir;
  fs::path ablation_dir;
} shared;

Outcome min_max_identity() {
  Outcome v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto id = min_identity_sweep(12, 10000, 1);
  v.require(id.ok() && id.vectors_checked == 8190 + 10000,
            "product=min on " + std::to_string(id.vectors_checked) + " vectors, " + std::to_string(id.mismatch_count) +
                " mismatches");
  for (const char* cfg : {"factual.json", "code.json"}) {
    const auto task = make_task(load(cfg).task);
    const auto sweep = oracle_sweep(*task, *task, 1000, 1);
    v.require(sweep.ok() && sweep.pairs_checked == 1000,
              std::string(cfg) + " worst-case = enumerative on " + std::to_string(sweep.pairs_checked) + " pairs");
  }
  const double t = seconds_since(t0);
  v.require(t < 5.0, fmt("%.2f s < 5 s", t));
  return v;
}

Outcome gradients() {
  Outcome v;
  const auto t0 = std::chrono::steady_clock::now();
  for (const char* cfg : {"factual.json", "code.json"}) {
    const auto task = make_task(load(cfg).task);
    const auto g = generator_gradient_check(*task, 100, 1);
    const auto c = critic_gradient_check(*task, 100, 1);
    v.require(g.points == 100 && g.max_rel_error <= 1e-6, std::string(cfg) + fmt(" generator %.2e", g.max_rel_error));
    v.require(c.points == 100 && c.max_rel_error <= 1e-6, std::string(cfg) + fmt(" critic %.2e", c.max_rel_error));
  }
  const double t = seconds_since(t0);
  v.require(t < 10.0, fmt("%.2f s < 10 s", t));
  return v;
}

Outcome analytic_fixtures() {
  Outcome v;
  const double l = dpo_loss(-2.5, -4.0, -2.5, -4.0, 0.1);
  v.require(std::abs(l - std::log(2.0)) <= 1e-9, fmt("dpo loss at reference %.12f", l));
  const double p1 = precision(24.33, 3.03), p2 = precision(13.14, 3.37);
  v.require(std::abs(p1 - 0.889) <= 5e-4, fmt("precision %.4f", p1));
  v.require(std::abs(p2 - 0.796) <= 5e-4, fmt("precision %.4f", p2));
  return v;
}

Outcome call_ledger() {
  Outcome v;
  auto cfg = load("factual.json");
  const auto task = make_task(cfg.task);
  auto& t = cfg.training;
  v.require(t.batch == 120 && t.outputs_per_prompt == 10 && t.critic_proposals == 4, "batch 120, K 10, N 4");

  auto gen_only = t;
  gen_only.critic_phase = false;
  TrainerState g(task, gen_only), full(task, t);
  auto enum_cfg = t;
  enum_cfg.mode = Mode::Enumerative;
  TrainerState e(task, enum_cfg);
  bool exact = true;
  for (std::uint64_t r = 1; r <= 2; ++r) {
    exact = exact && g.run_round().validator_calls_cumulative == 1200 * r;
    exact = exact && full.run_round().validator_calls_cumulative == 6000 * r;
    exact = exact && e.run_round().validator_calls_cumulative == 9600 * r;
  }
  v.require(exact, "per round: generator 1200, critic 4800, enumerative 9600 over 2 rounds");
  return v;
}

Outcome factual_improvement() {
  Outcome v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load("factual.json");
  shared.rlac_dir = scratch("c5-rlac");
  const auto rl = run_experiment(cfg, shared.rlac_dir);
  const double base = rl.rounds.front().precision, fin = rl.final_round().precision;
  const auto rl_calls = rl.final_round().validator_calls_cumulative;
  v.require(cfg.training.rounds <= 50, std::to_string(cfg.training.rounds) + " rounds");
  v.require(fin >= base + 0.15, fmt("precision %.4f", base) + fmt(" -> %.4f", fin));

  // enumerative run on the same seed until it matches RLAC's final precision
  auto enum_training = cfg.training;
  enum_training.mode = Mode::Enumerative;
  TrainerState e(make_task(cfg.task), enum_training);
  std::vector<RoundLog> logs{e.evaluate()};
  while (logs.back().precision < fin && logs.size() <= 50) logs.push_back(e.run_round());
  const auto matched = calls_to_threshold(logs, fin);
  if (!matched) {
    v.require(false, "enumerative never reached " + fmt("%.4f", fin) + " in 50 rounds");
  } else {
    const double ratio = static_cast<double>(rl_calls) / *matched;
    v.require(static_cast<double>(rl_calls) < *matched,
              "calls " + std::to_string(rl_calls) + " vs enumerative " + fmt("%.0f", *matched));
    v.require(ratio <= 1.0 / 3.0, fmt("ratio %.3f <= 0.333", ratio));
  }
  const double t = seconds_since(t0);
  v.require(t < 120.0, fmt("%.1f s < 120 s", t));
  return v;
}

Outcome ablation_directions() {
  Outcome v;
  const auto t0 = std::chrono::steady_clock::now();
  shared.ablation_dir = scratch("c6-ablation");
  const auto runs = run_ablation(load("factual.json"), shared.ablation_dir);
  for (const auto& chk : ablation_checks(runs)) v.require(chk.pass, chk.name + " " + chk.detail);
  const double t = seconds_since(t0);
  v.require(t < 600.0, fmt("%.1f s < 600 s", t));
  return v;
}

Outcome code_improvement() {
  Outcome v;
  const auto cfg = load("code.json");
  v.require(cfg.training.outputs_per_prompt == 8 && cfg.training.critic_proposals == 2, "k 8, n 2");
  const auto run = run_experiment(cfg);
  const double base = run.rounds.front().exact_match_rate, fin = run.final_round().exact_match_rate;
  v.require(fin - base >= 0.10, fmt("exact match %.4f", base) + fmt(" -> %.4f", fin));
  const auto task = make_task(cfg.task);
  const auto domain = std::static_pointer_cast<const CodeTask>(task)->problems().domain;
  const double per_round = static_cast<double>(run.rounds[1].validator_calls_cumulative);
  const double exhaustive = static_cast<double>(cfg.training.batch * cfg.training.outputs_per_prompt * domain);
  v.require(per_round / exhaustive <= 0.25,
            fmt("calls per round %.0f", per_round) + fmt(" vs exhaustive %.0f", exhaustive));
  return v;
}

Outcome bridge_conformance() {
  namespace b = rlac::bridge;
  Outcome v;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = kSource / "fixtures/bridge";

  const auto einstein = b::parse_factual_reply(slurp(dir / "einstein.txt"), 4);
  const auto call = b::parse_code_reply(slurp(dir / "code_call.txt"));
  const auto stdin_form = b::parse_code_reply(slurp(dir / "code_stdin.txt"));
  v.require(einstein.sentence == 2 && call.form == b::TestcaseForm::Call && stdin_form.form == b::TestcaseForm::Stdin,
            "Einstein reply and both testcase forms parse");

  std::ifstream manifest(dir / "mutations/manifest.tsv");
  std::size_t rejected = 0, total = 0;
  for (std::string line; std::getline(manifest, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string file, kind, code;
    std::getline(row, file, '\t');
    std::getline(row, kind, '\t');
    std::getline(row, code, '\t');
    ++total;
    try {
      b::parse_critic_reply(slurp(dir / "mutations" / file), kind == "code" ? TaskKind::Code : TaskKind::Factual);
    } catch (const Error& e) {
      rejected += to_string(e.code()) == code;
    }
  }
  v.require(total == 10 && rejected == 10, std::to_string(rejected) + "/10 mutations rejected with the listed code");

  rlac::testing::MockServer server(rlac::testing::fake_models);
  b::CollectConfig cc;
  cc.validator = {{(dir / "plugins/factual_keywords.py").string()}, 5000};
  const std::vector<b::CollectPrompt> prompts{{"ada", "Ada Lovelace"}, {"alan", "Alan Turing"}, {"grace", "Grace Hopper"}};
  b::ChatClient client(server.endpoint());
  const auto res = b::collect_round(client, prompts, cc);
  const auto out = scratch("c8-bridge");
  b::export_dpo_dataset(res.records, out / "a.jsonl");
  const auto back = b::read_dpo_dataset(out / "a.jsonl");
  b::export_dpo_dataset(back, out / "b.jsonl");
  v.require(slurp(out / "a.jsonl") == slurp(out / "b.jsonl"), "export -> re-export byte-identical");

  bool traced = !back.empty();
  for (const auto& r : back)
    for (const char* k : {"chosen_verdict", "rejected_verdict"}) {
      const auto id = r.metadata.value(k, res.verdicts.size());
      traced = traced && id < res.verdicts.size() && res.verdicts[id].verdict.has_value();
    }
  v.require(traced, std::to_string(back.size()) + " records traced to logged verdicts");
  const double t = seconds_since(t0);
  v.require(t < 30.0, fmt("%.1f s < 30 s", t));
  return v;
}

Outcome determinism() {
  Outcome v;
  if (shared.rlac_dir.empty() || shared.ablation_dir.empty()) {
    v.require(false, "criteria 5 and 6 did not produce run directories");
    return v;
  }
  const auto cfg = load("factual.json");
  const auto again = scratch("c9-rlac");
  run_experiment(cfg, again);
  std::size_t files = 0;
  const bool run_same = same_tree(shared.rlac_dir, again, files);
  v.require(run_same, "factual run, " + std::to_string(files) + " files identical");

  const auto abl = scratch("c9-ablation");
  run_ablation(cfg, abl);
  const bool ablation_same = same_tree(shared.ablation_dir, abl, files);
  v.require(ablation_same, "ablation, " + std::to_string(files) + " files identical");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"min-max identity", min_max_identity},
      {"gradient correctness", gradients},
      {"analytic fixtures", analytic_fixtures},
      {"call ledger", call_ledger},
      {"factual improvement", factual_improvement},
      {"ablation directions", ablation_directions},
      {"code improvement", code_improvement},
      {"bridge conformance", bridge_conformance},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("threw ") + e.what();
    }
    failed += !v.pass;
    std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(fs::temp_directory_path() / ("rlac-acceptance-" + std::to_string(::getpid())));
  return failed ? 1 : 0;
}
