// rlac: run, ablate and check experiments; collect preference data from
// remote endpoints.
//
// Exit codes: 0 ok, 1 a check failed (oracle mismatch, ablation direction),
// 2 configuration or usage error, 3 diverged or non-finite update, 4 other.
// Logs go to stderr; stdout only carries result paths and reports.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlac/ablation.hpp"
#include "rlac/bridge/collect.hpp"
#include "rlac/bridge/config.hpp"
#include "rlac/bridge/dataset.hpp"
#include "rlac/checks.hpp"
#include "rlac/config.hpp"
#include "rlac/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kConfigError = 2, kDiverged = 3, kOther = 4;

int exit_code_for(rlac::ErrorCode c) {
  using rlac::ErrorCode;
  switch (c) {
    case ErrorCode::Config:
    case ErrorCode::UnknownInstruction:
    case ErrorCode::EmptyRubricSet:
      return kConfigError;
    case ErrorCode::DivergedUpdate:
    case ErrorCode::NonFinite:
      return kDiverged;
    default:
      return kOther;
  }
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path fresh_run_dir(const fs::path& root, std::uint64_t seed) {
  const std::string base = utc_stamp() + "-seed" + std::to_string(seed);
  fs::path dir = root / base;
  for (int i = 1; fs::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
  return dir;
}

void log_round(const std::string& who, const rlac::RoundLog& r) {
  std::fprintf(stderr, "[%s] round %zu precision %.4f kl %.4f calls %llu", who.c_str(), r.round, r.precision,
               r.kl_from_base, static_cast<unsigned long long>(r.validator_calls_cumulative));
  if (r.detection_rate) std::fprintf(stderr, " detection %.4f", *r.detection_rate);
  std::fprintf(stderr, "\n");
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string run_dir;
};

rlac::LoadedConfig load(const Common& c) { return rlac::load_config_file(c.config, c.overrides); }

int cmd_run(const Common& c) {
  const auto loaded = load(c);
  const auto cfg = rlac::to_experiment(loaded);
  const fs::path dir = c.run_dir.empty() ? fresh_run_dir(rlac::output_root(loaded), cfg.training.seed) : fs::path(c.run_dir);
  fs::create_directories(dir);
  rlac::ExperimentHooks hooks;
  hooks.on_round = [&](const rlac::RoundLog& r) { log_round(cfg.name, r); };
  const auto run = rlac::run_experiment(cfg, dir, hooks);
  const auto& fin = run.final_round();
  std::fprintf(stderr, "final precision %.4f (base %.4f), training calls %llu\n", fin.precision,
               run.rounds.front().precision, static_cast<unsigned long long>(fin.validator_calls_cumulative));
  std::cout << dir.string() << "\n";
  return kOk;
}

int cmd_ablate(const Common& c) {
  const auto loaded = load(c);
  const auto cfg = rlac::to_experiment(loaded);
  const fs::path dir = c.run_dir.empty() ? fresh_run_dir(rlac::output_root(loaded), cfg.training.seed) : fs::path(c.run_dir);
  fs::create_directories(dir);
  const auto runs = rlac::run_ablation(cfg, dir, log_round);
  const auto summary = rlac::compare_runs(runs.all(), cfg.report_threshold);
  rlac::detail::write_file(dir / "summary.tsv", rlac::format_summary(summary));
  std::string report;
  bool all = true;
  for (const auto& chk : rlac::ablation_checks(runs)) {
    report += std::string(chk.pass ? "PASS" : "FAIL") + "\t" + chk.name + "\t" + chk.detail + "\n";
    all = all && chk.pass;
  }
  rlac::detail::write_file(dir / "checks.tsv", report);
  std::cerr << report;
  for (const char* m : {"RLAC", "StaticCritic", "NoisyValidator", "RewardModel"}) std::cout << (dir / m).string() << "\n";
  std::cout << (dir / "summary.tsv").string() << "\n";
  return all ? kOk : kCheckFailed;
}

int cmd_oracle_check(const Common& c, bool corrupt) {
  const auto loaded = load(c);
  const auto cfg = rlac::to_experiment(loaded);
  const auto task = rlac::make_task(cfg.task);
  std::shared_ptr<const rlac::Validator> validator = rlac::borrow(*task);
  if (corrupt) validator = std::make_shared<rlac::CorruptedValidator>(validator);

  const auto seed = cfg.training.seed;
  const auto identity = rlac::min_identity_sweep(12, 10000, seed);
  const auto sweep = rlac::oracle_sweep(*task, *validator, 1000, seed);
  const auto gen = rlac::generator_gradient_check(*task, 100, seed);
  const auto crit = rlac::critic_gradient_check(*task, 100, seed);
  const bool grads_ok = gen.max_rel_error <= 1e-6 && crit.max_rel_error <= 1e-6;

  std::printf("identity vectors %zu mismatches %zu\n", identity.vectors_checked, identity.mismatch_count);
  std::printf("oracle pairs %zu validator_calls %zu mismatches %zu\n", sweep.pairs_checked, sweep.validator_calls,
              sweep.mismatch_count);
  std::printf("gradient generator points %zu components %zu max_rel_error %.3e\n", gen.points, gen.components,
              gen.max_rel_error);
  std::printf("gradient critic points %zu components %zu max_rel_error %.3e\n", crit.points, crit.components,
              crit.max_rel_error);
  for (const auto* rep : {&identity, &sweep})
    for (const auto& m : rep->mismatches)
      std::printf("mismatch instruction=%s output=%s: %s\n", m.instruction.c_str(), m.output.c_str(), m.detail.c_str());
  const bool ok = identity.ok() && sweep.ok() && grads_ok;
  std::printf("%s\n", ok ? "ok" : "FAILED");
  return ok ? kOk : kCheckFailed;
}

int cmd_print_config(const Common& c) {
  if (c.config.empty() && c.overrides.empty()) {
    std::cout << rlac::config_echo(rlac::default_config());
    return kOk;
  }
  auto j = rlac::default_config();
  if (!c.config.empty()) {
    j = rlac::load_config_file(c.config, c.overrides).resolved;
  } else {
    for (const auto& o : c.overrides) rlac::apply_override(j, o);
  }
  std::cout << rlac::config_echo(j);
  return kOk;
}

int cmd_make_fixtures(const Common& c, const std::string& out_dir) {
  auto j = rlac::default_config();
  j["seed"] = 0u;  // unused here
  rlac::LoadedConfig loaded;
  if (!c.config.empty()) {
    loaded = rlac::load_config_file(c.config, c.overrides);
  } else {
    for (const auto& o : c.overrides) rlac::apply_override(j, o);
    loaded = {j, fs::current_path()};
  }
  const auto cfg = rlac::to_experiment(loaded);
  fs::create_directories(out_dir);
  const auto& fg = cfg.task.factual_gen;
  const auto kb = rlac::generate_knowledge_base(fg.train, fg.test, fg.slots, fg.values, fg.zipf, fg.seed);
  std::ostringstream kb_text;
  rlac::write_knowledge_base(kb, kb_text);
  const auto& cg = cfg.task.code_gen;
  const auto problems = rlac::generate_code_problems(cg.train, cg.test, cg.domain, cg.codomain, cg.seed);
  std::ostringstream code_text;
  rlac::write_code_problems(problems, code_text);
  const fs::path kb_path = fs::path(out_dir) / "factual_kb.txt", code_path = fs::path(out_dir) / "code_problems.txt";
  rlac::detail::write_file(kb_path, kb_text.str());
  rlac::detail::write_file(code_path, code_text.str());
  std::cout << kb_path.string() << "\n" << code_path.string() << "\n";
  return kOk;
}

int cmd_collect(const std::string& bridge_path, const std::string& prompts_path, const std::string& out_dir) {
  namespace b = rlac::bridge;
  const auto cfg = b::parse_bridge_config(b::read_text_file(bridge_path));
  const auto prompts = b::parse_prompts(b::read_text_file(prompts_path));
  b::ChatClient client(cfg.endpoint);
  rlac::bridge::CollectResult res;
  try {
    res = b::collect_round(client, prompts, cfg.collect);
  } catch (...) {
    fs::create_directories(out_dir);
    rlac::detail::write_file(fs::path(out_dir) / "requests.jsonl", client.log().to_jsonl());
    throw;
  }
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  rlac::detail::write_file(dir / "requests.jsonl", client.log().to_jsonl());
  rlac::detail::write_file(dir / "verdicts.jsonl", res.verdicts_jsonl());
  std::fprintf(stderr, "%zu records, %zu verdicts, %zu plugin calls, max in flight %zu\n", res.records.size(),
               res.verdicts.size(), res.plugin_calls, client.log().max_in_flight());
  if (res.records.empty()) {
    std::fprintf(stderr, "no preference pairs: every sample got the same verdict\n");
  } else {
    b::export_dpo_dataset(res.records, dir / "dataset.jsonl");
    std::cout << (dir / "dataset.jsonl").string() << "\n";
  }
  std::cout << (dir / "verdicts.jsonl").string() << "\n" << (dir / "requests.jsonl").string() << "\n";
  return kOk;
}

void add_common(CLI::App* sub, Common& c, bool with_run_dir) {
  sub->add_option("-c,--config", c.config, "JSON config file");
  sub->add_option("--set", c.overrides, "override a config value, e.g. training.mode=Enumerative")->take_all();
  if (with_run_dir) sub->add_option("--run-dir", c.run_dir, "write artifacts here instead of a fresh timestamped directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rlac: generator/critic training at desk scale"};
  app.require_subcommand(1);
  Common common;

  auto* run = app.add_subcommand("run", "train one configuration and write its run directory");
  add_common(run, common, true);
  run->get_option("--config")->required();

  auto* ablate = app.add_subcommand("ablate", "RLAC, StaticCritic, NoisyValidator and RewardModel on one seed");
  add_common(ablate, common, true);
  ablate->get_option("--config")->required();

  bool corrupt = false;
  auto* oracle = app.add_subcommand("oracle-check", "exhaustive reward identities and gradient checks");
  add_common(oracle, common, false);
  oracle->get_option("--config")->required();
  oracle->add_flag("--corrupt-validator", corrupt)->group("");  // negative-control hook

  auto* print = app.add_subcommand("print-config", "print the default or resolved configuration");
  add_common(print, common, false);

  std::string fixtures_out = "fixtures";
  auto* fixtures = app.add_subcommand("make-fixtures", "write generated task fixtures");
  add_common(fixtures, common, false);
  fixtures->add_option("-o,--out", fixtures_out, "output directory");

  std::string bridge_cfg, prompts_file, collect_out;
  auto* collect = app.add_subcommand("collect", "sample remote models and export DPO preference pairs");
  collect->add_option("--bridge", bridge_cfg, "bridge config (endpoint, validator plugin, collect)")->required();
  collect->add_option("--prompts", prompts_file, "one topic or problem per line")->required();
  collect->add_option("-o,--out", collect_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(common);
    if (*ablate) return cmd_ablate(common);
    if (*oracle) return cmd_oracle_check(common, corrupt);
    if (*print) return cmd_print_config(common);
    if (*fixtures) return cmd_make_fixtures(common, fixtures_out);
    if (*collect) return cmd_collect(bridge_cfg, prompts_file, collect_out);
  } catch (const rlac::Error& e) {
    std::fprintf(stderr, "rlac: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rlac: %s\n", e.what());
    return kOther;
  }
  return kOther;
}
