#pragma once

// JSON run configuration. Every key has a default in default_config();
// files and --set overrides may only replace existing keys, with the same
// JSON type. The seed has no default and must be given.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rlac/error.hpp"
#include "rlac/experiment.hpp"

namespace rlac {

using Json = nlohmann::ordered_json;

inline Json default_config() {
  auto optimizer = [] {
    return Json{{"beta", 0.1}, {"learning_rate", 0.05}, {"epochs_per_round", 3u}, {"pair_cap_per_instruction", 16u}};
  };
  Json j;
  j["name"] = "run";
  j["seed"] = nullptr;
  j["task"] = {{"kind", "factual"}, {"fixture", ""}};
  j["factual"] = {{"claims", 8u},
                  {"b_true", 2.8},
                  {"sigma_init", 1.0},
                  {"slot_difficulty_spread", 1.0},
                  {"prior_seed", 7u},
                  {"misquote_candidates", true},
                  {"critic_b_true", 2.8},
                  {"critic_sigma", 1.0},
                  {"critic_doubt_scale", 0.075},
                  {"generate", {{"train", 120u}, {"test", 50u}, {"slots", 8u}, {"values", 8u}, {"zipf", 1.0}, {"seed", 3u}}}};
  j["code"] = {{"b_true", 8.0},
               {"b_bug", 8.5},
               {"sigma_init", 0.8},
               {"prior_seed", 11u},
               {"input_buckets", 8u},
               {"generate", {{"train", 120u}, {"test", 50u}, {"domain", 32u}, {"codomain", 16u}, {"seed", 5u}}}};
  j["training"] = {{"mode", "RLAC"},
                   {"rounds", 20u},
                   {"batch", 120u},
                   {"outputs_per_prompt", 10u},
                   {"critic_proposals", 4u},
                   {"proposals_per_output_reward", 1u},
                   {"critic_phase", true},
                   {"eval_samples", 10u},
                   {"reward_model_pairs", 4000u},
                   {"parallel_rollouts", false},
                   {"noise_seed", 0u}};
  j["optimizer"] = {{"generator", optimizer()}, {"critic", optimizer()}};
  j["output"] = {{"root", "runs"}, {"checkpoints", true}};
  j["report"] = {{"precision_threshold", 0.75}};
  return j;
}

namespace detail {

inline const char* type_name(const Json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_unsigned()) return "non-negative integer";
  if (v.is_number_integer()) return "integer";
  if (v.is_number_float()) return "number";
  if (v.is_string()) return "string";
  if (v.is_object()) return "object";
  return "array";
}

/// Assigns `value` to the existing slot `dst`, converting where the schema
/// allows it (integers into number slots).
inline void assign_checked(Json& dst, const Json& value, const std::string& key, bool nullable_uint) {
  auto fail = [&](const char* want) {
    throw Error(ErrorCode::Config, "key '" + key + "' expects a " + want + ", got " + type_name(value));
  };
  if (nullable_uint || dst.is_number_unsigned()) {
    if (value.is_number_unsigned()) {
      dst = value;
      return;
    }
    fail("non-negative integer");
  }
  if (dst.is_number_float()) {
    if (!value.is_number()) fail("number");
    dst = value.get<double>();
    return;
  }
  if (dst.is_boolean() && !value.is_boolean()) fail("boolean");
  if (dst.is_string() && !value.is_string()) fail("string");
  dst = value;
}

inline void merge(Json& dst, const Json& src, const std::string& prefix) {
  if (!src.is_object()) throw Error(ErrorCode::Config, "'" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) throw Error(ErrorCode::Config, "unknown config key '" + key + "'");
    Json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge(slot, it.value(), key);
    } else {
      assign_checked(slot, it.value(), key, key == "seed");
    }
  }
}

inline Json* find_dotted(Json& root, const std::string& dotted) {
  Json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
    if (dot == std::string::npos) return node;
    start = dot + 1;
  }
}

template <class T>
T get(const Json& j, const char* key) {
  return j.at(key).get<T>();
}

inline OptimizerConfig optimizer_from(const Json& j) {
  OptimizerConfig o;
  o.beta = get<double>(j, "beta");
  o.learning_rate = get<double>(j, "learning_rate");
  o.epochs_per_round = get<std::size_t>(j, "epochs_per_round");
  o.pair_cap_per_instruction = get<std::size_t>(j, "pair_cap_per_instruction");
  return o;
}

}  // namespace detail

/// Applies "dotted.key=value". The value is parsed as JSON unless the key
/// holds a string, in which case the raw text is used.
inline void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorCode::Config, "override '" + assignment + "' is not of the form key=value");
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  Json* slot = detail::find_dotted(config, key);
  if (!slot) throw Error(ErrorCode::Config, "unknown config key '" + key + "'");
  if (slot->is_object()) throw Error(ErrorCode::Config, "key '" + key + "' is a section, not a value");
  Json value;
  if (slot->is_string()) {
    value = text;
  } else {
    value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) throw Error(ErrorCode::Config, "override for '" + key + "' is not a valid value: " + text);
  }
  detail::assign_checked(*slot, value, key, key == "seed");
}

struct LoadedConfig {
  Json resolved;
  std::filesystem::path base_dir;  // relative fixture paths resolve against this
};

inline LoadedConfig load_config_text(const std::string& text, const std::filesystem::path& base_dir,
                                     const std::vector<std::string>& overrides = {}) {
  LoadedConfig out{default_config(), base_dir};
  const Json file = Json::parse(text, nullptr, false, true);
  if (file.is_discarded()) throw Error(ErrorCode::Config, "configuration is not valid JSON");
  detail::merge(out.resolved, file, "");
  for (const auto& o : overrides) apply_override(out.resolved, o);
  if (const char* env = std::getenv("RLAC_OUT_DIR"); env && *env) out.resolved["output"]["root"] = env;
  if (out.resolved["seed"].is_null()) throw Error(ErrorCode::Config, "config key 'seed' is mandatory");
  return out;
}

inline LoadedConfig load_config_file(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, "cannot read config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_config_text(buf.str(), path.parent_path(), overrides);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

inline std::string config_echo(const Json& resolved) { return resolved.dump(2) + "\n"; }

inline ExperimentConfig to_experiment(const LoadedConfig& loaded) {
  using detail::get;
  const Json& j = loaded.resolved;
  ExperimentConfig cfg;
  cfg.name = get<std::string>(j, "name");
  cfg.config_echo = config_echo(j);

  const auto& t = j.at("task");
  const auto kind = get<std::string>(t, "kind");
  if (kind == "factual") {
    cfg.task.kind = TaskKind::Factual;
  } else if (kind == "code") {
    cfg.task.kind = TaskKind::Code;
  } else {
    throw Error(ErrorCode::Config, "task.kind must be 'factual' or 'code', got '" + kind + "'");
  }
  const auto fixture = get<std::string>(t, "fixture");
  if (!fixture.empty()) {
    std::filesystem::path p(fixture);
    cfg.task.fixture = p.is_relative() ? loaded.base_dir / p : p;
  }

  const auto& f = j.at("factual");
  auto& fc = cfg.task.factual;
  fc.claims = get<std::size_t>(f, "claims");
  fc.b_true = get<double>(f, "b_true");
  fc.sigma_init = get<double>(f, "sigma_init");
  fc.slot_difficulty_spread = get<double>(f, "slot_difficulty_spread");
  fc.prior_seed = get<std::uint64_t>(f, "prior_seed");
  fc.misquote_candidates = get<bool>(f, "misquote_candidates");
  fc.critic_b_true = get<double>(f, "critic_b_true");
  fc.critic_sigma = get<double>(f, "critic_sigma");
  fc.critic_doubt_scale = get<double>(f, "critic_doubt_scale");
  const auto& fg = f.at("generate");
  cfg.task.factual_gen = {get<std::size_t>(fg, "train"), get<std::size_t>(fg, "test"), get<std::size_t>(fg, "slots"),
                          get<std::size_t>(fg, "values"), get<double>(fg, "zipf"), get<std::uint64_t>(fg, "seed")};

  const auto& c = j.at("code");
  auto& cc = cfg.task.code;
  cc.b_true = get<double>(c, "b_true");
  cc.b_bug = get<double>(c, "b_bug");
  cc.sigma_init = get<double>(c, "sigma_init");
  cc.prior_seed = get<std::uint64_t>(c, "prior_seed");
  cc.input_buckets = get<std::size_t>(c, "input_buckets");
  const auto& cg = c.at("generate");
  cfg.task.code_gen = {get<std::size_t>(cg, "train"), get<std::size_t>(cg, "test"), get<std::size_t>(cg, "domain"),
                       get<std::size_t>(cg, "codomain"), get<std::uint64_t>(cg, "seed")};

  const auto& tr = j.at("training");
  auto& tc = cfg.training;
  tc.mode = parse_mode(get<std::string>(tr, "mode"));
  tc.rounds = get<std::size_t>(tr, "rounds");
  tc.batch = get<std::size_t>(tr, "batch");
  tc.outputs_per_prompt = get<std::size_t>(tr, "outputs_per_prompt");
  tc.critic_proposals = get<std::size_t>(tr, "critic_proposals");
  tc.proposals_per_output_reward = get<std::size_t>(tr, "proposals_per_output_reward");
  tc.critic_phase = get<bool>(tr, "critic_phase");
  tc.eval_samples = get<std::size_t>(tr, "eval_samples");
  tc.reward_model_pairs = get<std::size_t>(tr, "reward_model_pairs");
  tc.parallel_rollouts = get<bool>(tr, "parallel_rollouts");
  tc.noise_seed = get<std::uint64_t>(tr, "noise_seed");
  tc.seed = j.at("seed").get<std::uint64_t>();
  tc.generator_optimizer = detail::optimizer_from(j.at("optimizer").at("generator"));
  tc.critic_optimizer = detail::optimizer_from(j.at("optimizer").at("critic"));
  tc.validate();

  cfg.write_checkpoints = get<bool>(j.at("output"), "checkpoints");
  cfg.report_threshold = get<double>(j.at("report"), "precision_threshold");
  return cfg;
}

inline std::filesystem::path output_root(const LoadedConfig& loaded) {
  std::filesystem::path p(loaded.resolved.at("output").at("root").get<std::string>());
  return p;
}

}  // namespace rlac
