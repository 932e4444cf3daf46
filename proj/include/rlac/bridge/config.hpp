#pragma once

// Bridge configuration file for `rlac collect`:
//
//   { "endpoint":  { base_url, path, model, token_env, timeout_ms, max_concurrency,
//                    temperature, max_tokens, max_retries, backoff_ms },
//     "validator": { "argv": [...], "timeout_ms": N },
//     "collect":   { kind, outputs_per_prompt, critic_proposals, sentences, round,
//                    max_pairs_per_prompt, rng_tag } }
//
// Unknown keys are rejected. The API token is never read from this file.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlac/bridge/collect.hpp"
#include "rlac/bridge/endpoint.hpp"
#include "rlac/error.hpp"

namespace rlac::bridge {

struct BridgeConfig {
  EndpointConfig endpoint;
  CollectConfig collect;
};

namespace detail {

inline void only_keys(const nlohmann::json& j, const std::string& section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "bridge section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw Error(ErrorCode::Config, "unknown bridge key '" + section + "." + it.key() + "'");
  }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& dst, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Config, "bridge key '" + section + "." + key + "' has the wrong type");
  }
}

}  // namespace detail

inline BridgeConfig parse_bridge_config(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false, true);
  if (j.is_discarded()) throw Error(ErrorCode::Config, "bridge config is not valid JSON");
  detail::only_keys(j, "<root>", {"endpoint", "validator", "collect"});
  BridgeConfig cfg;
  if (j.contains("endpoint")) {
    const auto& e = j["endpoint"];
    detail::only_keys(e, "endpoint", {"base_url", "path", "model", "token_env", "timeout_ms", "max_concurrency",
                                      "temperature", "max_tokens", "max_retries", "backoff_ms"});
    auto& d = cfg.endpoint;
    detail::read_opt(e, "base_url", d.base_url, "endpoint");
    detail::read_opt(e, "path", d.path, "endpoint");
    detail::read_opt(e, "model", d.model, "endpoint");
    detail::read_opt(e, "token_env", d.token_env, "endpoint");
    detail::read_opt(e, "timeout_ms", d.timeout_ms, "endpoint");
    detail::read_opt(e, "max_concurrency", d.max_concurrency, "endpoint");
    detail::read_opt(e, "temperature", d.temperature, "endpoint");
    detail::read_opt(e, "max_tokens", d.max_tokens, "endpoint");
    detail::read_opt(e, "max_retries", d.max_retries, "endpoint");
    detail::read_opt(e, "backoff_ms", d.backoff_ms, "endpoint");
  }
  if (j.contains("validator")) {
    const auto& v = j["validator"];
    detail::only_keys(v, "validator", {"argv", "timeout_ms"});
    detail::read_opt(v, "argv", cfg.collect.validator.argv, "validator");
    detail::read_opt(v, "timeout_ms", cfg.collect.validator.timeout_ms, "validator");
  }
  if (j.contains("collect")) {
    const auto& c = j["collect"];
    detail::only_keys(c, "collect", {"kind", "outputs_per_prompt", "critic_proposals", "sentences", "round",
                                     "max_pairs_per_prompt", "rng_tag"});
    std::string kind = "factual";
    detail::read_opt(c, "kind", kind, "collect");
    if (kind != "factual" && kind != "code")
      throw Error(ErrorCode::Config, "collect.kind must be 'factual' or 'code', got '" + kind + "'");
    auto& d = cfg.collect;
    d.kind = kind == "factual" ? TaskKind::Factual : TaskKind::Code;
    detail::read_opt(c, "outputs_per_prompt", d.outputs_per_prompt, "collect");
    detail::read_opt(c, "critic_proposals", d.critic_proposals, "collect");
    detail::read_opt(c, "sentences", d.sentences, "collect");
    detail::read_opt(c, "round", d.round, "collect");
    detail::read_opt(c, "max_pairs_per_prompt", d.max_pairs_per_prompt, "collect");
    detail::read_opt(c, "rng_tag", d.rng_tag, "collect");
  }
  cfg.endpoint.validate();
  cfg.collect.validate();
  return cfg;
}

inline std::string read_text_file(const std::filesystem::path& path, ErrorCode code = ErrorCode::Config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(code, "cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// One prompt per non-empty line, either "id<TAB>text" or bare text (id = line number).
inline std::vector<CollectPrompt> parse_prompts(const std::string& text) {
  std::vector<CollectPrompt> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) out.push_back({std::to_string(lineno), line});
    else out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

}  // namespace rlac::bridge
