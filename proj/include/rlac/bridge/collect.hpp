#pragma once

// One evaluation pass of the training loop against remote models: K samples
// per prompt, 1 + N critic replies per sample, plugin verdicts, preference
// pairs. Weight updates happen elsewhere, from the exported dataset.
//
// The first critic reply of each sample decides the generator's reward; all
// 1 + N replies label critic pairs. Unparseable replies are logged as
// InvalidProposal with source "parse". A plugin timeout drops that reply.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlac/bridge/dataset.hpp"
#include "rlac/bridge/endpoint.hpp"
#include "rlac/bridge/parse.hpp"
#include "rlac/bridge/plugin.hpp"
#include "rlac/bridge/prompts.hpp"
#include "rlac/game.hpp"

namespace rlac::bridge {

struct CollectConfig {
  TaskKind kind = TaskKind::Factual;
  std::size_t outputs_per_prompt = 4;  // K
  std::size_t critic_proposals = 2;    // N
  std::size_t sentences = 4;           // factual paragraph length asked of the generator
  std::size_t round = 0;
  std::size_t max_pairs_per_prompt = 16;
  std::string rng_tag = "collect";
  PluginSpec validator;

  void validate() const {
    if (outputs_per_prompt < 2) throw Error(ErrorCode::Config, "collect needs at least 2 outputs per prompt");
    if (sentences == 0) throw Error(ErrorCode::Config, "sentence count must be positive");
    if (max_pairs_per_prompt == 0) throw Error(ErrorCode::Config, "max_pairs_per_prompt must be positive");
    if (validator.argv.empty()) throw Error(ErrorCode::Config, "validator plugin command is empty");
  }
};

struct CollectPrompt {
  std::string id;
  std::string text;  // topic name (factual) or problem statement (code)
};

struct VerdictEntry {
  std::size_t id = 0;
  std::size_t prompt_index = 0;
  std::size_t output_index = 0;
  std::size_t reply_index = 0;
  std::string source;  // plugin | parse | timeout
  std::optional<Verdict> verdict;
  std::string detail;
};

struct CollectResult {
  std::vector<PreferenceRecord> records;
  std::vector<VerdictEntry> verdicts;
  std::size_t plugin_calls = 0;
  long long plugin_wall_us = 0;

  std::string verdicts_jsonl() const {
    std::string out;
    for (const auto& v : verdicts) {
      nlohmann::ordered_json j{{"id", v.id},         {"prompt", v.prompt_index}, {"output", v.output_index},
                               {"reply", v.reply_index}, {"source", v.source}};
      j["verdict"] = v.verdict ? nlohmann::ordered_json(to_string(*v.verdict)) : nlohmann::ordered_json(nullptr);
      j["detail"] = v.detail;
      out += j.dump() + "\n";
    }
    return out;
  }
};

namespace detail {

inline std::string prompt_text(const std::vector<ChatMessage>& msgs) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& m : msgs) j.push_back({{"role", m.role}, {"content", m.content}});
  return j.dump();
}

inline nlohmann::json proposal_json(const CriticReply& reply, const std::vector<std::string>& sentences) {
  if (const auto* f = std::get_if<CriticReplyFactual>(&reply)) {
    const auto i = static_cast<std::size_t>(f->sentence);
    return {{"sentence", f->sentence},
            {"sentence_text", i <= sentences.size() ? sentences[i - 1] : std::string()},
            {"error_fact", f->error_fact},
            {"reason", f->reason}};
  }
  const auto& c = std::get<CriticReplyCode>(reply);
  return {{"form", c.form == TestcaseForm::Call ? "CALL" : "STDIN"}, {"payload", c.payload}};
}

}  // namespace detail

inline CollectResult collect_round(ChatClient& client, const std::vector<CollectPrompt>& prompts,
                                   const CollectConfig& cfg) {
  cfg.validate();
  if (prompts.empty()) throw Error(ErrorCode::Config, "no prompts to collect");
  const std::size_t K = cfg.outputs_per_prompt, replies = 1 + cfg.critic_proposals;

  std::vector<std::vector<ChatMessage>> gen_prompts;
  std::vector<ChatRequest> gen_reqs;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    gen_prompts.push_back(cfg.kind == TaskKind::Factual ? factual_generator_prompt(prompts[p].text, cfg.sentences)
                                                        : code_generator_prompt(prompts[p].text));
    for (std::size_t k = 0; k < K; ++k)
      gen_reqs.push_back({gen_prompts[p], derive_seed(tag(cfg.rng_tag), {cfg.round, 0, p, k}), p, k});
  }
  const auto outputs = client.complete_all(gen_reqs);

  std::vector<std::vector<ChatMessage>> critic_prompts;
  std::vector<std::vector<std::string>> sentences;
  std::vector<ChatRequest> critic_reqs;
  for (std::size_t o = 0; o < outputs.size(); ++o) {
    const std::size_t p = o / K;
    if (cfg.kind == TaskKind::Factual) {
      sentences.push_back(split_sentences(outputs[o]));
      critic_prompts.push_back(factual_critic_prompt(prompts[p].text, number_paragraph(sentences.back())));
    } else {
      sentences.emplace_back();
      critic_prompts.push_back(code_critic_prompt(prompts[p].text, outputs[o]));
    }
    for (std::size_t r = 0; r < replies; ++r)
      critic_reqs.push_back({critic_prompts[o], derive_seed(tag(cfg.rng_tag), {cfg.round, 1, o, r}),
                             prompts.size() + o, r});
  }
  const auto critic_texts = client.complete_all(critic_reqs);

  CollectResult res;
  PluginStats stats;
  // verdict id per (output, reply); nullopt when the interaction was dropped
  std::vector<std::optional<std::size_t>> vid(critic_texts.size());
  for (std::size_t i = 0; i < critic_texts.size(); ++i) {
    const std::size_t o = i / replies, r = i % replies;
    VerdictEntry e{res.verdicts.size(), o / K, o % K, r, "plugin", std::nullopt, {}};
    std::optional<CriticReply> reply;
    try {
      if (cfg.kind == TaskKind::Factual)
        reply = parse_factual_reply(critic_texts[i], static_cast<int>(sentences[o].size()));
      else
        reply = parse_code_reply(critic_texts[i]);
    } catch (const Error& err) {
      e.source = "parse";
      e.verdict = Verdict::InvalidProposal;
      e.detail = err.what();
    }
    if (reply) {
      try {
        const auto v = run_external_validator(cfg.validator, cfg.kind, prompts[o / K].text, outputs[o],
                                              detail::proposal_json(*reply, sentences[o]), &stats);
        e.verdict = v.kind;
        e.detail = v.detail.value_or("");
      } catch (const Error& err) {
        if (err.code() != ErrorCode::ValidatorTimeout) throw;
        e.source = "timeout";
        e.detail = err.what();
      }
    }
    if (e.verdict) vid[i] = e.id;
    res.verdicts.push_back(std::move(e));
  }
  res.plugin_calls = stats.calls;
  res.plugin_wall_us = stats.wall_us;

  auto verdict_of = [&](std::size_t i) { return *res.verdicts[*vid[i]].verdict; };

  for (std::size_t p = 0; p < prompts.size(); ++p) {
    // generator pairs: reward from the first reply of each sample
    std::vector<std::size_t> win, lose;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t i = (p * K + k) * replies;
      if (!vid[i]) continue;
      (assign_rewards(verdict_of(i)).generator_reward ? win : lose).push_back(p * K + k);
    }
    std::size_t pair = 0;
    for (auto w : win)
      for (auto l : lose) {
        if (pair >= cfg.max_pairs_per_prompt || outputs[w] == outputs[l]) continue;
        nlohmann::ordered_json meta{{"round", cfg.round},
                                    {"prompt_id", prompts[p].id},
                                    {"chosen_verdict", *vid[w * replies]},
                                    {"rejected_verdict", *vid[l * replies]},
                                    {"chosen_proposal", critic_texts[w * replies]},
                                    {"rejected_proposal", critic_texts[l * replies]}};
        res.records.push_back({detail::prompt_text(gen_prompts[p]), outputs[w], outputs[l], "generator", pair++, meta});
      }
    // critic pairs: per sample, replies that exposed an error beat those that did not
    pair = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t o = p * K + k;
      std::vector<std::size_t> cw, cl;
      for (std::size_t r = 0; r < replies; ++r) {
        const std::size_t i = o * replies + r;
        if (!vid[i]) continue;
        (assign_rewards(verdict_of(i)).critic_reward ? cw : cl).push_back(i);
      }
      for (auto w : cw)
        for (auto l : cl) {
          if (pair >= cfg.max_pairs_per_prompt || critic_texts[w] == critic_texts[l]) continue;
          nlohmann::ordered_json meta{{"round", cfg.round},
                                      {"prompt_id", prompts[p].id},
                                      {"output_index", k},
                                      {"chosen_verdict", *vid[w]},
                                      {"rejected_verdict", *vid[l]}};
          res.records.push_back(
              {detail::prompt_text(critic_prompts[o]), critic_texts[w], critic_texts[l], "critic", pair++, meta});
        }
    }
  }
  return res;
}

}  // namespace rlac::bridge
