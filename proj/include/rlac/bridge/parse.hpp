#pragma once

// Critic reply parsing. Labels must match exactly; whitespace around labels,
// colons and values is ignored.
//
// factual:  reason: ... / sentence: N / error_fact: ...   (three lines)
// code:     <think> ... </think> <testcase> CALL: f(x) </testcase>
//                                or <testcase> STDIN: raw </testcase>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rlac/error.hpp"
#include "rlac/game.hpp"

namespace rlac::bridge {

struct CriticReplyFactual {
  std::string reason;
  int sentence = 0;
  std::string error_fact;
  friend bool operator==(const CriticReplyFactual&, const CriticReplyFactual&) = default;
};

enum class TestcaseForm { Call, Stdin };

struct CriticReplyCode {
  std::string think;
  TestcaseForm form = TestcaseForm::Call;
  std::string payload;
  friend bool operator==(const CriticReplyCode&, const CriticReplyCode&) = default;
};

using CriticReply = std::variant<CriticReplyFactual, CriticReplyCode>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string excerpt(std::string_view s) {
  auto t = trim(s);
  if (t.size() > 60) t = t.substr(0, 57) + "...";
  return "'" + t + "'";
}

/// Splits "label : value"; nullopt when the line has no colon.
inline std::optional<std::pair<std::string, std::string>> labeled(std::string_view line) {
  const auto colon = line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  return std::pair{trim(line.substr(0, colon)), trim(line.substr(colon + 1))};
}

inline std::size_t count(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace detail

inline CriticReplyFactual parse_factual_reply(std::string_view text, std::optional<int> max_sentence = std::nullopt) {
  using detail::excerpt;
  std::optional<std::string> reason, sentence, fact;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (detail::trim(line).empty()) continue;
    const auto kv = detail::labeled(line);
    std::optional<std::string>* slot = nullptr;
    if (kv && kv->first == "reason") slot = &reason;
    else if (kv && kv->first == "sentence") slot = &sentence;
    else if (kv && kv->first == "error_fact") slot = &fact;
    if (!slot) throw Error(ErrorCode::ProtocolError, "unexpected line " + excerpt(line));
    if (*slot) throw Error(ErrorCode::ProtocolError, "label '" + kv->first + "' appears twice");
    *slot = kv->second;
  }
  if (!reason || reason->empty()) throw Error(ErrorCode::MissingField, "missing field 'reason'");
  if (!sentence || sentence->empty()) throw Error(ErrorCode::MissingField, "missing field 'sentence'");
  if (!fact || fact->empty()) throw Error(ErrorCode::MissingField, "missing field 'error_fact'");

  CriticReplyFactual r;
  r.reason = *reason;
  r.error_fact = *fact;
  const auto& s = *sentence;
  if (s.size() > 9 || s.find_first_not_of("0123456789") != std::string::npos)
    throw Error(ErrorCode::NonIntegerSentence, "sentence is not a positive integer: " + excerpt(s));
  r.sentence = std::stoi(s);
  if (r.sentence < 1) throw Error(ErrorCode::NonIntegerSentence, "sentence is not a positive integer: " + excerpt(s));
  if (max_sentence && r.sentence > *max_sentence)
    throw Error(ErrorCode::ProtocolError, "sentence " + s + " is outside 1.." + std::to_string(*max_sentence));
  return r;
}

inline CriticReplyCode parse_code_reply(std::string_view text) {
  using detail::excerpt;
  constexpr std::string_view kOpen = "<testcase>", kClose = "</testcase>";
  constexpr std::string_view kThink = "<think>", kThinkEnd = "</think>";
  const auto opens = detail::count(text, kOpen);
  if (opens > 1) throw Error(ErrorCode::DuplicateTestcase, std::to_string(opens) + " <testcase> blocks, expected one");
  if (opens == 0) throw Error(ErrorCode::MissingField, "missing field 'testcase'");
  if (detail::count(text, kThink) != 1 || detail::count(text, kThinkEnd) != 1)
    throw Error(ErrorCode::MissingField, "missing field 'think'");

  CriticReplyCode r;
  const auto tb = text.find(kThink) + kThink.size();
  const auto te = text.find(kThinkEnd);
  if (te < tb) throw Error(ErrorCode::MissingField, "missing field 'think'");
  r.think = detail::trim(text.substr(tb, te - tb));

  const auto cb = text.find(kOpen) + kOpen.size();
  const auto ce = text.find(kClose, cb);
  if (ce == std::string_view::npos) throw Error(ErrorCode::MissingField, "unterminated <testcase> block");
  if (detail::count(text, kClose) > 1) throw Error(ErrorCode::DuplicateTestcase, "more than one </testcase>");
  const auto body = text.substr(cb, ce - cb);
  const auto kv = detail::labeled(body);
  if (!kv) throw Error(ErrorCode::ProtocolError, "testcase has no CALL:/STDIN: tag: " + excerpt(body));
  if (kv->first == "CALL") r.form = TestcaseForm::Call;
  else if (kv->first == "STDIN") r.form = TestcaseForm::Stdin;
  else throw Error(ErrorCode::ProtocolError, "unknown testcase form " + excerpt(kv->first));
  if (kv->second.empty()) throw Error(ErrorCode::MissingField, "missing field 'testcase' payload");
  r.payload = kv->second;
  return r;
}

inline CriticReply parse_critic_reply(std::string_view text, TaskKind kind) {
  if (kind == TaskKind::Factual) return parse_factual_reply(text);
  return parse_code_reply(text);
}

/// Canonical text form; parse(serialize(r)) == r.
inline std::string serialize(const CriticReply& reply) {
  if (const auto* f = std::get_if<CriticReplyFactual>(&reply))
    return "reason: " + f->reason + "\nsentence: " + std::to_string(f->sentence) + "\nerror_fact: " + f->error_fact +
           "\n";
  const auto& c = std::get<CriticReplyCode>(reply);
  return "<think>\n" + c.think + "\n</think>\n<testcase> " + (c.form == TestcaseForm::Call ? "CALL: " : "STDIN: ") +
         c.payload + " </testcase>\n";
}

}  // namespace rlac::bridge
