#pragma once

// OpenAI-compatible chat-completion client: bounded retries with exponential
// backoff, a cap on in-flight requests, and a request log. Results are
// returned in request order regardless of arrival order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "rlac/bridge/prompts.hpp"
#include "rlac/error.hpp"
#include "rlac/rng.hpp"

namespace rlac::bridge {

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model = "local";
  std::string token_env = "RLAC_API_TOKEN";  // token is only ever read from here
  int timeout_ms = 30000;
  std::size_t max_concurrency = 4;
  double temperature = 1.0;
  int max_tokens = 512;
  int max_retries = 3;        // attempts after the first
  int backoff_ms = 200;       // doubled after every failed attempt

  void validate() const {
    if (timeout_ms <= 0) throw Error(ErrorCode::Config, "endpoint timeout must be positive");
    if (max_concurrency < 1) throw Error(ErrorCode::Config, "endpoint concurrency must be at least 1");
    if (max_retries < 0 || backoff_ms < 0) throw Error(ErrorCode::Config, "retry settings must be non-negative");
    if (base_url.empty()) throw Error(ErrorCode::Config, "endpoint base URL is empty");
  }
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::uint64_t seed = 0;
  std::size_t prompt_index = 0;
  std::size_t sample_index = 0;
};

struct RequestLogEntry {
  std::size_t prompt_index = 0;
  std::size_t sample_index = 0;
  int attempt = 0;
  long long start_us = 0;  // relative to the client's epoch
  long long end_us = 0;
  int status = 0;          // HTTP status, 0 for transport errors
  std::string error;
  std::string request_body;
  std::string response_body;
};

class RequestLog {
 public:
  void add(RequestLogEntry e) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(e));
  }
  /// Entries in (prompt, sample, attempt) order.
  std::vector<RequestLogEntry> entries() const {
    std::lock_guard lock(mu_);
    auto out = entries_;
    std::sort(out.begin(), out.end(), [](const RequestLogEntry& a, const RequestLogEntry& b) {
      return std::tie(a.prompt_index, a.sample_index, a.attempt) < std::tie(b.prompt_index, b.sample_index, b.attempt);
    });
    return out;
  }
  /// Largest number of requests whose [start, end) intervals overlap.
  std::size_t max_in_flight() const {
    std::vector<std::pair<long long, int>> ev;
    for (const auto& e : entries()) {
      ev.emplace_back(e.start_us, 1);
      ev.emplace_back(e.end_us, -1);
    }
    std::sort(ev.begin(), ev.end());  // ends sort before starts at equal times
    std::size_t cur = 0, best = 0;
    for (const auto& [t, d] : ev) {
      cur = static_cast<std::size_t>(static_cast<long long>(cur) + d);
      best = std::max(best, cur);
    }
    return best;
  }
  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : entries()) {
      nlohmann::ordered_json j{{"prompt", e.prompt_index}, {"sample", e.sample_index}, {"attempt", e.attempt},
                               {"status", e.status},       {"error", e.error},         {"request", e.request_body},
                               {"response", e.response_body}};
      out += j.dump() + "\n";
    }
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::vector<RequestLogEntry> entries_;
};

class ChatClient {
 public:
  explicit ChatClient(EndpointConfig cfg) : cfg_(std::move(cfg)), epoch_(std::chrono::steady_clock::now()) {
    cfg_.validate();
  }

  const EndpointConfig& config() const { return cfg_; }
  RequestLog& log() { return log_; }
  const RequestLog& log() const { return log_; }

  /// Runs every request with at most max_concurrency in flight. Throws the
  /// error of the lowest-indexed failed request.
  std::vector<std::string> complete_all(const std::vector<ChatRequest>& requests) {
    std::vector<std::string> out(requests.size());
    std::vector<std::exception_ptr> errors(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < requests.size(); i = next++) {
        try {
          out[i] = complete(requests[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t n = std::min(cfg_.max_concurrency, requests.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

  std::string complete(const ChatRequest& req) {
    nlohmann::ordered_json body;
    body["model"] = cfg_.model;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : req.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = cfg_.temperature;
    body["max_tokens"] = cfg_.max_tokens;
    body["seed"] = req.seed;
    const std::string text = body.dump();

    httplib::Client cli(cfg_.base_url);
    const auto secs = cfg_.timeout_ms / 1000, usecs = (cfg_.timeout_ms % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* tok = std::getenv(cfg_.token_env.c_str()); tok && *tok)
      headers.emplace("Authorization", std::string("Bearer ") + tok);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
      RequestLogEntry entry{req.prompt_index, req.sample_index, attempt, now_us(), 0, 0, {}, text, {}};
      auto res = cli.Post(cfg_.path, headers, text, "application/json");
      entry.end_us = now_us();
      if (!res) {
        entry.error = httplib::to_string(res.error());
        last_error = "transport error: " + entry.error;
        log_.add(std::move(entry));
        continue;
      }
      entry.status = res->status;
      entry.response_body = res->body;
      log_.add(entry);
      if (res->status >= 500 || res->status == 429) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw Error(ErrorCode::ProtocolError, "endpoint answered HTTP " + std::to_string(res->status));
      return extract_content(res->body);
    }
    throw Error(ErrorCode::EndpointUnavailable, cfg_.base_url + cfg_.path + " unavailable after " +
                                                    std::to_string(cfg_.max_retries + 1) + " attempts (" + last_error +
                                                    ")");
  }

  static std::string extract_content(const std::string& body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ProtocolError, "response is not JSON");
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
      throw Error(ErrorCode::ProtocolError, "response has no choices");
    const auto& c = j["choices"][0];
    if (!c.contains("message") || !c["message"].contains("content") || !c["message"]["content"].is_string())
      throw Error(ErrorCode::ProtocolError, "response choice has no message content");
    return c["message"]["content"].get<std::string>();
  }

 private:
  long long now_us() const {
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - epoch_).count();
  }

  EndpointConfig cfg_;
  std::chrono::steady_clock::time_point epoch_;
  RequestLog log_;
};

/// k completions of one prompt; per-sample seeds derive from `rng_tag`.
inline std::vector<std::string> sample_remote(ChatClient& client, const std::vector<ChatMessage>& prompt, std::size_t k,
                                              const std::string& rng_tag, std::size_t prompt_index = 0) {
  std::vector<ChatRequest> reqs;
  for (std::size_t i = 0; i < k; ++i) reqs.push_back({prompt, derive_seed(tag(rng_tag), {i}), prompt_index, i});
  return client.complete_all(reqs);
}

}  // namespace rlac::bridge
