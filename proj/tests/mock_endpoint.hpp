#pragma once

// A local chat-completion server for bridge tests, plus canned generator and
// critic models that answer deterministically from the request seed.

#include <functional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rlac/bridge/endpoint.hpp"

namespace rlac::testing {

inline std::string chat_response(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

/// Local HTTP server on an ephemeral port, torn down with the object.
class MockServer {
 public:
  using Handler = std::function<void(const nlohmann::json& body, httplib::Response&)>;

  explicit MockServer(Handler h) {
    server_.Post("/v1/chat/completions", [h](const httplib::Request& req, httplib::Response& res) {
      h(nlohmann::json::parse(req.body), res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  bridge::EndpointConfig endpoint() const {
    bridge::EndpointConfig e;
    e.base_url = "http://127.0.0.1:" + std::to_string(port_);
    e.timeout_ms = 2000;
    e.backoff_ms = 5;
    return e;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

inline bridge::ChatRequest request(std::size_t i) { return {{{"user", "q" + std::to_string(i)}}, 1000 + i, i, 0}; }

// Canned models for collect: the generator writes four sentences and puts a
// false claim in one of them for a third of the seeds; the critic finds it on
// even seeds, guesses on odd ones and answers off-format every fifth seed.
inline void fake_models(const nlohmann::json& body, httplib::Response& res) {
  const auto seed = body["seed"].get<std::uint64_t>();
  const auto& msgs = body["messages"];
  const std::string system = msgs[0]["content"];
  std::string reply;
  if (system.find("biographies") != std::string::npos) {
    const bool bad = seed % 3 == 0;
    const auto where = seed % 4;
    const char* place[] = {"Zurich", bad ? "New York" : "Bern"};
    for (std::size_t s = 0; s < 4; ++s) {
      if (s) reply += " ";
      if (s == where) reply += std::string("They lived in ") + place[1] + ".";
      else reply += "Draft " + std::to_string(seed % 997) + " line " + std::to_string(s) + " mentions " + place[0] + ".";
    }
  } else {
    const std::string user = msgs[1]["content"];
    if (seed % 5 == 0) {
      reply = "I think it is the second one.";
    } else {
      std::size_t n = (seed / 5) % 4 + 1;
      if (seed % 2 == 0)
        for (std::size_t k = 1; k <= 4; ++k) {
          const auto tagpos = user.rfind("[" + std::to_string(k) + "] ");
          if (tagpos != std::string::npos && user.compare(tagpos + 4, 22, "They lived in New York") == 0) n = k;
        }
      reply = "reason: looks off\nsentence: " + std::to_string(n) + "\nerror_fact: claim " + std::to_string(n) + "\n";
    }
  }
  res.set_content(chat_response(reply), "application/json");
}

}  // namespace rlac::testing
