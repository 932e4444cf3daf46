#pragma once

// External validator plugins. The plugin gets one JSON request on stdin and
// answers a single line on stdout:
//
//   PASS [detail] | FAIL [detail] | INVALID [detail]
//
// A nonzero exit (or death by signal) counts as the generator failing the
// test. Exceeding the timeout kills the plugin and raises ValidatorTimeout.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rlac/error.hpp"
#include "rlac/game.hpp"

namespace rlac::bridge {

struct PluginSpec {
  std::vector<std::string> argv;
  int timeout_ms = 10000;
};

struct PluginStats {
  std::atomic<std::size_t> calls{0};
  std::atomic<long long> wall_us{0};
};

namespace detail {

inline void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

inline ValidatorVerdict parse_verdict_line(const std::string& out) {
  const auto line = out.substr(0, out.find('\n'));
  const auto sp = line.find(' ');
  const auto word = line.substr(0, sp);
  std::optional<std::string> detail;
  if (sp != std::string::npos) {
    auto rest = line.substr(sp + 1);
    while (!rest.empty() && (rest.back() == '\r' || rest.back() == ' ')) rest.pop_back();
    if (!rest.empty()) detail = rest;
  }
  auto w = word;
  while (!w.empty() && w.back() == '\r') w.pop_back();
  if (w == "PASS") return {Verdict::GeneratorPasses, detail};
  if (w == "FAIL") return {Verdict::GeneratorFails, detail};
  if (w == "INVALID") return {Verdict::InvalidProposal, detail};
  throw Error(ErrorCode::ProtocolError, "validator plugin answered '" + line + "'");
}

}  // namespace detail

/// Runs the plugin once with `request` on its stdin.
inline ValidatorVerdict run_plugin(const PluginSpec& spec, const std::string& request, PluginStats* stats = nullptr) {
  if (spec.argv.empty()) throw Error(ErrorCode::Config, "validator plugin command is empty");
  if (spec.timeout_ms <= 0) throw Error(ErrorCode::Config, "validator plugin timeout must be positive");
  ::signal(SIGPIPE, SIG_IGN);  // a plugin that exits early must not kill us
  const auto t0 = std::chrono::steady_clock::now();
  int in_pipe[2] = {-1, -1}, out_pipe[2] = {-1, -1};
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
    throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));

  std::vector<char*> args;
  for (const auto& a : spec.argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::Io, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  int to_child = in_pipe[1], from_child = out_pipe[0];
  ::fcntl(to_child, F_SETFL, ::fcntl(to_child, F_GETFL) | O_NONBLOCK);
  ::fcntl(from_child, F_SETFL, ::fcntl(from_child, F_GETFL) | O_NONBLOCK);

  const auto deadline = t0 + std::chrono::milliseconds(spec.timeout_ms);
  std::size_t written = 0;
  std::string out;
  bool timed_out = false;
  while (from_child >= 0) {
    if (written == request.size()) detail::close_fd(to_child);
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd fds[2];
    nfds_t n = 0;
    fds[n++] = {from_child, POLLIN, 0};
    if (to_child >= 0) fds[n++] = {to_child, POLLOUT, 0};
    if (::poll(fds, n, static_cast<int>(left.count())) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const auto w = ::write(to_child, request.data() + written, request.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      else if (errno != EAGAIN) written = request.size();  // reader went away (EPIPE)
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[4096];
      const auto r = ::read(from_child, buf, sizeof buf);
      if (r > 0) out.append(buf, static_cast<std::size_t>(r));
      else if (r == 0 || errno != EAGAIN) detail::close_fd(from_child);
    }
  }
  detail::close_fd(to_child);
  detail::close_fd(from_child);
  int status = 0;
  if (timed_out) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
  } else {
    // stdout closed; give the process the remaining budget to exit
    while (::waitpid(pid, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() >= deadline) {
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        timed_out = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }
  if (stats) {
    ++stats->calls;
    stats->wall_us += std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
  }
  if (timed_out)
    throw Error(ErrorCode::ValidatorTimeout, "validator plugin '" + spec.argv[0] + "' exceeded " +
                                                 std::to_string(spec.timeout_ms) + " ms");
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const std::string why = WIFEXITED(status) ? "exit status " + std::to_string(WEXITSTATUS(status))
                                              : "signal " + std::to_string(WTERMSIG(status));
    return {Verdict::GeneratorFails, "plugin crashed (" + why + ")"};
  }
  return detail::parse_verdict_line(out);
}

/// Structured request: task kind, instruction, output text and proposal.
inline ValidatorVerdict run_external_validator(const PluginSpec& spec, TaskKind kind, const std::string& instruction,
                                               const std::string& output, const nlohmann::json& proposal,
                                               PluginStats* stats = nullptr) {
  nlohmann::ordered_json req;
  req["task"] = kind == TaskKind::Factual ? "factual" : "code";
  req["instruction"] = instruction;
  req["output"] = output;
  req["proposal"] = proposal;
  return run_plugin(spec, req.dump() + "\n", stats);
}

}  // namespace rlac::bridge
