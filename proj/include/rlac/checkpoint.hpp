#pragma once

// Plain-text policy checkpoints. Doubles are written in shortest round-trip
// form so save -> load -> save is byte-identical.
//
//   rlac-checkpoint 1
//   player generator
//   version 12
//   params 4
//   <one value per line>

#include <charconv>
#include <istream>
#include <sstream>
#include <string>
#include <system_error>

#include "rlac/error.hpp"
#include "rlac/policy.hpp"

namespace rlac {

namespace detail {

inline std::string shortest(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string read_keyed(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(key + " ", 0) != 0)
    throw Error(ErrorCode::Config, "checkpoint: expected '" + key + "' line");
  return line.substr(key.size() + 1);
}

inline std::uint64_t to_u64(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::Config, std::string("checkpoint: bad ") + what + " '" + s + "'");
  return v;
}

template <class Policy>
std::string write_checkpoint(const Policy& p, const char* player) {
  std::ostringstream os;
  os << "rlac-checkpoint 1\n"
     << "player " << player << "\n"
     << "version " << p.version() << "\n"
     << "params " << p.num_params() << "\n";
  for (double x : p.params()) os << shortest(x) << "\n";
  return os.str();
}

template <class Policy>
void read_checkpoint(Policy& p, const char* player, std::istream& in) {
  if (read_keyed(in, "rlac-checkpoint") != "1") throw Error(ErrorCode::Config, "checkpoint: unsupported format");
  const auto who = read_keyed(in, "player");
  if (who != player) throw Error(ErrorCode::ShapeMismatch, "checkpoint is for '" + who + "', not '" + player + "'");
  const auto version = to_u64(read_keyed(in, "version"), "version");
  const auto n = to_u64(read_keyed(in, "params"), "parameter count");
  if (n != p.num_params())
    throw Error(ErrorCode::ShapeMismatch, "checkpoint has " + std::to_string(n) + " parameters, policy has " +
                                              std::to_string(p.num_params()));
  auto params = p.mutable_params();
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::Config, "checkpoint truncated at parameter " + std::to_string(i));
    double x = 0.0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), x);
    if (res.ec != std::errc{} || res.ptr != line.data() + line.size())
      throw Error(ErrorCode::Config, "checkpoint: bad value '" + line + "'");
    params[i] = x;
  }
  p.check_finite();
  while (p.version() < version) p.bump_version();
}

}  // namespace detail

inline std::string save_checkpoint(const GeneratorPolicy& p) { return detail::write_checkpoint(p, "generator"); }
inline std::string save_checkpoint(const CriticPolicy& p) { return detail::write_checkpoint(p, "critic"); }

/// Loads parameters into a policy built for the same task. The version
/// counter only moves forward.
inline void load_checkpoint(GeneratorPolicy& p, std::istream& in) { detail::read_checkpoint(p, "generator", in); }
inline void load_checkpoint(CriticPolicy& p, std::istream& in) { detail::read_checkpoint(p, "critic", in); }

}  // namespace rlac
