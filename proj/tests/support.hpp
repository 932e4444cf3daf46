#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <unistd.h>

#include "rlac/code_task.hpp"
#include "rlac/factual_task.hpp"

namespace rlac::testing {

inline std::shared_ptr<const FactualTask> small_factual(std::size_t train = 20, std::size_t test = 10,
                                                        FactualTaskConfig cfg = {}) {
  return std::make_shared<FactualTask>(generate_knowledge_base(train, test, 8, 8, 1.0, 3), cfg);
}

inline std::shared_ptr<const CodeTask> small_code(std::size_t train = 12, std::size_t test = 6) {
  return std::make_shared<CodeTask>(generate_code_problems(train, test, 32, 16, 5), CodeTaskConfig{});
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rlac-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rlac::testing
