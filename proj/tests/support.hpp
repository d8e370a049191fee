#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mgsim/scenario.hpp"

namespace testing_support {

inline std::filesystem::path bundled(const std::string& name) {
  return std::filesystem::path(MGSIM_SCENARIO_DIR) / (name + ".ini");
}

inline std::string bundled_text(const std::string& name) {
  std::ifstream in(bundled(name));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline mgsim::ScenarioConfig load(const std::string& name) { return mgsim::load_scenario(bundled(name)); }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("mgsim_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
