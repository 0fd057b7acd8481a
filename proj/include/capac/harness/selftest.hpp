#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace capac::harness {

struct SelftestCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Property checks over fresh processes. With a scenario directory, also runs
/// every `*.atk` suite there against the scenario its `scenario` line names.
std::vector<SelftestCheck> run_selftest(std::uint64_t seed, const std::filesystem::path& scenario_dir = {});

}  // namespace capac::harness
