#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "radmarket/env.hpp"

namespace radmarket {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to reproduce one episode. Files use `key = value` lines;
/// relative input paths resolve against the directory of the file that set
/// them, out_dir against the working directory.
struct RunConfig {
  std::filesystem::path case_path;
  std::filesystem::path roster_path;
  std::optional<std::filesystem::path> scenario_path;
  Mechanism mechanism = Mechanism::Clearing;
  int grid_steps = 24;
  /// Unset means the mechanism default.
  std::optional<int> market_steps;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  int segments = 100;
  P2pConfig p2p;
  std::optional<double> lmp_source;
  bool allow_agent_access = false;

  /// Throws ConfigError on missing files, bad counts or missing mechanism parameters.
  void validate() const;
  EnvConfig env_config() const;
  int effective_market_steps() const;
};

/// Sets one key. `base_dir` anchors relative paths.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir = {});
/// `key=value` as given on a command line.
void apply_override(RunConfig& cfg, const std::string& assignment, const std::filesystem::path& base_dir = {});

RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {},
                           const std::string& origin = "<memory>");
RunConfig read_run_config(const std::filesystem::path& path);
/// Writes every key with absolute paths; parses back to the same config.
void write_run_config(std::ostream& out, const RunConfig& cfg);

/// Loads case, roster and scenario and builds a reset-ready environment.
std::unique_ptr<Environment> build_environment(const RunConfig& cfg);

}  // namespace radmarket
