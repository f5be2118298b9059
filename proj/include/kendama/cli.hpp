#pragma once

/**
 * @file cli.hpp
 * @brief Subcommands behind the kendama executable.
 *
 * Each command reads a RunConfig, writes only under the output directory and
 * returns a process exit code.
 */

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace kendama::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitSolver = 2;

struct Options {
  std::string config_path;  // empty: built-in defaults
  std::string out_dir;      // empty: output_dir from the config
  std::optional<std::uint64_t> seed;
  bool timestamp = true;
  std::string summary_path;  // report only; empty: <out>/summary.json
};

int plan_swingup(const Options& opts, std::ostream& log);
int calibrate_noise(const Options& opts, std::ostream& log);
int learn_support(const Options& opts, std::ostream& log);
int rollout(const Options& opts, std::ostream& log);
int sweep(const Options& opts, std::ostream& log);
int report(const Options& opts, std::ostream& log);

/// Dispatches by name; unknown names return kExitConfig.
int run(const std::string& command, const Options& opts, std::ostream& log);

}  // namespace kendama::cli
