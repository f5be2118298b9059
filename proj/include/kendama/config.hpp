#pragma once

/**
 * @file config.hpp
 * @brief One JSON document holding every module's settings.
 *
 * Every section is optional and falls back to the library defaults, but keys
 * that are not recognized are rejected. Parsing validates the result before
 * anything runs.
 */

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "kendama/controller.hpp"
#include "kendama/dynamics.hpp"
#include "kendama/harness.hpp"
#include "kendama/noise.hpp"
#include "kendama/swingup.hpp"

namespace kendama::config {

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationSettings {
  std::size_t n = 2000;
  /// CSV of samples (columns v_x, v_z). Drawn from the true model when empty.
  std::string samples_path;
};

struct RolloutSettings {
  int count = 10;
  bool traces = true;
  /// ConfidenceSupport JSON; learned from calibration samples when empty.
  std::string support_path;
};

struct E0Settings {
  /// "uniform" draws from E_tr, "swingup" pools release states of perturbed open-loop swing-ups.
  std::string source = "uniform";
  int swingup_rollouts = 200;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string output_dir = "out";
  dynamics::PhysicalParams physical;
  swingup::SwingupProblem swingup;
  swingup::SolverOptions solver;
  swingup::PerturbationSpec perturbation;
  double observer_pole = 0.6;
  double feedback_pole = 0.7;
  controller::ControllerConfig controller;
  harness::ExperimentConfig experiment;
  CalibrationSettings calibration;
  RolloutSettings rollout;
  E0Settings e0;

  /// Throws ConfigError when any module rejects its settings.
  void validate() const;
};

/// Parses and validates. Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

/// Reads a file. Throws ConfigError on IO or parse failures.
RunConfig load(const std::filesystem::path& path);

}  // namespace kendama::config
