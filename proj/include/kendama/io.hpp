#pragma once

/**
 * @file io.hpp
 * @brief CSV and JSON persistence for samples, traces, roll-out records and sweep summaries.
 *
 * Doubles are written with 17 significant digits so files round-trip exactly
 * and reruns produce identical bytes.
 */

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kendama/harness.hpp"
#include "kendama/swingup.hpp"

namespace kendama::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_double(double x);

/// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// JSON with two-space indent and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

std::string samples_csv(const std::vector<sets::Vec2>& samples);
std::vector<sets::Vec2> parse_samples_csv(const std::string& text);

std::string trace_csv(const std::vector<harness::TraceRow>& trace);

std::string records_csv(const std::vector<harness::RolloutRecord>& records);
/// Inverse of records_csv (the trace is not stored). Throws IoError on malformed rows.
std::vector<harness::RolloutRecord> parse_records_csv(const std::string& text);

std::string input_sequence_csv(const swingup::SwingupSolution& sol, double Ts);
std::string state_trajectory_csv(const swingup::SwingupSolution& sol, double Ts);

nlohmann::json to_json(const harness::NSummary& s);
nlohmann::json to_json(const harness::SweepSummary& s);
/// Throws IoError on missing or mistyped fields.
harness::SweepSummary sweep_summary_from_json(const nlohmann::json& j);

}  // namespace kendama::io
