#pragma once

// Scenario execution and report serialization for the command-line tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvmw/fit_kit.hpp"
#include "nvmw/odmr_sim.hpp"
#include "nvmw/reconstruct.hpp"
#include "nvmw/scenario.hpp"

namespace nvmw::runner {

inline constexpr const char* kToolVersion = "1.0.0";
/// Bumped whenever a CSV header or column order changes.
inline constexpr int kCsvSchemaVersion = 1;

enum class Format { Csv, Json };

struct RunOptions {
  scenario::Mode mode = scenario::Mode::Simulate;
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;  // overrides noise.seed
  Format format = Format::Csv;
  int parallel = 1;
};

struct RunResult {
  std::vector<std::string> outputs;  // file names relative to out_dir, manifest last
  nlohmann::json manifest;
};

/// Executes one scenario. Throws scenario::ConfigError for schema problems and
/// nvmw::Error for pipeline failures.
RunResult run(const RunOptions& opts);

/// run() with exceptions mapped to exit codes (0 ok, 2 validation, 3 numeric);
/// the message goes to `err`.
int run_with_exit_code(const RunOptions& opts, std::ostream& err);

// ---------------------------------------------------------------------------
// Serializers (also used by tests)

std::string spectrum_csv(const odmr::OdmrSpectrum& spec);
odmr::OdmrSpectrum read_spectrum_csv(const std::filesystem::path& path);
nlohmann::json spectrum_json(const odmr::OdmrSpectrum& spec, const nlohmann::json& params);
nlohmann::json fit_result_json(const fit::FitResult& fit);
std::string sweep_csv(const fit::SweepDepths& depths);
std::string planar_csv(const std::vector<reconstruct::PlanarResult>& rows);
nlohmann::json reconstruction_json(const reconstruct::MwAxisEstimate& axis,
                                   const std::vector<reconstruct::NvYEstimate>& nv_y,
                                   const std::optional<geometry::LabVector>& truth);

/// Fixed-precision decimal used in every CSV cell.
std::string fmt(double v);

std::string sha256_hex(const std::string& data);

}  // namespace nvmw::runner
