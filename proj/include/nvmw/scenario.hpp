#pragma once

// JSON scenario configuration for the command-line front end.
//
// Units at this boundary are mT, MHz, um and degrees; everything is converted
// to radians on the way in. Unknown keys are rejected at every level.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvmw/geometry.hpp"
#include "nvmw/odmr_sim.hpp"
#include "nvmw/reconstruct.hpp"
#include "nvmw/spin_model.hpp"

namespace nvmw::scenario {

enum class Mode { Simulate, Fit, ReconstructPlanar, Reconstruct3d, Table1, Fieldmap, Sensitivity };

const char* to_string(Mode mode);
std::optional<Mode> parse_mode(const std::string& name);

struct AxisRange {
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;
  std::vector<double> values() const;
};

struct FitInput {
  std::string spectrum_csv;  // resolved against the config file directory
  std::vector<double> init_centers_mhz;
  bool shared_fwhm = true;
  double init_fwhm_mhz = 8.0;
};

struct SensitivityConfig {
  std::vector<double> phi_deg;
  double sigma_rel = 0.0;
  double n = 1.0;
  double t_s = 1.0;
  struct ShotNoise {
    double rate_kcps = 0.0;
    double contrast = 0.0;
    double t_s = 1.0;
  };
  std::optional<ShotNoise> shot_noise;
};

struct ScenarioConfig {
  Mode mode = Mode::Simulate;

  spin::SpinConstants spin;
  std::optional<spin::StaticFieldNV> static_field;  // simulate
  std::optional<spin::MwFieldNV> microwave;         // simulate
  double static_field_mt = 0.0;                     // sweep-based modes
  std::vector<int> nv_indices;

  double current_ma = 0.0;
  double wire_diameter_um = 25.0;
  std::vector<std::array<double, 2>> positions_um;

  std::vector<double> psis;  // rad
  odmr::FrequencyGrid grid;
  odmr::LineshapeParams shape;
  std::optional<reconstruct::NoiseConfig> noise;

  std::optional<FitInput> fit;
  std::optional<std::array<geometry::LabVector, 2>> injected_nv_y;
  AxisRange fieldmap_x;
  AxisRange fieldmap_z;
  std::optional<SensitivityConfig> sensitivity;

  std::vector<geometry::WireScene> scenes() const;
  reconstruct::PipelineConfig pipeline() const;
};

/// Thrown for schema violations; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The nine sensor positions (x, z in um) of the wire-imaging table.
const std::vector<std::array<double, 2>>& table1_positions();

/// Parses and validates a scenario for `mode`. A "mode" key inside the
/// document, if present, must agree.
ScenarioConfig parse_config(const nlohmann::json& doc, Mode mode,
                            const std::string& base_dir = ".");

}  // namespace nvmw::scenario
