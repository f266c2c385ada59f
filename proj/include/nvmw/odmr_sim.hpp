#pragma once

// Forward synthesis of CW-ODMR spectra and static-field azimuth sweeps.

#include <cstdint>
#include <optional>
#include <vector>

#include "nvmw/geometry.hpp"
#include "nvmw/spin_model.hpp"

namespace nvmw::odmr {

enum class IntensityModel { Linear, Saturating };

struct LineshapeParams {
  double fwhm = 8.0;            // MHz
  double contrast_ref = 0.02;   // peak contrast at omega_ref (linear model)
  double omega_ref = 1.0;       // MHz
  IntensityModel model = IntensityModel::Linear;

  void validate() const;
  /// Dip depth C for a transition with Rabi amplitude `omega`.
  double depth_for(double omega) const;
};

struct FrequencyGrid {
  double start = 2850.0;  // MHz
  double stop = 2950.0;
  double step = 0.5;

  std::vector<double> points() const;
};

struct CountsMeta {
  double rate_kcps = 0.0;
  double dwell_s = 0.0;
  std::uint64_t seed = 0;

  double counts_per_unit_signal() const { return rate_kcps * 1000.0 * dwell_s; }
};

struct OdmrSpectrum {
  std::vector<double> frequencies;  // MHz, strictly ascending
  std::vector<double> signal;       // normalized fluorescence, baseline 1
  std::optional<CountsMeta> counts;
};

struct SweepPoint {
  double psi = 0.0;  // rad
  OdmrSpectrum spectrum;
};

struct SweepSeries {
  std::vector<SweepPoint> points;
  LineshapeParams shape;
};

/// Lorentzian with unit peak height.
double lorentzian(double f, double center, double fwhm);

OdmrSpectrum simulate_spectrum(const spin::SpinConstants& consts,
                               const spin::StaticFieldNV& field,
                               const spin::MwFieldNV& mw,
                               const LineshapeParams& shape,
                               const std::vector<double>& grid);

/// Microwave field specified in the lab frame.
struct LabMicrowave {
  geometry::LabVector direction;  // need not be normalized
  double amplitude = 0.0;         // mT
};

/// Expresses a lab-frame microwave field in the NV frame whose X/Y axes are
/// basis.e1 / basis.e2 and whose Z axis is basis.nv_z.
spin::MwFieldNV to_nv_frame(const geometry::TransverseBasis& basis,
                            const LabMicrowave& mw);

/// One spectrum per psi with the static field (magnitude `bias_mt`) along
/// sweep_direction(basis, psi), i.e. theta = pi/2 and phi = psi.
SweepSeries simulate_phi_sweep(const spin::SpinConstants& consts,
                               const geometry::TransverseBasis& basis,
                               double bias_mt, const LabMicrowave& mw,
                               const LineshapeParams& shape,
                               const std::vector<double>& grid,
                               const std::vector<double>& psis);

/// Replaces each point by k / N with k ~ Poisson(signal * N) and
/// N = rate * 1000 * dwell.
OdmrSpectrum add_shot_noise(const OdmrSpectrum& spec, double rate_kcps,
                            double dwell_s, std::uint64_t seed);

}  // namespace nvmw::odmr
