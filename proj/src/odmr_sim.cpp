#include "nvmw/odmr_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nvmw/error.hpp"
#include "nvmw/rng.hpp"

namespace nvmw::odmr {

void LineshapeParams::validate() const {
  if (!(fwhm > 0) || !std::isfinite(fwhm))
    throw Error(ErrorCode::Validation, "lineshape fwhm must be > 0");
  if (!(contrast_ref > 0 && contrast_ref <= 1))
    throw Error(ErrorCode::Validation, "contrast_ref must lie in (0, 1]");
  if (!(omega_ref > 0) || !std::isfinite(omega_ref))
    throw Error(ErrorCode::Validation, "omega_ref must be > 0");
}

double LineshapeParams::depth_for(double omega) const {
  const double w2 = omega * omega;
  if (model == IntensityModel::Linear) return contrast_ref * w2 / (omega_ref * omega_ref);
  return contrast_ref * w2 / (w2 + omega_ref * omega_ref);
}

std::vector<double> FrequencyGrid::points() const {
  if (!(step > 0) || !(stop >= start) || !std::isfinite(start) || !std::isfinite(stop))
    throw Error(ErrorCode::Validation, "frequency grid needs start <= stop and step > 0");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = start + static_cast<double>(i) * step;
  return f;
}

double lorentzian(double f, double center, double fwhm) {
  const double x = 2.0 * (f - center) / fwhm;
  return 1.0 / (1.0 + x * x);
}

OdmrSpectrum simulate_spectrum(const spin::SpinConstants& consts,
                               const spin::StaticFieldNV& field,
                               const spin::MwFieldNV& mw,
                               const LineshapeParams& shape,
                               const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "frequency grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw Error(ErrorCode::Validation, "frequency grid must be strictly ascending");
  shape.validate();

  const auto lines = spin::transition_table(consts, field, mw);
  std::vector<double> depths;
  depths.reserve(lines.size());
  for (const auto& line : lines) depths.push_back(shape.depth_for(line.rabi));

  auto total_dip = [&](double f) {
    double s = 0.0;
    for (std::size_t t = 0; t < lines.size(); ++t)
      s += depths[t] * lorentzian(f, lines[t].frequency, shape.fwhm);
    return s;
  };

  double worst = 0.0;
  for (const auto& line : lines) worst = std::max(worst, total_dip(line.frequency));

  OdmrSpectrum out;
  out.frequencies = grid;
  out.signal.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dip = total_dip(grid[i]);
    worst = std::max(worst, dip);
    out.signal[i] = 1.0 - dip;
  }
  if (worst >= 1.0) {
    std::ostringstream msg;
    msg << "summed dip depth " << worst << " leaves no fluorescence";
    throw Error(ErrorCode::ContrastOverflow, msg.str());
  }
  return out;
}

spin::MwFieldNV to_nv_frame(const geometry::TransverseBasis& basis,
                            const LabMicrowave& mw) {
  const double norm = mw.direction.norm();
  spin::MwFieldNV out;
  out.amplitude = mw.amplitude;
  if (!(norm > 0)) {
    if (mw.amplitude != 0)
      throw Error(ErrorCode::ZeroVector, "microwave direction is a zero vector");
    return out;
  }
  const geometry::LabVector n = mw.direction / norm;
  const double x = n.dot(basis.e1);
  const double y = n.dot(basis.e2);
  const double z = n.dot(basis.nv_z);
  out.zeta = std::acos(std::clamp(z, -1.0, 1.0));
  out.transverse_azimuth = std::atan2(y, x);
  return out;
}

SweepSeries simulate_phi_sweep(const spin::SpinConstants& consts,
                               const geometry::TransverseBasis& basis,
                               double bias_mt, const LabMicrowave& mw,
                               const LineshapeParams& shape,
                               const std::vector<double>& grid,
                               const std::vector<double>& psis) {
  if (std::abs(basis.nv_z.norm() - 1.0) > 1e-9)
    throw Error(ErrorCode::Validation, "NV axis must be a unit vector");
  if (!(bias_mt > 0)) throw Error(ErrorCode::Validation, "bias field must be > 0");
  if (psis.empty()) throw Error(ErrorCode::Validation, "sweep needs at least one psi");

  const spin::MwFieldNV mw_nv = to_nv_frame(basis, mw);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  SweepSeries series;
  series.shape = shape;
  series.points.reserve(psis.size());
  for (double psi : psis) {
    double phi = std::fmod(psi, two_pi);
    if (phi < 0) phi += two_pi;
    if (phi >= two_pi) phi = 0.0;
    const spin::StaticFieldNV field{bias_mt, std::numbers::pi / 2, phi};
    series.points.push_back({psi, simulate_spectrum(consts, field, mw_nv, shape, grid)});
  }
  return series;
}

OdmrSpectrum add_shot_noise(const OdmrSpectrum& spec, double rate_kcps, double dwell_s,
                            std::uint64_t seed) {
  if (!(rate_kcps > 0) || !std::isfinite(rate_kcps))
    throw Error(ErrorCode::Validation, "count rate must be > 0");
  if (!(dwell_s > 0) || !std::isfinite(dwell_s))
    throw Error(ErrorCode::Validation, "dwell time must be > 0");

  const CountsMeta meta{rate_kcps, dwell_s, seed};
  const double n = meta.counts_per_unit_signal();
  rng::Generator gen(seed);
  OdmrSpectrum out = spec;
  out.counts = meta;
  for (double& s : out.signal)
    s = static_cast<double>(gen.poisson(std::max(s, 0.0) * n)) / n;
  return out;
}

}  // namespace nvmw::odmr
