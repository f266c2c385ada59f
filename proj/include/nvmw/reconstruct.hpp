#pragma once

// Inverse problem: sweep minima -> NV_Y directions -> microwave axis, and the
// planar single-orientation inversion to the angle alpha.
//
// Every recovered direction is an axis (a line): a linearly polarized field
// along +m and -m produces identical spectra.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "nvmw/fit_kit.hpp"
#include "nvmw/geometry.hpp"
#include "nvmw/odmr_sim.hpp"
#include "nvmw/spin_model.hpp"

namespace nvmw::reconstruct {

using geometry::LabVector;

struct NvYEstimate {
  LabVector axis;            // unit, perpendicular to the NV axis, sign-ambiguous
  double sigma_angle = 0.0;  // rad
  int source_nv = -1;        // crystallographic index, -1 if unknown
};

struct MwAxisEstimate {
  LabVector axis;
  bool sign_ambiguous = true;
  std::optional<double> angular_error_deg;  // vs. a supplied truth, min over +-
};

/// Direction of minimum L0<->Lp depth: sweep_direction(basis, psi0 + pi/2).
NvYEstimate extract_nv_y(const geometry::TransverseBasis& basis, const fit::Cos2Fit& cos2,
                         int source_nv = -1);

/// Normalized cross product of the two NV_Y axes.
MwAxisEstimate mw_axis_from_two(const NvYEstimate& y1, const NvYEstimate& y2);

/// The member of {axis, -axis} closest to `hint`.
LabVector representative_near(const LabVector& axis, const LabVector& hint);

// ---------------------------------------------------------------------------
// Planar inversion: m(alpha) = [sin alpha, 0, cos alpha].

struct PlanarAlpha {
  double alpha_deg = 0.0;     // in [0, 180)
  double partner_deg = 0.0;   // alpha + 180
  double residual_deg = 0.0;  // angular mismatch between +-u and the model axis

  /// alpha or its partner, whichever is closer to `hint_deg` on the circle.
  double nearest(double hint_deg) const;
  /// Circular distance from `truth_deg` to the nearer member of the pair.
  double error_to(double truth_deg) const;
};

/// normalize(nv_z x m(alpha)): the NV_Y axis a planar field would produce.
LabVector planar_forward(double alpha_deg, const LabVector& nv_z);

/// Grid scan (0.1 deg over [0, 360)) plus golden-section refinement.
/// Throws PoorFit when the residual exceeds 1 degree.
PlanarAlpha planar_alpha(const LabVector& u, const LabVector& nv_z);

/// (2 u_y^2 - 1) / (u_x^2 + u_z^2), which equals sin(2 alpha) for the NV axis
/// (1/sqrt 3)[-1, -1, 1].
double closed_form_ratio(const LabVector& u);

/// Closed-form alpha for nv_z = (1/sqrt 3)[-1, -1, 1]: half the arcsine of
/// closed_form_ratio, with the 2 alpha branch taken from the signs of u_z
/// (~ sin alpha) and -u_x (~ cos alpha). Degrees in [0, 360).
double closed_form_alpha_check(const LabVector& u);

// ---------------------------------------------------------------------------
// Forward + inverse pipeline

struct NoiseConfig {
  double rate_kcps = 200.0;
  /// Exactly one of dwell_s / target_sigma_rel is used; target_sigma_rel
  /// picks the dwell so that the L0<->Lp depth at 45 degrees relative
  /// azimuth has the requested relative 1-sigma fit error.
  std::optional<double> dwell_s;
  std::optional<double> target_sigma_rel;
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  spin::SpinConstants consts;
  double bias_mt = 10.2;
  odmr::LineshapeParams shape;
  std::vector<double> grid;  // MHz
  std::vector<double> psis;  // rad
  std::optional<NoiseConfig> noise;

  void validate() const;
};

/// psi values k * pi / count for k = 0 .. count-1.
std::vector<double> uniform_psis(int count);

struct SweepAnalysis {
  int nv_index = -1;
  geometry::TransverseBasis basis;
  odmr::SweepSeries series;
  fit::SweepDepths depths;
  fit::Cos2Fit cos2;
  NvYEstimate nv_y;
  double dwell_s = 0.0;  // 0 when noiseless
};

/// Dwell time that gives relative depth error `target` on the L0<->Lp dip at
/// 45 degrees relative azimuth, for the given field and configuration.
double calibrate_dwell(const PipelineConfig& cfg, const geometry::TransverseBasis& basis,
                       const odmr::LabMicrowave& mw, double rate_kcps, double target);

/// Sweep one NV orientation and extract its NV_Y axis. Noise (if configured)
/// uses sub-seeds of `seed`, one per psi.
SweepAnalysis analyze_orientation(const PipelineConfig& cfg, int nv_index,
                                  const odmr::LabMicrowave& mw, std::uint64_t seed);

/// Wire field at the sensor as a lab-frame microwave.
odmr::LabMicrowave wire_microwave(const geometry::WireScene& scene);

struct PlanarResult {
  double x_um = 0.0;
  double z_um = 0.0;
  PlanarAlpha alpha;
  double alpha_truth_deg = 0.0;
  double error_deg = 0.0;
  SweepAnalysis sweep;
};

PlanarResult end_to_end_planar(const geometry::WireScene& scene, int nv_index,
                               const PipelineConfig& cfg, std::uint64_t seed);

struct ThreeDResult {
  std::array<SweepAnalysis, 2> sweeps;
  MwAxisEstimate axis;
  LabVector truth;
};

ThreeDResult end_to_end_3d(const geometry::WireScene& scene, std::array<int, 2> nv_indices,
                           const PipelineConfig& cfg, std::uint64_t seed);

/// Runs `count` independent tasks on up to `threads` workers; results keep
/// input order.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t count, int threads, Fn&& fn);

/// Planar reconstruction for each scene. Position i uses sub_seed(seed, i),
/// so output does not depend on `threads`.
std::vector<PlanarResult> batch_planar(const std::vector<geometry::WireScene>& scenes,
                                       int nv_index, const PipelineConfig& cfg,
                                       std::uint64_t seed, int threads = 1);

}  // namespace nvmw::reconstruct

#include "nvmw/detail/parallel_map.hpp"
