#include "nvmw/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nvmw/error.hpp"
#include "nvmw/rng.hpp"

namespace nvmw::reconstruct {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// Angle between the lines spanned by u and v, degrees; accurate near zero.
double line_mismatch_deg(const LabVector& u, const LabVector& v) {
  return std::atan2(u.cross(v).norm(), std::abs(u.dot(v))) / kDeg;
}

double circular_distance(double a_deg, double b_deg, double period) {
  double d = std::fmod(std::abs(a_deg - b_deg), period);
  return std::min(d, period - d);
}

}  // namespace

NvYEstimate extract_nv_y(const geometry::TransverseBasis& basis, const fit::Cos2Fit& cos2,
                         int source_nv) {
  if (!(cos2.a > 3.0 * cos2.sigma_a))
    throw Error(ErrorCode::DegenerateAmplitude, "cos^2 fit has no significant amplitude");
  NvYEstimate out;
  out.axis = geometry::sweep_direction(basis, cos2.psi0 + kPi / 2).normalized();
  out.sigma_angle = cos2.sigma_psi0;
  out.source_nv = source_nv;
  return out;
}

MwAxisEstimate mw_axis_from_two(const NvYEstimate& y1, const NvYEstimate& y2) {
  const LabVector c = y1.axis.cross(y2.axis);
  if (!(c.norm() > 1e-3))
    throw Error(ErrorCode::NearParallel,
                "NV_Y axes are (nearly) parallel; microwave axis is unresolvable");
  MwAxisEstimate out;
  out.axis = c.normalized();
  return out;
}

LabVector representative_near(const LabVector& axis, const LabVector& hint) {
  return axis.dot(hint) < 0 ? LabVector(-axis) : axis;
}

double PlanarAlpha::nearest(double hint_deg) const {
  return circular_distance(alpha_deg, hint_deg, 360.0) <=
                 circular_distance(partner_deg, hint_deg, 360.0)
             ? alpha_deg
             : partner_deg;
}

double PlanarAlpha::error_to(double truth_deg) const {
  return circular_distance(alpha_deg, truth_deg, 180.0);
}

LabVector planar_forward(double alpha_deg, const LabVector& nv_z) {
  const double a = alpha_deg * kDeg;
  const LabVector m{std::sin(a), 0.0, std::cos(a)};
  const LabVector v = nv_z.cross(m);
  const double n = v.norm();
  if (!(n > 0))
    throw Error(ErrorCode::Validation, "planar field is parallel to the NV axis");
  return v / n;
}

PlanarAlpha planar_alpha(const LabVector& u_in, const LabVector& nv_z) {
  const double un = u_in.norm();
  if (!(un > 0)) throw Error(ErrorCode::ZeroVector, "measured axis is a zero vector");
  if (std::abs(nv_z.norm() - 1.0) > 1e-9)
    throw Error(ErrorCode::Validation, "NV axis must be a unit vector");
  // A tilt out of the transverse plane shows up in the residual.
  const LabVector u = u_in / un;

  auto mismatch = [&](double alpha) { return line_mismatch_deg(u, planar_forward(alpha, nv_z)); };

  constexpr int kSteps = 3600;  // 0.1 degree
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kSteps; ++i) {
    const double v = mismatch(0.1 * i);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }

  // Golden-section search on the bracketing interval.
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.1 * best - 0.1;
  double hi = 0.1 * best + 0.1;
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  double f1 = mismatch(x1);
  double f2 = mismatch(x2);
  while (hi - lo > 1e-9) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = mismatch(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = mismatch(x2);
    }
  }
  double alpha = 0.5 * (lo + hi);
  double residual = mismatch(alpha);
  if (best_val < residual) {
    alpha = 0.1 * best;
    residual = best_val;
  }

  PlanarAlpha out;
  out.alpha_deg = std::fmod(geometry::wrap_degrees(alpha), 180.0);
  out.partner_deg = out.alpha_deg + 180.0;
  out.residual_deg = residual;
  if (residual > 1.0) {
    std::ostringstream msg;
    msg << "measured axis is " << residual << " deg from the planar model";
    throw Error(ErrorCode::PoorFit, msg.str());
  }
  return out;
}

double closed_form_ratio(const LabVector& u_in) {
  const double n = u_in.norm();
  if (!(n > 0)) throw Error(ErrorCode::ZeroVector, "measured axis is a zero vector");
  const LabVector u = u_in / n;
  const double denom = u.x() * u.x() + u.z() * u.z();
  if (!(denom > 0))
    throw Error(ErrorCode::InconsistentInput, "axis has no X_L/Z_L component");
  return (2.0 * u.y() * u.y() - 1.0) / denom;
}

double closed_form_alpha_check(const LabVector& u_in) {
  const LabVector u = u_in.normalized();
  double ratio = closed_form_ratio(u);
  if (std::abs(ratio) > 1.0 + 1e-9) {
    std::ostringstream msg;
    msg << "closed-form arcsine argument " << ratio << " lies outside [-1, 1]";
    throw Error(ErrorCode::InconsistentInput, msg.str());
  }
  ratio = std::clamp(ratio, -1.0, 1.0);
  const double base = 0.5 * std::asin(ratio) / kDeg;  // [-45, 45]
  const std::array<double, 4> candidates{base, 90.0 - base, 180.0 + base, 270.0 - base};

  // u_z ~ sin(alpha), -u_x ~ cos(alpha) share the positive factor 1/sqrt(2 + sin 2a).
  double best = candidates[0];
  double best_score = -std::numeric_limits<double>::infinity();
  for (double c : candidates) {
    const double score = std::sin(c * kDeg) * u.z() - std::cos(c * kDeg) * u.x();
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return geometry::wrap_degrees(best);
}

// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  consts.validate();
  shape.validate();
  if (!(bias_mt > 0)) throw Error(ErrorCode::Validation, "bias field must be > 0");
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "frequency grid is empty");
  if (psis.empty()) throw Error(ErrorCode::Validation, "sweep needs psi values");
  if (noise) {
    if (!(noise->rate_kcps > 0)) throw Error(ErrorCode::Validation, "count rate must be > 0");
    if (noise->dwell_s.has_value() == noise->target_sigma_rel.has_value())
      throw Error(ErrorCode::Validation, "noise needs exactly one of dwell_s, target_sigma_rel");
    if (noise->dwell_s && !(*noise->dwell_s > 0))
      throw Error(ErrorCode::Validation, "dwell time must be > 0");
    if (noise->target_sigma_rel && !(*noise->target_sigma_rel > 0))
      throw Error(ErrorCode::Validation, "target sigma_rel must be > 0");
  }
}

std::vector<double> uniform_psis(int count) {
  if (count < 1) throw Error(ErrorCode::Validation, "psi count must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = kPi * k / count;
  return out;
}

double calibrate_dwell(const PipelineConfig& cfg, const geometry::TransverseBasis& basis,
                       const odmr::LabMicrowave& mw, double rate_kcps, double target) {
  const spin::MwFieldNV mw_nv = odmr::to_nv_frame(basis, mw);
  double phi = std::fmod(mw_nv.transverse_azimuth + kPi / 4, 2 * kPi);
  if (phi < 0) phi += 2 * kPi;
  const spin::StaticFieldNV field{cfg.bias_mt, kPi / 2, phi};
  const auto lines = spin::transition_table(cfg.consts, field, mw_nv);
  const double ref_depth = cfg.shape.depth_for(lines[1].rabi);
  if (!(ref_depth > 0))
    throw Error(ErrorCode::Validation, "reference dip has zero depth; cannot calibrate noise");
  const double unit = fit::depth_sigma_per_unit_noise(
      cfg.grid, {lines[0].frequency, lines[1].frequency}, cfg.shape.fwhm, 1);
  const double counts = std::pow(unit / (target * ref_depth), 2);
  return counts / (rate_kcps * 1000.0);
}

SweepAnalysis analyze_orientation(const PipelineConfig& cfg, int nv_index,
                                  const odmr::LabMicrowave& mw, std::uint64_t seed) {
  cfg.validate();
  SweepAnalysis out;
  out.nv_index = nv_index;
  out.basis = geometry::transverse_basis(geometry::nv_axis(nv_index));
  out.series = odmr::simulate_phi_sweep(cfg.consts, out.basis, cfg.bias_mt, mw, cfg.shape,
                                        cfg.grid, cfg.psis);

  if (cfg.noise) {
    out.dwell_s = cfg.noise->dwell_s
                      ? *cfg.noise->dwell_s
                      : calibrate_dwell(cfg, out.basis, mw, cfg.noise->rate_kcps,
                                        *cfg.noise->target_sigma_rel);
    for (std::size_t i = 0; i < out.series.points.size(); ++i) {
      auto& sp = out.series.points[i].spectrum;
      sp = odmr::add_shot_noise(sp, cfg.noise->rate_kcps, out.dwell_s, rng::sub_seed(seed, i));
    }
  }

  // Line positions do not depend on the in-plane azimuth at theta = pi/2.
  const auto eig = spin::eigensystem(spin::ground_hamiltonian(
      cfg.consts, spin::StaticFieldNV{cfg.bias_mt, kPi / 2, 0.0}));
  fit::DipFitOptions opts;
  opts.init_fwhm = cfg.shape.fwhm;
  out.depths = fit::extract_sweep_depths(out.series,
                                         {eig.to_minus.frequency, eig.to_plus.frequency}, opts);

  std::vector<double> psis;
  std::vector<double> depths;
  std::vector<double> sigmas;
  for (const auto& d : out.depths.points) {
    psis.push_back(d.psi);
    depths.push_back(d.depth_lp);
    sigmas.push_back(d.sigma_lp);
  }
  if (!cfg.noise) sigmas.clear();
  out.cos2 = fit::fit_cos2(psis, depths, sigmas);
  out.nv_y = extract_nv_y(out.basis, out.cos2, nv_index);
  return out;
}

odmr::LabMicrowave wire_microwave(const geometry::WireScene& scene) {
  return {geometry::wire_field_direction(scene), geometry::wire_field_magnitude(scene)};
}

PlanarResult end_to_end_planar(const geometry::WireScene& scene, int nv_index,
                               const PipelineConfig& cfg, std::uint64_t seed) {
  PlanarResult out;
  out.x_um = scene.sensor_x;
  out.z_um = scene.sensor_z;
  out.sweep = analyze_orientation(cfg, nv_index, wire_microwave(scene), seed);
  out.alpha = planar_alpha(out.sweep.nv_y.axis, out.sweep.basis.nv_z);
  out.alpha_truth_deg = geometry::alpha_of_position(scene.sensor_x, scene.sensor_z);
  out.error_deg = out.alpha.error_to(out.alpha_truth_deg);
  return out;
}

ThreeDResult end_to_end_3d(const geometry::WireScene& scene, std::array<int, 2> nv_indices,
                           const PipelineConfig& cfg, std::uint64_t seed) {
  const odmr::LabMicrowave mw = wire_microwave(scene);
  ThreeDResult out{{analyze_orientation(cfg, nv_indices[0], mw, rng::sub_seed(seed, 0)),
                    analyze_orientation(cfg, nv_indices[1], mw, rng::sub_seed(seed, 1))},
                   {},
                   geometry::wire_field_direction(scene)};
  out.axis = mw_axis_from_two(out.sweeps[0].nv_y, out.sweeps[1].nv_y);
  out.axis.axis = representative_near(out.axis.axis, out.truth);
  out.axis.angular_error_deg = geometry::axis_angle_between(out.axis.axis, out.truth);
  return out;
}

std::vector<PlanarResult> batch_planar(const std::vector<geometry::WireScene>& scenes,
                                       int nv_index, const PipelineConfig& cfg,
                                       std::uint64_t seed, int threads) {
  return parallel_map<PlanarResult>(scenes.size(), threads, [&](std::size_t i) {
    return end_to_end_planar(scenes[i], nv_index, cfg, rng::sub_seed(seed, i));
  });
}

}  // namespace nvmw::reconstruct
