#pragma once

// Angle-sensitivity figures of merit for the two-line intensity ratio
// S = I1 / I2 = tan^2(phi), where I1 is the L0<->Lm depth and I2 the L0<->Lp
// depth.

namespace nvmw::sensitivity {

struct SensitivityInput {
  double phi = 0.0;        // rad
  double sigma_rel = 0.0;  // sigma_I1 / I1
  double n = 1.0;          // repetitions
  double t = 1.0;          // sensing time per repetition, s

  void validate() const;
};

double signal_ratio(double i1, double i2);

/// Inverse of S = tan^2(phi) on [0, pi/2).
double phi_from_ratio(double s);

/// sigma_S = sqrt(2) tan^2(phi) sigma_rel.
double ratio_sigma(double phi, double sigma_rel);

/// eta = sin(2 phi) / (2 sqrt 2) * sigma_rel * sqrt(n t), rad / sqrt(Hz).
/// Vanishes at phi = 0 and pi/2; that is a property of the linearized
/// error propagation, not a real sensitivity.
double eta(const SensitivityInput& input);

/// eta at sin(2 phi) = 1.
double eta_max(double sigma_rel, double n_t);

/// Shot-noise-limited relative intensity error 1 / (contrast sqrt(rate t)),
/// rate in kcps.
double shot_noise_sigma_rel(double rate_kcps, double contrast, double t_s);

}  // namespace nvmw::sensitivity
