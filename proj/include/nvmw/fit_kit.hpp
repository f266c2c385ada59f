#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) least squares and the two fit
// models used by the reconstruction pipeline: multi-Lorentzian dips and the
// a cos^2(psi - psi0) + b intensity law.

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nvmw/odmr_sim.hpp"

namespace nvmw::fit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct NlsOptions {
  int max_iter = 200;
  double tol = 1e-10;             // relative reduction of the residual norm
  double initial_damping = 1e-3;  // lambda, scaled by diag(J^T J)
  double damping_factor = 10.0;   // x on rejected steps, / on accepted steps
};

struct LeastSquaresProblem {
  std::function<VectorXd(const VectorXd&)> residuals;
  /// d residuals / d params. Central differences are used when empty.
  std::function<MatrixXd(const VectorXd&)> jacobian;
  /// True when residuals are already divided by per-point sigmas; the
  /// covariance is then not rescaled by the reduced chi-square.
  bool weighted = false;
};

struct FitResult {
  VectorXd params;
  MatrixXd covariance;
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  bool rank_deficient = false;
  std::vector<double> residual_history;  // norm after init and each accepted step

  VectorXd sigmas() const;
};

FitResult nls_fit(const LeastSquaresProblem& problem, const VectorXd& init,
                  const NlsOptions& opts = {});

MatrixXd numeric_jacobian(const std::function<VectorXd(const VectorXd&)>& f,
                          const VectorXd& p, double rel_step = 1e-6);

// ---------------------------------------------------------------------------
// Lorentzian dips

struct DipEstimate {
  double center = 0.0;  // MHz
  double fwhm = 0.0;    // MHz
  double depth = 0.0;   // fitted value; may dip below zero for noisy null lines
  double depth_sigma = 0.0;
  double center_sigma = 0.0;
};

struct DipFitOptions {
  bool shared_fwhm = true;
  double init_fwhm = 8.0;
  /// When set, centers (and optionally the width) are held fixed and only the
  /// baseline and depths are fitted.
  std::optional<std::vector<double>> fixed_centers;
  std::optional<double> fixed_fwhm;
  NlsOptions nls;
};

struct DipFitResult {
  std::vector<DipEstimate> dips;  // ordered by center
  double baseline = 1.0;
  bool overlapping = false;       // |c1 - c2| < fwhm for some adjacent pair
  FitResult fit;
};

/// Model: baseline - sum_i depth_i * L(f; center_i, fwhm_i), L unit peak.
/// Points are weighted by Poisson sigmas when the spectrum carries counts.
DipFitResult fit_dips(const odmr::OdmrSpectrum& spec,
                      const std::vector<double>& init_centers,
                      const DipFitOptions& opts = {});

/// Parameter layout helper shared with tests: the dip model evaluated at
/// `freqs` for baseline, centers, widths, depths.
VectorXd dip_model(const std::vector<double>& freqs, double baseline,
                   const std::vector<double>& centers,
                   const std::vector<double>& widths,
                   const std::vector<double>& depths);

/// d dip_model / d params with columns [baseline, centers, widths, depths]
/// (one width per dip).
MatrixXd dip_model_jacobian(const std::vector<double>& freqs, double baseline,
                            const std::vector<double>& centers,
                            const std::vector<double>& widths,
                            const std::vector<double>& depths);

/// 1-sigma depth error of dip `index` per unit point noise, for a fit with
/// fixed centers and width (design columns 1, -L_1, ..., -L_n).
double depth_sigma_per_unit_noise(const std::vector<double>& freqs,
                                  const std::vector<double>& centers, double fwhm,
                                  std::size_t index);

// ---------------------------------------------------------------------------
// Sweep depth extraction

struct SweepDepth {
  double psi = 0.0;
  double depth_lm = 0.0;
  double depth_lp = 0.0;
  double sigma_lm = 0.0;
  double sigma_lp = 0.0;
};

struct SweepDepths {
  std::vector<SweepDepth> points;
  double center_lm = 0.0;
  double center_lp = 0.0;
  double fwhm = 0.0;
};

/// Fits centers and a shared width on the sweep-averaged spectrum, then fits
/// depths point by point with that shape held fixed.
SweepDepths extract_sweep_depths(const odmr::SweepSeries& series,
                                 const std::vector<double>& init_centers,
                                 const DipFitOptions& opts = {});

// ---------------------------------------------------------------------------
// a cos^2(psi - psi0) + b

struct Cos2Fit {
  double a = 0.0;
  double b = 0.0;
  double psi0 = 0.0;  // rad, in [0, pi)
  double sigma_a = 0.0;
  double sigma_b = 0.0;
  double sigma_psi0 = 0.0;
  double r_squared = 0.0;
  FitResult fit;
};

double cos2_model(double psi, double a, double b, double psi0);
/// d cos2_model / d (a, b, psi0).
Eigen::RowVector3d cos2_gradient(double psi, double a, double b, double psi0);

/// Weighted when `sigmas` is non-empty. Requires >= 4 distinct psi values
/// spanning more than pi/2. Throws DegenerateAmplitude when a <= 3 sigma_a.
Cos2Fit fit_cos2(const std::vector<double>& psis, const std::vector<double>& depths,
                 const std::vector<double>& sigmas = {}, const NlsOptions& opts = {});

}  // namespace nvmw::fit
