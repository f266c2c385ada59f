#include "nvmw/fit_kit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "nvmw/error.hpp"

namespace nvmw::fit {

namespace {

constexpr double kPi = std::numbers::pi;

bool all_finite(const VectorXd& v) { return v.allFinite(); }

// Covariance (J^T J)^+ * scale. Pseudo-inverse drops directions whose
// eigenvalue is below 1e-12 of the largest.
MatrixXd covariance_from(const MatrixXd& jac, double scale, bool& rank_deficient) {
  const MatrixXd ata = jac.transpose() * jac;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(ata);
  const VectorXd& ev = es.eigenvalues();
  const double top = ev.size() ? ev.maxCoeff() : 0.0;
  rank_deficient = false;
  VectorXd inv = VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (top > 0 && ev(i) > 1e-12 * top) {
      inv(i) = 1.0 / ev(i);
    } else {
      rank_deficient = true;
    }
  }
  MatrixXd cov = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose());
  return cov * scale;
}

}  // namespace

VectorXd FitResult::sigmas() const {
  VectorXd s(covariance.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::sqrt(std::max(covariance(i, i), 0.0));
  return s;
}

MatrixXd numeric_jacobian(const std::function<VectorXd(const VectorXd&)>& f,
                          const VectorXd& p, double rel_step) {
  const VectorXd f0 = f(p);
  MatrixXd jac(f0.size(), p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(p(j)));
    VectorXd hi = p;
    VectorXd lo = p;
    hi(j) += h;
    lo(j) -= h;
    jac.col(j) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return jac;
}

FitResult nls_fit(const LeastSquaresProblem& problem, const VectorXd& init,
                  const NlsOptions& opts) {
  if (!all_finite(init)) throw Error(ErrorCode::Validation, "initial parameters must be finite");
  if (opts.max_iter < 1 || !(opts.damping_factor > 1) || !(opts.initial_damping > 0))
    throw Error(ErrorCode::Validation, "invalid least-squares options");

  auto jacobian = [&](const VectorXd& p) -> MatrixXd {
    if (problem.jacobian) return problem.jacobian(p);
    return numeric_jacobian(problem.residuals, p);
  };

  VectorXd p = init;
  VectorXd r = problem.residuals(p);
  if (r.size() == 0) throw Error(ErrorCode::Validation, "no data points");
  if (r.size() < p.size())
    throw Error(ErrorCode::Validation, "more parameters than data points");
  if (!all_finite(r)) throw Error(ErrorCode::Validation, "residuals non-finite at init");

  FitResult out;
  double cost = r.squaredNorm();
  out.residual_history.push_back(std::sqrt(cost));
  double lambda = opts.initial_damping;

  for (int it = 1; it <= opts.max_iter; ++it) {
    out.iterations = it;
    const MatrixXd jac = jacobian(p);
    const MatrixXd ata = jac.transpose() * jac;
    const VectorXd grad = jac.transpose() * r;
    const double dmax = ata.diagonal().maxCoeff();
    if (!(dmax > 0) || !std::isfinite(dmax))
      throw Error(ErrorCode::SingularSystem, "normal equations are singular (zero Jacobian)");
    const VectorXd scaling = ata.diagonal().cwiseMax(1e-12 * dmax);

    // Stationary point: residual orthogonal to the column space of J.
    const double stationarity = grad.norm() / (jac.norm() * std::sqrt(cost) + 1e-300);
    if (cost == 0.0 || stationarity < 1e-12) {
      out.converged = true;
      break;
    }

    bool accepted = false;
    VectorXd p_new;
    VectorXd r_new;
    double cost_new = cost;
    while (lambda < 1e16) {
      MatrixXd m = ata;
      m.diagonal() += lambda * scaling;
      Eigen::LDLT<MatrixXd> ldlt(m);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0))
        throw Error(ErrorCode::SingularSystem, "damped normal equations are singular");
      const VectorXd step = ldlt.solve(-grad);
      p_new = p + step;
      r_new = problem.residuals(p_new);
      if (all_finite(p_new) && all_finite(r_new)) {
        cost_new = r_new.squaredNorm();
        if (cost_new < cost) {
          accepted = true;
          lambda = std::max(lambda / opts.damping_factor, 1e-15);
          break;
        }
      }
      lambda *= opts.damping_factor;
    }

    if (!accepted) {
      // No descent direction left at machine precision.
      out.converged = stationarity < 1e-6;
      break;
    }

    const double old_norm = std::sqrt(cost);
    const double new_norm = std::sqrt(cost_new);
    p = p_new;
    r = r_new;
    cost = cost_new;
    out.residual_history.push_back(new_norm);
    if ((old_norm - new_norm) / old_norm < opts.tol) {
      out.converged = true;
      break;
    }
  }

  out.params = p;
  out.residual_norm = std::sqrt(cost);
  const auto m = static_cast<double>(r.size());
  const auto n = static_cast<double>(p.size());
  const double scale = problem.weighted ? 1.0 : cost / std::max(m - n, 1.0);
  out.covariance = covariance_from(jacobian(p), scale, out.rank_deficient);
  return out;
}

// ---------------------------------------------------------------------------

VectorXd dip_model(const std::vector<double>& freqs, double baseline,
                   const std::vector<double>& centers, const std::vector<double>& widths,
                   const std::vector<double>& depths) {
  VectorXd out(static_cast<Eigen::Index>(freqs.size()));
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    double s = baseline;
    for (std::size_t k = 0; k < centers.size(); ++k)
      s -= depths[k] * odmr::lorentzian(freqs[i], centers[k], widths[k]);
    out(static_cast<Eigen::Index>(i)) = s;
  }
  return out;
}

namespace {

// Maps the packed parameter vector onto dip quantities. Layout:
// [baseline, centers (if free), widths (1 shared or n, if free), depths].
struct DipLayout {
  std::size_t n = 0;
  bool free_centers = true;
  bool free_width = true;
  bool shared = true;
  std::vector<double> fixed_centers;
  double fixed_width = 0.0;

  std::size_t n_widths() const { return free_width ? (shared ? 1 : n) : 0; }
  std::size_t center_offset() const { return 1; }
  std::size_t width_offset() const { return 1 + (free_centers ? n : 0); }
  std::size_t depth_offset() const { return width_offset() + n_widths(); }
  std::size_t size() const { return depth_offset() + n; }

  double center(const VectorXd& p, std::size_t k) const {
    return free_centers ? p(static_cast<Eigen::Index>(center_offset() + k)) : fixed_centers[k];
  }
  double width(const VectorXd& p, std::size_t k) const {
    if (!free_width) return fixed_width;
    return p(static_cast<Eigen::Index>(width_offset() + (shared ? 0 : k)));
  }
  double depth(const VectorXd& p, std::size_t k) const {
    return p(static_cast<Eigen::Index>(depth_offset() + k));
  }
};

}  // namespace

DipFitResult fit_dips(const odmr::OdmrSpectrum& spec, const std::vector<double>& init_centers,
                      const DipFitOptions& opts) {
  const auto& f = spec.frequencies;
  const auto& y = spec.signal;
  if (f.empty() || f.size() != y.size())
    throw Error(ErrorCode::Validation, "spectrum is empty or ragged");
  if (init_centers.empty()) throw Error(ErrorCode::Validation, "need at least one dip");

  DipLayout layout;
  layout.n = init_centers.size();
  layout.shared = opts.shared_fwhm;
  if (opts.fixed_centers) {
    if (opts.fixed_centers->size() != layout.n)
      throw Error(ErrorCode::Validation, "fixed centers must match the dip count");
    layout.free_centers = false;
    layout.fixed_centers = *opts.fixed_centers;
  }
  if (opts.fixed_fwhm) {
    if (!(*opts.fixed_fwhm > 0)) throw Error(ErrorCode::Validation, "fixed fwhm must be > 0");
    layout.free_width = false;
    layout.fixed_width = *opts.fixed_fwhm;
  }
  for (double c : init_centers)
    if (!(c >= f.front() && c <= f.back()))
      throw Error(ErrorCode::Validation, "initial dip center lies outside the grid");
  if (!(opts.init_fwhm > 0)) throw Error(ErrorCode::Validation, "init fwhm must be > 0");

  const auto m = static_cast<Eigen::Index>(f.size());
  VectorXd weight = VectorXd::Ones(m);
  const bool weighted = spec.counts.has_value();
  if (weighted) {
    const double n_counts = spec.counts->counts_per_unit_signal();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double var = std::max(y[static_cast<std::size_t>(i)], 1.0 / n_counts) / n_counts;
      weight(i) = 1.0 / std::sqrt(var);
    }
  }

  VectorXd init(static_cast<Eigen::Index>(layout.size()));
  const double baseline0 = 0.5 * (y.front() + y.back());
  init(0) = baseline0;
  for (std::size_t k = 0; k < layout.n; ++k) {
    if (layout.free_centers) init(static_cast<Eigen::Index>(layout.center_offset() + k)) = init_centers[k];
    const double c = layout.free_centers ? init_centers[k] : layout.fixed_centers[k];
    const auto nearest = std::min_element(f.begin(), f.end(), [c](double a, double b) {
      return std::abs(a - c) < std::abs(b - c);
    });
    init(static_cast<Eigen::Index>(layout.depth_offset() + k)) =
        baseline0 - y[static_cast<std::size_t>(nearest - f.begin())];
  }
  for (std::size_t k = 0; k < layout.n_widths(); ++k)
    init(static_cast<Eigen::Index>(layout.width_offset() + k)) = opts.init_fwhm;

  LeastSquaresProblem problem;
  problem.weighted = weighted;
  problem.residuals = [&](const VectorXd& p) {
    VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double fi = f[static_cast<std::size_t>(i)];
      double model = p(0);
      for (std::size_t k = 0; k < layout.n; ++k)
        model -= layout.depth(p, k) * odmr::lorentzian(fi, layout.center(p, k), layout.width(p, k));
      r(i) = (model - y[static_cast<std::size_t>(i)]) * weight(i);
    }
    return r;
  };
  problem.jacobian = [&](const VectorXd& p) {
    std::vector<double> centers(layout.n), widths(layout.n), depths(layout.n);
    for (std::size_t k = 0; k < layout.n; ++k) {
      centers[k] = layout.center(p, k);
      widths[k] = layout.width(p, k);
      depths[k] = layout.depth(p, k);
    }
    const MatrixXd full = dip_model_jacobian(f, p(0), centers, widths, depths);
    const auto n = static_cast<Eigen::Index>(layout.n);
    MatrixXd jac = MatrixXd::Zero(m, static_cast<Eigen::Index>(layout.size()));
    jac.col(0) = full.col(0);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (layout.free_centers)
        jac.col(static_cast<Eigen::Index>(layout.center_offset()) + k) = full.col(1 + k);
      if (layout.free_width)
        jac.col(static_cast<Eigen::Index>(layout.width_offset()) + (layout.shared ? 0 : k)) +=
            full.col(1 + n + k);
      jac.col(static_cast<Eigen::Index>(layout.depth_offset()) + k) = full.col(1 + 2 * n + k);
    }
    return (weight.asDiagonal() * jac).eval();
  };

  DipFitResult out;
  out.fit = nls_fit(problem, init, opts.nls);
  const VectorXd& p = out.fit.params;
  const VectorXd sig = out.fit.sigmas();
  out.baseline = p(0);
  for (std::size_t k = 0; k < layout.n; ++k) {
    DipEstimate d;
    d.center = layout.center(p, k);
    d.fwhm = std::abs(layout.width(p, k));
    d.depth = layout.depth(p, k);
    d.depth_sigma = sig(static_cast<Eigen::Index>(layout.depth_offset() + k));
    d.center_sigma =
        layout.free_centers ? sig(static_cast<Eigen::Index>(layout.center_offset() + k)) : 0.0;
    out.dips.push_back(d);
  }
  std::sort(out.dips.begin(), out.dips.end(),
            [](const DipEstimate& a, const DipEstimate& b) { return a.center < b.center; });
  for (std::size_t k = 1; k < out.dips.size(); ++k)
    if (out.dips[k].center - out.dips[k - 1].center <
        std::max(out.dips[k].fwhm, out.dips[k - 1].fwhm))
      out.overlapping = true;
  return out;
}

MatrixXd dip_model_jacobian(const std::vector<double>& freqs, double baseline,
                            const std::vector<double>& centers, const std::vector<double>& widths,
                            const std::vector<double>& depths) {
  (void)baseline;
  const auto m = static_cast<Eigen::Index>(freqs.size());
  const auto n = static_cast<Eigen::Index>(centers.size());
  MatrixXd jac = MatrixXd::Zero(m, 1 + 3 * n);
  for (Eigen::Index i = 0; i < m; ++i) {
    jac(i, 0) = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const double w = widths[ku];
      const double d = depths[ku];
      const double x = 2.0 * (freqs[static_cast<std::size_t>(i)] - centers[ku]) / w;
      const double den = 1.0 + x * x;
      jac(i, 1 + k) = -d * 4.0 * x / (w * den * den);
      jac(i, 1 + n + k) = -d * 2.0 * x * x / (w * den * den);
      jac(i, 1 + 2 * n + k) = -1.0 / den;
    }
  }
  return jac;
}

double depth_sigma_per_unit_noise(const std::vector<double>& freqs,
                                  const std::vector<double>& centers, double fwhm,
                                  std::size_t index) {
  if (index >= centers.size()) throw Error(ErrorCode::Validation, "dip index out of range");
  const auto m = static_cast<Eigen::Index>(freqs.size());
  const auto n = static_cast<Eigen::Index>(centers.size() + 1);
  MatrixXd design(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t k = 0; k < centers.size(); ++k)
      design(i, static_cast<Eigen::Index>(k + 1)) =
          -odmr::lorentzian(freqs[static_cast<std::size_t>(i)], centers[k], fwhm);
  }
  const MatrixXd ata = design.transpose() * design;
  Eigen::LDLT<MatrixXd> ldlt(ata);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0))
    throw Error(ErrorCode::SingularSystem, "dip design matrix is singular");
  const MatrixXd cov = ldlt.solve(MatrixXd::Identity(n, n));
  return std::sqrt(cov(static_cast<Eigen::Index>(index + 1), static_cast<Eigen::Index>(index + 1)));
}

SweepDepths extract_sweep_depths(const odmr::SweepSeries& series,
                                 const std::vector<double>& init_centers,
                                 const DipFitOptions& opts) {
  if (series.points.empty()) throw Error(ErrorCode::Validation, "sweep is empty");
  if (init_centers.size() != 2)
    throw Error(ErrorCode::Validation, "sweep analysis expects two dips");

  // Averaging over the sweep keeps both lines visible whatever the psi set.
  const auto& first = series.points.front().spectrum;
  odmr::OdmrSpectrum mean = first;
  std::fill(mean.signal.begin(), mean.signal.end(), 0.0);
  for (const auto& pt : series.points) {
    if (pt.spectrum.frequencies != first.frequencies)
      throw Error(ErrorCode::Validation, "sweep spectra must share a frequency grid");
    for (std::size_t i = 0; i < mean.signal.size(); ++i) mean.signal[i] += pt.spectrum.signal[i];
  }
  const double k = static_cast<double>(series.points.size());
  for (double& s : mean.signal) s /= k;
  if (mean.counts) mean.counts->dwell_s *= k;

  DipFitOptions shape_opts = opts;
  shape_opts.fixed_centers.reset();
  shape_opts.fixed_fwhm.reset();
  shape_opts.shared_fwhm = true;
  const DipFitResult shape = fit_dips(mean, init_centers, shape_opts);

  SweepDepths out;
  out.center_lm = shape.dips[0].center;
  out.center_lp = shape.dips[1].center;
  out.fwhm = shape.dips[0].fwhm;

  DipFitOptions depth_opts = opts;
  depth_opts.fixed_centers = std::vector<double>{out.center_lm, out.center_lp};
  depth_opts.fixed_fwhm = out.fwhm;
  for (const auto& pt : series.points) {
    const DipFitResult r = fit_dips(pt.spectrum, *depth_opts.fixed_centers, depth_opts);
    out.points.push_back({pt.psi, r.dips[0].depth, r.dips[1].depth, r.dips[0].depth_sigma,
                          r.dips[1].depth_sigma});
  }
  return out;
}

// ---------------------------------------------------------------------------

double cos2_model(double psi, double a, double b, double psi0) {
  const double c = std::cos(psi - psi0);
  return a * c * c + b;
}

Eigen::RowVector3d cos2_gradient(double psi, double a, double b, double psi0) {
  (void)b;
  const double d = psi - psi0;
  const double c = std::cos(d);
  return {c * c, 1.0, a * std::sin(2.0 * d)};
}

Cos2Fit fit_cos2(const std::vector<double>& psis, const std::vector<double>& depths,
                 const std::vector<double>& sigmas, const NlsOptions& opts) {
  if (psis.size() != depths.size() || (!sigmas.empty() && sigmas.size() != psis.size()))
    throw Error(ErrorCode::Validation, "psi, depth and sigma lists differ in length");
  const std::set<double> distinct(psis.begin(), psis.end());
  if (distinct.size() < 4)
    throw Error(ErrorCode::Validation, "cos^2 fit needs at least 4 distinct psi values");
  if (!(*distinct.rbegin() - *distinct.begin() > kPi / 2))
    throw Error(ErrorCode::Validation, "psi values must span more than pi/2");

  const std::size_t m = psis.size();
  const bool weighted = !sigmas.empty();
  std::vector<double> w(m, 1.0);
  if (weighted) {
    for (std::size_t i = 0; i < m; ++i) {
      if (!(sigmas[i] > 0)) throw Error(ErrorCode::Validation, "depth sigmas must be > 0");
      w[i] = 1.0 / sigmas[i];
    }
  }

  // Coarse scan over psi0 with (a, b) solved linearly at each node.
  constexpr int kScan = 180;
  double best_chi2 = std::numeric_limits<double>::infinity();
  Eigen::Vector3d start{0.0, 0.0, 0.0};
  for (int s = 0; s < kScan; ++s) {
    const double psi0 = kPi * s / kScan;
    Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
    Eigen::Vector2d aty = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < m; ++i) {
      const double c = std::cos(psis[i] - psi0);
      const Eigen::Vector2d row{c * c * w[i], w[i]};
      ata += row * row.transpose();
      aty += row * depths[i] * w[i];
    }
    Eigen::LDLT<Eigen::Matrix2d> ldlt(ata);
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::Vector2d ab = ldlt.solve(aty);
    double chi2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = (cos2_model(psis[i], ab(0), ab(1), psi0) - depths[i]) * w[i];
      chi2 += r * r;
    }
    if (chi2 < best_chi2) {
      best_chi2 = chi2;
      start = {ab(0), ab(1), psi0};
    }
  }

  LeastSquaresProblem problem;
  problem.weighted = weighted;
  problem.residuals = [&](const VectorXd& p) {
    VectorXd r(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i)
      r(static_cast<Eigen::Index>(i)) = (cos2_model(psis[i], p(0), p(1), p(2)) - depths[i]) * w[i];
    return r;
  };
  problem.jacobian = [&](const VectorXd& p) {
    MatrixXd jac(static_cast<Eigen::Index>(m), 3);
    for (std::size_t i = 0; i < m; ++i) {
      jac.row(static_cast<Eigen::Index>(i)) = cos2_gradient(psis[i], p(0), p(1), p(2)) * w[i];
    }
    return jac;
  };

  Cos2Fit out;
  out.fit = nls_fit(problem, start, opts);
  double a = out.fit.params(0);
  double b = out.fit.params(1);
  double psi0 = out.fit.params(2);
  // a cos^2(x) == -a cos^2(x - pi/2) + a; keep the amplitude positive.
  if (a < 0) {
    b += a;
    a = -a;
    psi0 += kPi / 2;
  }
  psi0 = std::fmod(psi0, kPi);
  if (psi0 < 0) psi0 += kPi;
  if (psi0 >= kPi) psi0 -= kPi;

  const VectorXd sig = out.fit.sigmas();
  out.a = a;
  out.b = b;
  out.psi0 = psi0;
  out.sigma_a = sig(0);
  const MatrixXd& cov = out.fit.covariance;
  out.sigma_b = out.fit.params(0) < 0
                    ? std::sqrt(std::max(cov(0, 0) + cov(1, 1) + 2 * cov(0, 1), 0.0))
                    : sig(1);
  out.sigma_psi0 = sig(2);

  double mean = 0.0;
  for (double d : depths) mean += d;
  mean /= static_cast<double>(m);
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ss_tot += (depths[i] - mean) * (depths[i] - mean);
    const double r = cos2_model(psis[i], a, b, psi0) - depths[i];
    ss_res += r * r;
  }
  out.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);

  double scale = 0.0;
  for (double d : depths) scale = std::max(scale, std::abs(d));
  if (a <= 3.0 * out.sigma_a || a <= 1e-12 * scale) {
    std::ostringstream msg;
    msg << "cos^2 amplitude " << a << " is not significant (sigma " << out.sigma_a << ")";
    throw Error(ErrorCode::DegenerateAmplitude, msg.str());
  }
  return out;
}

}  // namespace nvmw::fit
