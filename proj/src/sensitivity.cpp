#include "nvmw/sensitivity.hpp"

#include <cmath>
#include <numbers>

#include "nvmw/error.hpp"

namespace nvmw::sensitivity {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::Validation, what);
}

}  // namespace

void SensitivityInput::validate() const {
  require(std::isfinite(phi), "phi must be finite");
  require(sigma_rel > 0 && std::isfinite(sigma_rel), "sigma_rel must be > 0");
  require(n >= 1 && std::isfinite(n), "repetition count must be >= 1");
  require(t > 0 && std::isfinite(t), "sensing time must be > 0");
}

double signal_ratio(double i1, double i2) {
  require(i1 >= 0, "I1 must be >= 0");
  if (!(i2 > 0)) throw Error(ErrorCode::InconsistentInput, "I2 must be > 0 for the ratio");
  return i1 / i2;
}

double phi_from_ratio(double s) {
  require(s >= 0 && std::isfinite(s), "ratio must be finite and >= 0");
  return std::atan(std::sqrt(s));
}

double ratio_sigma(double phi, double sigma_rel) {
  const double t = std::tan(phi);
  return std::numbers::sqrt2 * t * t * sigma_rel;
}

double eta(const SensitivityInput& input) {
  input.validate();
  return std::sin(2.0 * input.phi) / (2.0 * std::numbers::sqrt2) * input.sigma_rel *
         std::sqrt(input.n * input.t);
}

double eta_max(double sigma_rel, double n_t) {
  return eta({std::numbers::pi / 4, sigma_rel, 1.0, n_t});
}

double shot_noise_sigma_rel(double rate_kcps, double contrast, double t_s) {
  require(rate_kcps > 0 && std::isfinite(rate_kcps), "count rate must be > 0");
  require(contrast > 0 && contrast <= 1, "contrast must lie in (0, 1]");
  require(t_s > 0 && std::isfinite(t_s), "time must be > 0");
  return 1.0 / (contrast * std::sqrt(rate_kcps * 1000.0 * t_s));
}

}  // namespace nvmw::sensitivity
