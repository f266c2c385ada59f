#include "nvmw/spin_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nvmw/error.hpp"

namespace nvmw {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation: return "validation";
    case ErrorCode::LabelingAmbiguous: return "labeling-ambiguous";
    case ErrorCode::DegeneratePosition: return "degenerate-position";
    case ErrorCode::ZeroVector: return "zero-vector";
    case ErrorCode::EmptyGrid: return "empty-grid";
    case ErrorCode::ContrastOverflow: return "contrast-overflow";
    case ErrorCode::SingularSystem: return "singular-system";
    case ErrorCode::DegenerateAmplitude: return "degenerate-amplitude";
    case ErrorCode::NearParallel: return "near-parallel";
    case ErrorCode::PoorFit: return "poor-fit";
    case ErrorCode::InconsistentInput: return "inconsistent-input";
  }
  return "unknown";
}

}  // namespace nvmw

namespace nvmw::spin {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::Validation, what);
}

Matrix3c make_sx() {
  const double r = 1.0 / std::numbers::sqrt2;
  Matrix3c m = Matrix3c::Zero();
  m(0, 1) = m(1, 0) = m(1, 2) = m(2, 1) = r;
  return m;
}

Matrix3c make_sy() {
  const double r = 1.0 / std::numbers::sqrt2;
  Matrix3c m = Matrix3c::Zero();
  m(0, 1) = cd(0, -r);
  m(1, 0) = cd(0, r);
  m(1, 2) = cd(0, -r);
  m(2, 1) = cd(0, r);
  return m;
}

Matrix3c make_sz() {
  Matrix3c m = Matrix3c::Zero();
  m(0, 0) = 1.0;
  m(2, 2) = -1.0;
  return m;
}

double off_diagonal_norm2(const Matrix3c& a) {
  return std::norm(a(0, 1)) + std::norm(a(0, 2)) + std::norm(a(1, 2));
}

// Rotates the global phase so that the largest component is real positive.
void fix_phase(Vector3c& v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  const double mag = std::abs(v(k));
  if (mag > 0) v *= std::conj(v(k)) / mag;
}

Transition make_transition(const std::array<EnergyLevel, 3>& levels, Level lower,
                           Level upper) {
  const auto& lo = levels[static_cast<int>(lower)];
  const auto& up = levels[static_cast<int>(upper)];
  Transition t;
  t.lower = lower;
  t.upper = upper;
  t.frequency = up.energy - lo.energy;
  t.dipole[0] = lo.state.dot(spin_x() * up.state);
  t.dipole[1] = lo.state.dot(spin_y() * up.state);
  t.dipole[2] = lo.state.dot(spin_z() * up.state);
  return t;
}

double coupling(const Vector3c& bra, const Vector3c& ket, const Matrix3c& op) {
  return std::abs(bra.dot(op * ket));
}

}  // namespace

void SpinConstants::validate() const {
  require(std::isfinite(zero_field_splitting) && zero_field_splitting > 0,
          "zero-field splitting D must be positive");
  require(std::isfinite(gamma_e) && gamma_e > 0,
          "gyromagnetic ratio must be positive");
}

void StaticFieldNV::validate() const {
  require(std::isfinite(magnitude) && magnitude >= 0,
          "static field magnitude must be >= 0");
  require(std::isfinite(theta) && theta >= 0 && theta <= kPi,
          "static field theta must lie in [0, pi]");
  require(std::isfinite(phi) && phi >= 0 && phi < 2 * kPi,
          "static field phi must lie in [0, 2pi)");
}

void MwFieldNV::validate() const {
  require(std::isfinite(amplitude) && amplitude >= 0,
          "microwave amplitude must be >= 0");
  require(std::isfinite(zeta) && zeta >= 0 && zeta <= kPi,
          "microwave zeta must lie in [0, pi]");
  require(std::isfinite(transverse_azimuth), "microwave azimuth must be finite");
}

Eigen::Vector3d MwFieldNV::direction() const {
  return {std::sin(zeta) * std::cos(transverse_azimuth),
          std::sin(zeta) * std::sin(transverse_azimuth), std::cos(zeta)};
}

const Matrix3c& spin_x() {
  static const Matrix3c m = make_sx();
  return m;
}

const Matrix3c& spin_y() {
  static const Matrix3c m = make_sy();
  return m;
}

const Matrix3c& spin_z() {
  static const Matrix3c m = make_sz();
  return m;
}

Matrix3c spin_along(const Eigen::Vector3d& n) {
  return n.x() * spin_x() + n.y() * spin_y() + n.z() * spin_z();
}

SpinHamiltonian ground_hamiltonian(const SpinConstants& consts,
                                   const StaticFieldNV& field) {
  consts.validate();
  field.validate();
  const Eigen::Vector3d n{std::sin(field.theta) * std::cos(field.phi),
                          std::sin(field.theta) * std::sin(field.phi),
                          std::cos(field.theta)};
  const Matrix3c& sz = spin_z();
  Matrix3c h = consts.zero_field_splitting * (sz * sz) +
               consts.gamma_e * field.magnitude * spin_along(n);
  return {h};
}

HermitianEigen jacobi_eigen(const Matrix3c& h) {
  Matrix3c a = 0.5 * (h + h.adjoint());
  Matrix3c v = Matrix3c::Identity();
  const double scale2 = std::max(a.squaredNorm(), 1e-300);

  int sweep = 0;
  for (; sweep < 50 && off_diagonal_norm2(a) > 1e-32 * scale2; ++sweep) {
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double r = std::abs(a(p, q));
        if (r <= 1e-300) continue;

        // Phase step makes a(p,q) real, then a real Jacobi rotation zeroes it.
        Matrix3c u = Matrix3c::Identity();
        const cd phase = std::conj(a(p, q)) / r;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * r);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        u(p, p) = c;
        u(p, q) = s;
        u(q, p) = -s * phase;
        u(q, q) = c * phase;

        a = u.adjoint() * a * u;
        a(p, q) = a(q, p) = 0.0;
        v = v * u;
      }
    }
  }

  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    return a(i, i).real() < a(j, j).real();
  });
  HermitianEigen out;
  out.sweeps = sweep;
  for (int k = 0; k < 3; ++k) {
    out.values(k) = a(order[k], order[k]).real();
    Vector3c col = v.col(order[k]);
    col.normalize();
    fix_phase(col);
    out.vectors.col(k) = col;
  }
  return out;
}

EigenSystem eigensystem(const SpinHamiltonian& h) {
  const HermitianEigen raw = jacobi_eigen(h.matrix);

  int zero_like = 0;
  double best = -1.0;
  for (int k = 0; k < 3; ++k) {
    const double overlap = std::norm(raw.vectors(1, k));
    if (overlap > best) {
      best = overlap;
      zero_like = k;
    }
  }
  if (best <= 0.5) {
    std::ostringstream msg;
    msg << "no eigenvector has |<0|psi>|^2 > 0.5 (best " << best << ")";
    throw Error(ErrorCode::LabelingAmbiguous, msg.str());
  }

  // values are ascending, so the two remaining indices are already ordered.
  std::array<int, 2> rest{};
  int n = 0;
  for (int k = 0; k < 3; ++k)
    if (k != zero_like) rest[n++] = k;

  EigenSystem eig;
  eig.levels[0] = {raw.values(zero_like), raw.vectors.col(zero_like)};
  eig.levels[1] = {raw.values(rest[0]), raw.vectors.col(rest[0])};
  eig.levels[2] = {raw.values(rest[1]), raw.vectors.col(rest[1])};
  eig.to_minus = make_transition(eig.levels, Level::L0, Level::Lm);
  eig.to_plus = make_transition(eig.levels, Level::L0, Level::Lp);
  return eig;
}

RabiAmplitudes rabi_amplitudes(const EigenSystem& eig, const SpinConstants& consts,
                               const MwFieldNV& mw) {
  consts.validate();
  mw.validate();
  const Matrix3c op = spin_along(mw.direction());
  const double scale = consts.gamma_e * mw.amplitude;
  const auto& l0 = eig.level(Level::L0).state;
  const auto& lm = eig.level(Level::Lm).state;
  const auto& lp = eig.level(Level::Lp).state;
  return {scale * coupling(l0, lm, op), scale * coupling(l0, lp, op),
          scale * coupling(lm, lp, op)};
}

std::vector<TransitionLine> transition_table(const SpinConstants& consts,
                                             const StaticFieldNV& field,
                                             const MwFieldNV& mw) {
  const EigenSystem eig = eigensystem(ground_hamiltonian(consts, field));
  const RabiAmplitudes rabi = rabi_amplitudes(eig, consts, mw);
  return {{"L0-Lm", eig.to_minus.frequency, rabi.zero_minus},
          {"L0-Lp", eig.to_plus.frequency, rabi.zero_plus}};
}

}  // namespace nvmw::spin
