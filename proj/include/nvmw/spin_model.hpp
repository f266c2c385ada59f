#pragma once

// Ground-state spin physics of a single NV orientation.
//
// All matrices use the basis order {|+1>, |0>, |-1>} and frequency units
// (MHz). Magnetic fields are in mT.

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nvmw::spin {

using Matrix3c = Eigen::Matrix3cd;
using Vector3c = Eigen::Vector3cd;

struct SpinConstants {
  double zero_field_splitting = 2870.0;  // D, MHz
  double gamma_e = 28.02495;             // MHz per mT

  void validate() const;
};

/// Static bias field expressed in the NV frame (Z along the NV axis).
struct StaticFieldNV {
  double magnitude = 0.0;  // mT
  double theta = 0.0;      // polar angle from NV Z, rad
  double phi = 0.0;        // azimuth in the NV transverse plane, rad

  void validate() const;
};

/// Linearly polarized microwave field in the NV frame.
struct MwFieldNV {
  double amplitude = 0.0;           // mT
  double zeta = 0.0;                // angle from NV Z, rad
  double transverse_azimuth = 0.0;  // azimuth of the transverse part, rad

  void validate() const;
  Eigen::Vector3d direction() const;
};

/// Spin-1 operators in the {|+1>, |0>, |-1>} basis.
const Matrix3c& spin_x();
const Matrix3c& spin_y();
const Matrix3c& spin_z();

/// n.S for a real direction n given in the NV frame.
Matrix3c spin_along(const Eigen::Vector3d& n);

struct SpinHamiltonian {
  Matrix3c matrix;
};

SpinHamiltonian ground_hamiltonian(const SpinConstants& consts,
                                   const StaticFieldNV& field);

enum class Level { L0 = 0, Lm = 1, Lp = 2 };

struct EnergyLevel {
  double energy = 0.0;  // MHz
  Vector3c state;
};

struct Transition {
  Level lower = Level::L0;
  Level upper = Level::Lm;
  double frequency = 0.0;  // MHz
  /// <lower| S_k |upper> for k = x, y, z.
  std::array<std::complex<double>, 3> dipole{};
};

/// Labeled eigen-decomposition. `levels` is indexed by `Level`.
struct EigenSystem {
  std::array<EnergyLevel, 3> levels;
  Transition to_minus;  // L0 <-> Lm
  Transition to_plus;   // L0 <-> Lp

  const EnergyLevel& level(Level l) const {
    return levels[static_cast<int>(l)];
  }
};

/// Raw Hermitian eigen-decomposition by cyclic complex Jacobi rotations.
/// Eigenvalues ascending; columns of `vectors` are the matching eigenvectors.
struct HermitianEigen {
  Eigen::Vector3d values;
  Matrix3c vectors;
  int sweeps = 0;
};
HermitianEigen jacobi_eigen(const Matrix3c& h);

EigenSystem eigensystem(const SpinHamiltonian& h);

struct RabiAmplitudes {
  double zero_minus = 0.0;  // Omega(L0 <-> Lm), MHz
  double zero_plus = 0.0;   // Omega(L0 <-> Lp), MHz
  double minus_plus = 0.0;  // Omega(Lm <-> Lp), MHz
};

/// Omega_ij = gamma_e * B_mw * |<i| n.S |j>| (no rotating-wave factor).
RabiAmplitudes rabi_amplitudes(const EigenSystem& eig,
                               const SpinConstants& consts,
                               const MwFieldNV& mw);

struct TransitionLine {
  std::string label;
  double frequency = 0.0;  // MHz
  double rabi = 0.0;       // MHz
};

/// The two allowed ODMR lines: "L0-Lm" then "L0-Lp".
std::vector<TransitionLine> transition_table(const SpinConstants& consts,
                                             const StaticFieldNV& field,
                                             const MwFieldNV& mw);

}  // namespace nvmw::spin
