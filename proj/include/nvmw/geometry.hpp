#pragma once

// Lab-frame bookkeeping. X_L lies in the diamond surface perpendicular to the
// wire, Y_L runs along the wire and Z_L is the surface normal. Sensor
// positions are given in micrometres relative to the wire center.

#include <array>

#include <Eigen/Dense>

namespace nvmw::geometry {

using LabVector = Eigen::Vector3d;

struct WireScene {
  double sensor_x = 0.0;        // um
  double sensor_z = 0.0;        // um
  double current = 0.0;         // mA, positive = flow along +Y_L
  double wire_diameter = 25.0;  // um, only used for validation

  void validate() const;
  double radius() const;
};

/// Orthonormal pair spanning the plane perpendicular to an NV axis, with
/// e1 x e2 = nv_z.
struct TransverseBasis {
  LabVector nv_z;
  LabVector e1;
  LabVector e2;
};

/// The four <111> NV axes in the fixed order
/// [1,1,1], [1,-1,-1], [-1,1,-1], [-1,-1,1] (each divided by sqrt 3).
std::array<LabVector, 4> crystallographic_axes();

/// Axis `index` of crystallographic_axes(); throws for index outside 0..3.
LabVector nv_axis(int index);

/// Unit tangent of the circle around the wire through (x, 0, z).
LabVector wire_tangent(double x_um, double z_um);

/// Field direction at the sensor including the sign of the current.
LabVector wire_field_direction(const WireScene& scene);

/// Infinite straight wire: B = mu0 I / (2 pi r) = 0.2 |I| / r (mA, um -> mT).
double wire_field_magnitude(const WireScene& scene);

/// Angle of the wire tangent from +Z_L toward +X_L, degrees in [0, 360).
double alpha_of_position(double x_um, double z_um);

TransverseBasis transverse_basis(const LabVector& nv_z);

LabVector sweep_direction(const TransverseBasis& basis, double psi);

/// Angle between two nonzero vectors, degrees in [0, 180].
double angle_between(const LabVector& u, const LabVector& v);

/// Angle between the lines spanned by u and v, degrees in [0, 90].
double axis_angle_between(const LabVector& u, const LabVector& v);

/// Wraps degrees into [0, 360).
double wrap_degrees(double deg);

}  // namespace nvmw::geometry
