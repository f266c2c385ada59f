#include "nvmw/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nvmw/error.hpp"

namespace nvmw::geometry {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

void WireScene::validate() const {
  if (!std::isfinite(sensor_x) || !std::isfinite(sensor_z) || !std::isfinite(current) ||
      !std::isfinite(wire_diameter) || wire_diameter < 0)
    throw Error(ErrorCode::Validation, "wire scene has non-finite or negative fields");
  if (sensor_x == 0.0 && sensor_z == 0.0)
    throw Error(ErrorCode::DegeneratePosition, "sensor sits at the wire center");
  if (radius() <= wire_diameter / 2)
    throw Error(ErrorCode::Validation, "sensor lies inside the wire");
}

double WireScene::radius() const { return std::hypot(sensor_x, sensor_z); }

std::array<LabVector, 4> crystallographic_axes() {
  const double s = 1.0 / std::numbers::sqrt3;
  return {LabVector{s, s, s}, LabVector{s, -s, -s}, LabVector{-s, s, -s},
          LabVector{-s, -s, s}};
}

LabVector nv_axis(int index) {
  if (index < 0 || index > 3)
    throw Error(ErrorCode::Validation, "NV orientation index must be in 0..3");
  return crystallographic_axes()[static_cast<std::size_t>(index)];
}

LabVector wire_tangent(double x_um, double z_um) {
  const double r = std::hypot(x_um, z_um);
  if (!(r > 0) || !std::isfinite(r))
    throw Error(ErrorCode::DegeneratePosition, "tangent undefined at the wire center");
  return LabVector{z_um / r, 0.0, -x_um / r};
}

LabVector wire_field_direction(const WireScene& scene) {
  scene.validate();
  const LabVector t = wire_tangent(scene.sensor_x, scene.sensor_z);
  return scene.current < 0 ? LabVector(-t) : t;
}

double wire_field_magnitude(const WireScene& scene) {
  scene.validate();
  return 0.2 * std::abs(scene.current) / scene.radius();
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

double alpha_of_position(double x_um, double z_um) {
  const LabVector m = wire_tangent(x_um, z_um);
  return wrap_degrees(std::atan2(m.x(), m.z()) * kRadToDeg);
}

TransverseBasis transverse_basis(const LabVector& nv_z) {
  if (std::abs(nv_z.norm() - 1.0) > 1e-9)
    throw Error(ErrorCode::Validation, "NV axis must be a unit vector");
  const LabVector x_l = LabVector::UnitX();
  LabVector e1 = x_l - x_l.dot(nv_z) * nv_z;
  if (e1.norm() < 1e-6) {
    const LabVector y_l = LabVector::UnitY();
    e1 = y_l - y_l.dot(nv_z) * nv_z;
  }
  e1.normalize();
  const LabVector e2 = nv_z.cross(e1);
  return {nv_z, e1, e2};
}

LabVector sweep_direction(const TransverseBasis& basis, double psi) {
  return std::cos(psi) * basis.e1 + std::sin(psi) * basis.e2;
}

double angle_between(const LabVector& u, const LabVector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0) || !(nv > 0))
    throw Error(ErrorCode::ZeroVector, "angle with a zero vector is undefined");
  const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

double axis_angle_between(const LabVector& u, const LabVector& v) {
  const double a = angle_between(u, v);
  return std::min(a, 180.0 - a);
}

}  // namespace nvmw::geometry
