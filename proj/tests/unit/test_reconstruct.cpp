#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nvmw/error.hpp"
#include "nvmw/reconstruct.hpp"
#include "nvmw/rng.hpp"

using namespace nvmw;
using namespace nvmw::reconstruct;

namespace {

constexpr double kPi = std::numbers::pi;

PipelineConfig base_config(int psi_count = 18) {
  PipelineConfig cfg;
  cfg.grid = odmr::FrequencyGrid{}.points();
  cfg.psis = uniform_psis(psi_count);
  return cfg;
}

double line_angle_deg(const LabVector& a, const LabVector& b) {
  return geometry::axis_angle_between(a, b);
}

}  // namespace

TEST_CASE("extract_nv_y from a noiseless sweep") {
  const auto cfg = base_config(36);
  const int nv = 3;
  const auto b = geometry::transverse_basis(geometry::nv_axis(nv));

  SUBCASE("perpendicular to the MW transverse projection") {
    const LabVector mw = std::cos(0.7) * b.e1 + std::sin(0.7) * b.e2 + 0.2 * b.nv_z;
    const auto s = analyze_orientation(cfg, nv, {mw, 0.05}, 0);
    const LabVector proj = std::cos(0.7) * b.e1 + std::sin(0.7) * b.e2;
    CHECK(std::abs(line_angle_deg(s.nv_y.axis, proj) - 90.0) < 0.05);
    CHECK(std::abs(s.nv_y.axis.dot(b.nv_z)) < 1e-9);
    CHECK(std::abs(s.nv_y.axis.norm() - 1.0) < 1e-12);
    CHECK(s.nv_y.source_nv == nv);
    CHECK(s.dwell_s == 0.0);
  }
  SUBCASE("MW in the nv_z / e1 plane gives +-e2") {
    const auto s = analyze_orientation(cfg, nv, {b.e1 + 0.5 * b.nv_z, 0.05}, 0);
    CHECK(line_angle_deg(s.nv_y.axis, b.e2) < 0.05);
  }
  SUBCASE("invariant under amplitude and contrast rescaling") {
    const LabVector mw = std::cos(2.2) * b.e1 + std::sin(2.2) * b.e2 - 0.4 * b.nv_z;
    const auto ref = analyze_orientation(cfg, nv, {mw, 0.05}, 0);
    const auto twice = analyze_orientation(cfg, nv, {mw, 0.1}, 0);
    auto low = cfg;
    low.shape.contrast_ref = 0.005;
    const auto dim = analyze_orientation(low, nv, {mw, 0.05}, 0);
    CHECK(line_angle_deg(ref.nv_y.axis, twice.nv_y.axis) < 1e-3);
    CHECK(line_angle_deg(ref.nv_y.axis, dim.nv_y.axis) < 1e-3);
  }
  SUBCASE("degenerate fit is rejected") {
    fit::Cos2Fit c;
    c.a = 1e-6;
    c.sigma_a = 1e-6;
    CHECK_THROWS_AS(extract_nv_y(b, c), Error);
  }
}

TEST_CASE("NV_Y axis is perpendicular to the NV axis for random MW directions") {
  const auto cfg = base_config(12);
  std::mt19937_64 gen(31);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 20; ++t) {
    const int nv = t % 4;
    LabVector mw{n(gen), n(gen), n(gen)};
    const auto b = geometry::transverse_basis(geometry::nv_axis(nv));
    // Keep a usable transverse component.
    if ((mw - mw.dot(b.nv_z) * b.nv_z).norm() < 0.3 * mw.norm()) continue;
    const auto s = analyze_orientation(cfg, nv, {mw, 0.05}, 0);
    REQUIRE(std::abs(s.nv_y.axis.dot(b.nv_z)) < 1e-9);
    const LabVector proj = mw - mw.dot(b.nv_z) * b.nv_z;
    REQUIRE(std::abs(line_angle_deg(s.nv_y.axis, proj) - 90.0) < 0.05);
  }
}

TEST_CASE("mw_axis_from_two") {
  const NvYEstimate y1{LabVector(-0.86, 0.42, -0.29), 0.0, 3};
  const NvYEstimate y2{LabVector(0.85, 0.46, 0.25), 0.0, 1};
  const auto m = mw_axis_from_two(y1, y2);
  const LabVector expected(0.302, -0.040, -0.953);
  const LabVector rep = representative_near(m.axis, expected);
  CHECK((rep - expected).cwiseAbs().maxCoeff() < 0.01);
  CHECK(m.sign_ambiguous);
  CHECK(std::abs(m.axis.norm() - 1.0) < 1e-12);
  CHECK(std::abs(m.axis.dot(y1.axis)) < 1e-12);
  CHECK(std::abs(m.axis.dot(y2.axis)) < 1e-12);
  CHECK(geometry::axis_angle_between(m.axis, geometry::wire_tangent(61, 18)) ==
        doctest::Approx(2.552).epsilon(1e-3));

  for (double s1 : {1.0, -1.0})
    for (double s2 : {1.0, -1.0}) {
      const auto f = mw_axis_from_two({s1 * y1.axis, 0, 3}, {s2 * y2.axis, 0, 1});
      REQUIRE(line_angle_deg(f.axis, m.axis) < 1e-12);
    }
  CHECK(line_angle_deg(mw_axis_from_two(y2, y1).axis, m.axis) < 1e-12);

  try {
    mw_axis_from_two(y1, y1);
    FAIL("expected NearParallel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NearParallel);
  }
  CHECK(representative_near(LabVector(1, 0, 0), LabVector(-1, 0.1, 0)) == LabVector(-1, 0, 0));
}

TEST_CASE("planar inversion") {
  const LabVector nv = geometry::nv_axis(3);

  SUBCASE("reference row") {
    const auto a = planar_alpha(planar_forward(160.9, nv), nv);
    CHECK(a.alpha_deg == doctest::Approx(160.9).epsilon(1e-8));
    CHECK(a.partner_deg == doctest::Approx(340.9).epsilon(1e-8));
    CHECK(a.residual_deg < 1e-6);
    CHECK(a.nearest(330.0) == doctest::Approx(340.9));
    CHECK(a.nearest(150.0) == doctest::Approx(160.9));
    CHECK(a.error_to(341.0) == doctest::Approx(0.1));
  }
  SUBCASE("Z_L field") {
    const auto a = planar_alpha(nv.cross(LabVector::UnitZ()).normalized(), nv);
    CHECK((a.alpha_deg < 1e-6 || 180.0 - a.alpha_deg < 1e-6));
  }
  SUBCASE("wire-model axes at the reference positions") {
    const double rows[][3] = {{47.7, 16.5, 160.9}, {47.0, 18.5, 158.5}, {46.3, 20.0, 156.6},
                              {45.5, 22.0, 154.2}, {44.0, 25.0, 150.4}, {43.0, 26.6, 148.3},
                              {38.6, 32.5, 139.9}, {38.5, 26.7, 145.3}};
    for (const auto& r : rows) {
      const LabVector u = nv.cross(geometry::wire_tangent(r[0], r[1])).normalized();
      REQUIRE(planar_alpha(u, nv).error_to(r[2]) <= 0.05);
    }
    const LabVector u8 = nv.cross(geometry::wire_tangent(36.9, 34.5)).normalized();
    CHECK(planar_alpha(u8, nv).alpha_deg == doctest::Approx(136.92518370832315).epsilon(1e-9));
  }
  SUBCASE("forward-inverse identity on a 0.1 degree grid") {
    double worst = 0.0;
    for (int i = 0; i < 3600; ++i) {
      const double alpha = 0.1 * i;
      const LabVector u = planar_forward(alpha, nv);
      const auto a = planar_alpha((i % 2 ? -1.0 : 1.0) * u, nv);
      worst = std::max(worst, a.error_to(alpha));
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("other NV orientations") {
    for (int k = 0; k < 4; ++k)
      for (double alpha : {12.3, 77.7, 123.4})
        REQUIRE(planar_alpha(planar_forward(alpha, geometry::nv_axis(k)), geometry::nv_axis(k))
                    .error_to(alpha) < 1e-6);
  }
  SUBCASE("errors") {
    const auto b = geometry::transverse_basis(nv);
    const LabVector u = planar_forward(40.0, nv);
    CHECK(planar_alpha((u + std::tan(0.5 * kPi / 180) * b.nv_z).normalized(), nv).residual_deg ==
          doctest::Approx(0.5));
    try {
      planar_alpha(u + std::tan(2.0 * kPi / 180) * b.nv_z, nv);
      FAIL("expected PoorFit");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::PoorFit);
    }
    CHECK_THROWS_AS(planar_alpha(nv, nv), Error);
    CHECK_THROWS_AS(planar_alpha(LabVector::Zero(), nv), Error);
  }
}

TEST_CASE("planar model covers the transverse plane for this NV axis") {
  // Every transverse direction is some nv_z x m(alpha); only tilted inputs
  // can leave a residual.
  const LabVector nv = geometry::nv_axis(3);
  const auto b = geometry::transverse_basis(nv);
  for (int i = 0; i < 180; ++i) {
    const LabVector u = std::cos(i * kPi / 180) * b.e1 + std::sin(i * kPi / 180) * b.e2;
    REQUIRE(planar_alpha(u, nv).residual_deg < 1e-6);
  }
}

TEST_CASE("closed-form oracle") {
  const LabVector nv = geometry::nv_axis(3);
  SUBCASE("the Y_L-numerator ratio is sin 2 alpha") {
    for (int i = 0; i < 720; ++i) {
      const double a = 0.5 * i * kPi / 180;
      REQUIRE(closed_form_ratio(planar_forward(0.5 * i, nv)) ==
              doctest::Approx(std::sin(2 * a)).epsilon(1e-12));
    }
  }
  SUBCASE("alpha = 135") {
    const LabVector u(std::sqrt(0.5), 0.0, std::sqrt(0.5));
    CHECK(closed_form_ratio(u) == doctest::Approx(-1.0));
    CHECK(closed_form_alpha_check(u) == doctest::Approx(135.0));
    CHECK(std::fmod(closed_form_alpha_check(-u), 180.0) == doctest::Approx(135.0));
  }
  SUBCASE("alpha = 160.9") {
    const LabVector u = planar_forward(160.9, nv);
    CHECK(std::abs(closed_form_ratio(u) - std::sin(321.8 * kPi / 180)) < 1e-9);
    CHECK(closed_form_ratio(u) == doctest::Approx(-0.618).epsilon(1e-3));
  }
  SUBCASE("agrees with the numeric inversion") {
    double worst = 0.0;
    for (int i = 0; i < 3600; ++i) {
      const double alpha = 0.1 * i;
      const LabVector u = planar_forward(alpha, nv);
      const double cf = closed_form_alpha_check(u);
      const double num = planar_alpha(u, nv).nearest(cf);
      double d = std::abs(cf - num);
      d = std::min(d, 360.0 - d);
      worst = std::max(worst, d);
      REQUIRE(std::min(std::abs(cf - alpha), 360.0 - std::abs(cf - alpha)) < 1e-6);
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("inconsistent input") {
    try {
      closed_form_alpha_check(LabVector(0, 1, 0.01));
      FAIL("expected InconsistentInput");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InconsistentInput);
    }
  }
}

TEST_CASE("noise calibration hits the requested depth error") {
  auto cfg = base_config();
  const int nv = 3;
  const auto b = geometry::transverse_basis(geometry::nv_axis(nv));
  const auto mw = wire_microwave({46.3, 20.0, 10.0, 25.0});
  const double dwell = calibrate_dwell(cfg, b, mw, 200.0, 0.08);
  CHECK(dwell > 0.0);

  const auto nvf = odmr::to_nv_frame(b, mw);
  const spin::StaticFieldNV field{cfg.bias_mt, kPi / 2,
                                  std::fmod(nvf.transverse_azimuth + kPi / 4 + 2 * kPi, 2 * kPi)};
  const auto clean = odmr::simulate_spectrum(cfg.consts, field, nvf, cfg.shape, cfg.grid);
  const auto lines = spin::transition_table(cfg.consts, field, nvf);
  fit::DipFitOptions o;
  o.fixed_centers = std::vector<double>{lines[0].frequency, lines[1].frequency};
  o.fixed_fwhm = cfg.shape.fwhm;
  double s1 = 0, s2 = 0;
  const int n = 400;
  for (int k = 0; k < n; ++k) {
    const auto r = fit::fit_dips(odmr::add_shot_noise(clean, 200.0, dwell, rng::sub_seed(77, k)),
                                 *o.fixed_centers, o);
    s1 += r.dips[1].depth, s2 += r.dips[1].depth * r.dips[1].depth;
  }
  const double mean = s1 / n;
  CHECK(std::sqrt(s2 / n - mean * mean) / mean == doctest::Approx(0.08).epsilon(0.1));

  // Halving the target quadruples the dwell.
  CHECK(calibrate_dwell(cfg, b, mw, 200.0, 0.04) == doctest::Approx(4 * dwell));
}

TEST_CASE("end-to-end planar") {
  const auto cfg = base_config();
  const geometry::WireScene scene{46.3, 20.0, 10.0, 25.0};
  const auto r = end_to_end_planar(scene, 3, cfg, 0);
  CHECK(r.error_deg < 0.1);
  CHECK(r.alpha.error_to(156.6) < 0.1);
  CHECK(r.alpha_truth_deg == doctest::Approx(geometry::alpha_of_position(46.3, 20.0)));
  CHECK(r.x_um == 46.3);

  auto strong = scene;
  strong.current *= 2.0;
  CHECK(std::abs(end_to_end_planar(strong, 3, cfg, 0).alpha.alpha_deg - r.alpha.alpha_deg) < 0.01);

  auto noisy = cfg;
  noisy.noise = NoiseConfig{200.0, std::nullopt, 0.08, 1};
  const auto a = end_to_end_planar(scene, 3, noisy, 5);
  const auto b = end_to_end_planar(scene, 3, noisy, 5);
  CHECK(a.alpha.alpha_deg == b.alpha.alpha_deg);
  CHECK(a.error_deg < 5.0);
  CHECK(a.sweep.dwell_s > 0.0);
}

TEST_CASE("batch planar is order-preserving and thread-count independent") {
  auto cfg = base_config(12);
  cfg.noise = NoiseConfig{200.0, std::nullopt, 0.08, 0};
  std::vector<geometry::WireScene> scenes;
  for (const auto& [x, z] : std::vector<std::pair<double, double>>{
           {47.7, 16.5}, {44.0, 25.0}, {38.6, 32.5}, {30.0, 40.0}, {60.0, 10.0}})
    scenes.push_back({x, z, 10.0, 25.0});
  const auto serial = batch_planar(scenes, 3, cfg, 99, 1);
  const auto par = batch_planar(scenes, 3, cfg, 99, 4);
  REQUIRE(serial.size() == scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(serial[i].x_um == scenes[i].sensor_x);
    CHECK(serial[i].alpha.alpha_deg == par[i].alpha.alpha_deg);
    CHECK(serial[i].error_deg == par[i].error_deg);
  }
  CHECK(end_to_end_planar(scenes[2], 3, cfg, rng::sub_seed(99, 2)).alpha.alpha_deg ==
        serial[2].alpha.alpha_deg);
}

TEST_CASE("end-to-end 3d") {
  const auto cfg = base_config();
  const geometry::WireScene scene{61.0, 18.0, 10.0, 25.0};
  const auto r = end_to_end_3d(scene, {3, 1}, cfg, 0);
  REQUIRE(r.axis.angular_error_deg.has_value());
  CHECK(*r.axis.angular_error_deg < 0.05);
  CHECK(r.axis.axis.dot(r.truth) > 0);
  CHECK(std::abs(r.axis.axis.dot(r.sweeps[0].nv_y.axis)) < 1e-12);
  CHECK(std::abs(r.axis.axis.dot(r.sweeps[1].nv_y.axis)) < 1e-12);
  CHECK_THROWS_AS(end_to_end_3d(scene, {3, 3}, cfg, 0), Error);
}

TEST_CASE("pipeline configuration") {
  CHECK(uniform_psis(4) == std::vector<double>{0.0, kPi / 4, kPi / 2, 3 * kPi / 4});
  CHECK_THROWS_AS(uniform_psis(0), Error);
  auto cfg = base_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.noise = NoiseConfig{};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.noise->dwell_s = 1.0;
  cfg.noise->target_sigma_rel = 0.08;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.noise->target_sigma_rel.reset();
  CHECK_NOTHROW(cfg.validate());
  cfg.bias_mt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
