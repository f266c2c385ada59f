#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nvmw/error.hpp"
#include "nvmw/spin_model.hpp"

using namespace nvmw::spin;
using nvmw::Error;
using nvmw::ErrorCode;

namespace {

constexpr double kPi = std::numbers::pi;
const SpinConstants kConsts{};

// Independent oracle for transverse fields at phi = 0: |-> = (|-1> - |+1>)/sqrt2
// decouples at energy D, while |0> and |+> form a 2x2 block with coupling
// gamma*B.
struct TransverseOracle {
  double f_minus;
  double f_plus;
};
TransverseOracle transverse_oracle(double b_mt) {
  const double d = kConsts.zero_field_splitting;
  const double g = kConsts.gamma_e * b_mt;
  const double root = std::sqrt(d * d / 4 + g * g);
  return {d / 2 + root, 2 * root};
}

Vector3c minus_state() {
  const double r = 1 / std::numbers::sqrt2;
  return Vector3c(-r, 0, r);
}

Vector3c plus_state() {
  const double r = 1 / std::numbers::sqrt2;
  return Vector3c(r, 0, r);
}

}  // namespace

TEST_CASE("zero field Hamiltonian is diag(D, 0, D)") {
  const auto h = ground_hamiltonian(kConsts, {0.0, 0.0, 0.0}).matrix;
  Matrix3c expected = Matrix3c::Zero();
  expected(0, 0) = 2870.0;
  expected(2, 2) = 2870.0;
  CHECK((h - expected).norm() == doctest::Approx(0.0));
}

TEST_CASE("transverse field couples |0> to |+-1> by gamma B / sqrt 2") {
  const auto h = ground_hamiltonian(kConsts, {10.2, kPi / 2, 0.0}).matrix;
  const double expected = 28.02495 * 10.2 / std::numbers::sqrt2;
  CHECK(expected == doctest::Approx(202.1).epsilon(1e-3));
  CHECK(std::abs(h(0, 1) - expected) < 1e-9);
  CHECK(std::abs(h(1, 0) - expected) < 1e-9);
  CHECK(std::abs(h(1, 2) - expected) < 1e-9);
  CHECK(std::abs(h(2, 1) - expected) < 1e-9);
  CHECK(std::abs(h(0, 0) - 2870.0) < 1e-9);
  CHECK(std::abs(h(1, 1)) < 1e-9);
  CHECK(std::abs(h(2, 2) - 2870.0) < 1e-9);
  CHECK(std::abs(h(0, 2)) < 1e-12);
}

TEST_CASE("Hamiltonian is Hermitian with trace 2D for random fields") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> b(0.0, 50.0), th(0.0, kPi), ph(0.0, 2 * kPi);
  for (int i = 0; i < 1000; ++i) {
    const auto h = ground_hamiltonian(kConsts, {b(gen), th(gen), ph(gen)}).matrix;
    REQUIRE((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(std::abs(h.trace() - std::complex<double>(5740.0, 0.0)) < 1e-9);
  }
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(ground_hamiltonian({-1.0, 28.0}, {}), Error);
  CHECK_THROWS_AS(ground_hamiltonian(kConsts, {-1.0, 0.0, 0.0}), Error);
  CHECK_THROWS_AS(ground_hamiltonian(kConsts, {1.0, 4.0, 0.0}), Error);
  CHECK_THROWS_AS(ground_hamiltonian(kConsts, {1.0, 0.0, 2 * kPi}), Error);
}

TEST_CASE("eigensystem: zero field degeneracy") {
  const auto eig = eigensystem(ground_hamiltonian(kConsts, {0.0, 0.0, 0.0}));
  CHECK(eig.level(Level::L0).energy == doctest::Approx(0.0));
  CHECK(eig.level(Level::Lm).energy == doctest::Approx(2870.0));
  CHECK(eig.level(Level::Lp).energy == doctest::Approx(2870.0));
  CHECK(eig.to_minus.frequency == doctest::Approx(2870.0));
  CHECK(eig.to_plus.frequency == doctest::Approx(2870.0));
}

TEST_CASE("eigensystem: axial field gives D -+ gamma B") {
  const auto eig = eigensystem(ground_hamiltonian(kConsts, {10.2, 0.0, 0.0}));
  const double g = 28.02495 * 10.2;
  CHECK(eig.to_minus.frequency == doctest::Approx(2870.0 - g).epsilon(1e-12));
  CHECK(eig.to_plus.frequency == doctest::Approx(2870.0 + g).epsilon(1e-12));
  CHECK(eig.to_minus.frequency == doctest::Approx(2584.1).epsilon(1e-4));
  CHECK(eig.to_plus.frequency == doctest::Approx(3155.9).epsilon(1e-4));
}

TEST_CASE("eigensystem: transverse 10.2 mT lines at 2898 and 2926 MHz") {
  const auto eig = eigensystem(ground_hamiltonian(kConsts, {10.2, kPi / 2, 0.0}));
  const auto oracle = transverse_oracle(10.2);
  CHECK(eig.to_minus.frequency == doctest::Approx(oracle.f_minus).epsilon(1e-12));
  CHECK(eig.to_plus.frequency == doctest::Approx(oracle.f_plus).epsilon(1e-12));
  CHECK(std::abs(eig.to_minus.frequency - 2898.0) <= 1.0);
  CHECK(std::abs(eig.to_plus.frequency - 2926.0) <= 1.0);
}

TEST_CASE("Jacobi eigensolver agrees with Eigen's Hermitian solver") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> b(0.0, 100.0), th(0.0, kPi), ph(0.0, 2 * kPi);
  for (int i = 0; i < 500; ++i) {
    const auto h = ground_hamiltonian(kConsts, {b(gen), th(gen), ph(gen)}).matrix;
    const auto mine = jacobi_eigen(h);
    Eigen::SelfAdjointEigenSolver<Matrix3c> ref(h);
    for (int k = 0; k < 3; ++k) REQUIRE(std::abs(mine.values(k) - ref.eigenvalues()(k)) < 1e-8);
    const Matrix3c residual = h * mine.vectors - mine.vectors * mine.values.asDiagonal();
    REQUIRE(residual.cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("eigensystem invariants on random fields up to 100 mT") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> b(0.0, 100.0), th(0.0, kPi), ph(0.0, 2 * kPi);
  for (int i = 0; i < 1000; ++i) {
    const auto eig = eigensystem(ground_hamiltonian(kConsts, {b(gen), th(gen), ph(gen)}));
    Matrix3c v;
    for (int k = 0; k < 3; ++k) v.col(k) = eig.levels[static_cast<std::size_t>(k)].state;
    REQUIRE((v.adjoint() * v - Matrix3c::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    double sum = 0;
    for (const auto& l : eig.levels) sum += l.energy;
    REQUIRE(std::abs(sum - 5740.0) < 1e-8);
    REQUIRE(std::norm(eig.level(Level::L0).state(1)) > 0.5);
    REQUIRE(eig.level(Level::Lm).energy <= eig.level(Level::Lp).energy);
  }
}

TEST_CASE("labeling fails loudly when no level is mostly |0>") {
  // A matrix whose eigenvectors are the uniform superpositions of the basis.
  Matrix3c h = Matrix3c::Constant(1.0);
  CHECK_THROWS_AS(eigensystem({h}), Error);
  try {
    eigensystem({h});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LabelingAmbiguous);
  }
}

TEST_CASE("transverse eigenstates approach (|-1> -+ |+1>)/sqrt2") {
  // Lm is exactly |-> at phi = 0; Lp carries a |0> admixture of order
  // (gamma B / D)^2, about 1% at 10.2 mT.
  // B = 0 is degenerate and any basis of the D subspace is acceptable.
  for (int i = 1; i <= 102; ++i) {
    const double b = 0.1 * i;
    const auto eig = eigensystem(ground_hamiltonian(kConsts, {b, kPi / 2, 0.0}));
    const double om = std::norm(minus_state().dot(eig.level(Level::Lm).state));
    const double op = std::norm(plus_state().dot(eig.level(Level::Lp).state));
    REQUIRE(om >= 1.0 - 1e-12);
    if (b <= 7.0) REQUIRE(op >= 0.995);
    REQUIRE(op >= 0.99);
  }
  const auto eig = eigensystem(ground_hamiltonian(kConsts, {10.2, kPi / 2, 0.0}));
  const double g = kConsts.gamma_e * 10.2;
  const double mix = 0.5 * std::atan2(2 * g, kConsts.zero_field_splitting);
  CHECK(std::norm(plus_state().dot(eig.level(Level::Lp).state)) ==
        doctest::Approx(std::cos(mix) * std::cos(mix)).epsilon(1e-10));
}

TEST_CASE("transverse transition frequencies never fall below D") {
  for (int i = 0; i <= 102; ++i) {
    const auto eig = eigensystem(ground_hamiltonian(kConsts, {0.1 * i, kPi / 2, 0.0}));
    REQUIRE(eig.to_minus.frequency >= 2870.0 - 1e-9);
    REQUIRE(eig.to_plus.frequency >= 2870.0 - 1e-9);
  }
}

TEST_CASE("Rabi amplitudes follow the transverse selection rules") {
  const auto eig = eigensystem(ground_hamiltonian(kConsts, {10.2, kPi / 2, 0.0}));

  SUBCASE("MW along the static field drives only L0<->Lp") {
    const auto r = rabi_amplitudes(eig, kConsts, {0.05, kPi / 2, 0.0});
    CHECK(r.zero_minus / r.zero_plus < 0.05);
    CHECK(r.zero_minus < 1e-12);
  }
  SUBCASE("MW perpendicular to the static field drives only L0<->Lm") {
    const auto r = rabi_amplitudes(eig, kConsts, {0.05, kPi / 2, kPi / 2});
    CHECK(r.zero_plus / r.zero_minus < 0.05);
  }
  SUBCASE("axial MW couples mainly Lm<->Lp") {
    // S_z maps |+> to -|->, so L0<->Lp vanishes exactly; L0<->Lm picks up
    // the |+> admixture of L0, sin(mix).
    const auto r = rabi_amplitudes(eig, kConsts, {0.05, 0.0, 0.0});
    const double mix = 0.5 * std::atan2(2 * kConsts.gamma_e * 10.2, kConsts.zero_field_splitting);
    CHECK(r.zero_plus < 1e-12);
    CHECK(r.zero_minus == doctest::Approx(kConsts.gamma_e * 0.05 * std::sin(mix)).epsilon(1e-10));
    CHECK(r.minus_plus == doctest::Approx(kConsts.gamma_e * 0.05 * std::cos(mix)).epsilon(1e-10));
    CHECK(r.zero_minus / r.minus_plus < 0.11);
  }
  SUBCASE("amplitude scale is gamma B_mw |<i|n.S|j>|") {
    // At weak bias <L0|S_x|Lp> = cos(2 mix) -> 1.
    const auto eig0 = eigensystem(ground_hamiltonian(kConsts, {0.01, kPi / 2, 0.0}));
    const auto r = rabi_amplitudes(eig0, kConsts, {0.1, kPi / 2, 0.0});
    CHECK(r.zero_plus == doctest::Approx(28.02495 * 0.1).epsilon(1e-6));
  }
}

TEST_CASE("Rabi amplitudes are invariant under a common azimuthal rotation") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> b(0.1, 50.0), th(0.0, kPi), ang(0.0, 2 * kPi);
  for (int i = 0; i < 200; ++i) {
    const double bb = b(gen), theta = th(gen), phi = ang(gen), zeta = th(gen), tau = ang(gen);
    const double rot = ang(gen);
    const double phi2 = std::fmod(phi + rot, 2 * kPi);
    const auto r1 = rabi_amplitudes(eigensystem(ground_hamiltonian(kConsts, {bb, theta, phi})),
                                    kConsts, {0.1, zeta, tau});
    const auto r2 = rabi_amplitudes(eigensystem(ground_hamiltonian(kConsts, {bb, theta, phi2})),
                                    kConsts, {0.1, zeta, tau + rot});
    REQUIRE(std::abs(r1.zero_minus - r2.zero_minus) < 1e-10);
    REQUIRE(std::abs(r1.zero_plus - r2.zero_plus) < 1e-10);
    REQUIRE(std::abs(r1.minus_plus - r2.minus_plus) < 1e-10);
  }
}

TEST_CASE("L0<->Lp amplitude follows |cos delta| in relative azimuth") {
  for (double b : {1.0, 5.0, 10.2}) {
    const auto eig = eigensystem(ground_hamiltonian(kConsts, {b, kPi / 2, 0.0}));
    const double ref = rabi_amplitudes(eig, kConsts, {0.05, kPi / 2, 0.0}).zero_plus;
    for (int k = 0; k < 36; ++k) {
      const double delta = 2 * kPi * k / 36;
      const double r = rabi_amplitudes(eig, kConsts, {0.05, kPi / 2, delta}).zero_plus;
      REQUIRE(std::abs(r / ref - std::abs(std::cos(delta))) < 1e-3);
    }
  }
}

TEST_CASE("transition_table") {
  SUBCASE("zero field gives two lines at D") {
    const auto t = transition_table(kConsts, {0.0, 0.0, 0.0}, {0.05, 1.0, 0.3});
    REQUIRE(t.size() == 2);
    CHECK(t[0].frequency == doctest::Approx(2870.0));
    CHECK(t[1].frequency == doctest::Approx(2870.0));
  }
  SUBCASE("45 degrees relative azimuth gives nearly equal amplitudes") {
    const auto t = transition_table(kConsts, {10.2, kPi / 2, kPi / 4}, {0.05, kPi / 2, 0.0});
    CHECK(t[0].label == "L0-Lm");
    CHECK(t[1].label == "L0-Lp");
    CHECK(std::abs(t[0].rabi / t[1].rabi - 1.0) < 0.05);
  }
  SUBCASE("deterministic") {
    const StaticFieldNV f{7.3, 1.1, 4.2};
    const MwFieldNV m{0.03, 0.7, 2.0};
    const auto a = transition_table(kConsts, f, m);
    const auto b = transition_table(kConsts, f, m);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].frequency == b[i].frequency);
      CHECK(a[i].rabi == b[i].rabi);
    }
  }
}
