#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "hbn/error.hpp"
#include "hbn/spin_model.hpp"

using namespace hbn;

namespace {

// Roots of the characteristic polynomial of a Hermitian 3x3 matrix via the
// trigonometric form of the cubic formula.
std::array<double, 3> cubic_eigenvalues(const Matrix3c& h) {
  const double a = -h.trace().real();
  double b = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) b += (h(i, i) * h(j, j) - h(i, j) * h(j, i)).real();
  }
  const double c = -h.determinant().real();
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double r = 2.0 * std::sqrt(-p / 3.0);
  const double phi = std::acos(std::clamp(3.0 * q / (p * r), -1.0, 1.0)) / 3.0;
  std::array<double, 3> out;
  for (int k = 0; k < 3; ++k) out[k] = r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0) - a / 3.0;
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("hamiltonian: axial zero field is diagonal") {
  ZfsSpinParams p{3.47e9, 0.0, 2.0};
  const Matrix3c h = hamiltonian_matrix(p, {});
  CHECK(h(0, 0).real() == doctest::Approx(3.47e9));
  CHECK(std::abs(h(1, 1)) == doctest::Approx(0.0));
  CHECK(h(2, 2).real() == doctest::Approx(3.47e9));
  CHECK(std::abs(h(0, 1)) + std::abs(h(0, 2)) + std::abs(h(1, 2)) == doctest::Approx(0.0));
}

TEST_CASE("hamiltonian: hermitian with trace 2D for random fields") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  const ZfsSpinParams p;
  for (int i = 0; i < 200; ++i) {
    const Matrix3c h = hamiltonian_matrix(p, {u(rng), u(rng), u(rng)});
    CHECK((h - h.adjoint()).norm() <= 1e-9 * h.norm());
    CHECK(h.trace().real() == doctest::Approx(2.0 * p.d_gs).epsilon(1e-12));
  }
}

TEST_CASE("hamiltonian: E = 50 MHz splits the zero-field levels") {
  const auto ev = cubic_eigenvalues(hamiltonian_matrix(ZfsSpinParams{}, {}));
  CHECK(ev[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(ev[1] == doctest::Approx(3.42e9).epsilon(1e-12));
  CHECK(ev[2] == doctest::Approx(3.52e9).epsilon(1e-12));
}

TEST_CASE("axial resonances: paper splittings") {
  const ZfsSpinParams p;
  const auto r59 = resonance_frequencies_axial(p, 5.9e-3);
  const auto r98 = resonance_frequencies_axial(p, 9.8e-3);
  // direct evaluation of the closed form
  const double s59 = 2.0 * std::hypot(50e6, 27.99e9 * 5.9e-3);
  const double s98 = 2.0 * std::hypot(50e6, 27.99e9 * 9.8e-3);
  CHECK(r59.splitting() == doctest::Approx(s59).epsilon(1e-12));
  CHECK(r98.splitting() == doctest::Approx(s98).epsilon(1e-12));
  CHECK(std::abs(r59.splitting() - 346e6) < 5e6);
  CHECK(std::abs(r98.splitting() - 560e6) < 5e6);
  const auto r0 = resonance_frequencies_axial(p, 0.0);
  CHECK(r0.nu1 == doctest::Approx(3.42e9));
  CHECK(r0.nu2 == doctest::Approx(3.52e9));
}

TEST_CASE("axial resonances: centre is exactly D and splitting grows with |B|") {
  const ZfsSpinParams p;
  double last = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double b = 1e-4 * i;
    const auto r = resonance_frequencies_axial(p, b);
    CHECK(r.nu1 + r.nu2 == doctest::Approx(2.0 * p.d_gs).epsilon(1e-12));
    CHECK(r.nu2 >= r.nu1);
    if (i > 0) CHECK(r.splitting() > last);
    last = r.splitting();
    CHECK(resonance_frequencies_axial(p, -b).splitting() == doctest::Approx(r.splitting()).epsilon(1e-15));
  }
}

TEST_CASE("general solver agrees with the closed form on axial fields") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  const ZfsSpinParams p;
  for (int i = 0; i < 1000; ++i) {
    const double b = u(rng);
    const auto g = resonance_frequencies_general(p, MagneticField::axial(b));
    const auto a = resonance_frequencies_axial(p, b);
    CHECK(g.nu1 == doctest::Approx(a.nu1).epsilon(1e-10));
    CHECK(g.nu2 == doctest::Approx(a.nu2).epsilon(1e-10));
  }
  const auto z = resonance_frequencies_general(p, {});
  CHECK(z.nu1 == doctest::Approx(3.42e9).epsilon(1e-10));
  CHECK(z.nu2 == doctest::Approx(3.52e9).epsilon(1e-10));
}

TEST_CASE("general solver: transverse field against the cubic-root oracle") {
  const ZfsSpinParams p;
  for (double bx : {1e-3, 5e-3, 20e-3}) {
    const MagneticField f{bx, 0.0, 0.0};
    const auto ev = cubic_eigenvalues(hamiltonian_matrix(p, f));
    const auto r = resonance_frequencies_general(p, f);
    // for small transverse fields the m_s = 0-like level stays lowest
    CHECK(r.nu1 == doctest::Approx(ev[1] - ev[0]).epsilon(1e-9));
    CHECK(r.nu2 == doctest::Approx(ev[2] - ev[0]).epsilon(1e-9));
  }
}

TEST_CASE("general solver: level crossing is reported") {
  const ZfsSpinParams p{3.47e9, 0.0, 2.0};
  CHECK_THROWS_AS(resonance_frequencies_general(p, MagneticField::axial(p.d_gs / p.gyromagnetic())), Error);
  try {
    resonance_frequencies_general(p, MagneticField::axial(p.d_gs / p.gyromagnetic()));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateLevels);
  }
}

TEST_CASE("field_from_splitting: examples and round trip") {
  const ZfsSpinParams p;
  const double b = field_from_splitting(p, 560e6);
  CHECK(b == doctest::Approx(9.84e-3).epsilon(2e-3));
  CHECK(resonance_frequencies_axial(p, b).splitting() == doctest::Approx(560e6).epsilon(1e-9));
  CHECK(field_from_splitting(p, 100e6) == 0.0);
  try {
    field_from_splitting(p, 99e6);
    FAIL("expected BelowZeroFieldSplitting");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BelowZeroFieldSplitting);
  }
  for (int i = 0; i <= 1000; ++i) {
    const double bz = 1e-4 * i;
    const double back = field_from_splitting(p, resonance_frequencies_axial(p, bz).splitting());
    CHECK(back == doctest::Approx(bz).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("spin parameters: invariants enforced") {
  CHECK_THROWS_AS((ZfsSpinParams{-1.0, 0.0, 2.0}.validate()), Error);
  CHECK_THROWS_AS((ZfsSpinParams{3e9, -1.0, 2.0}.validate()), Error);
  CHECK_THROWS_AS((ZfsSpinParams{3e9, 3e9, 2.0}.validate()), Error);
  CHECK_THROWS_AS((ZfsSpinParams{3e9, 0.0, 0.0}.validate()), Error);
  CHECK_NOTHROW(ZfsSpinParams{}.validate());
}
