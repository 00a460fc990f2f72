#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bohm/error.hpp"
#include "bohm/relkin.hpp"
#include "fixtures.hpp"
#include "gen.hpp"

using namespace bohm;
using namespace bohm::relkin;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent trapezoid of the closed-form two-mode density.
double two_mode_quadrature(double a, double t, int points, bool absolute) {
  const double h = 2.0 * kPi / points;
  double s = 0.0;
  for (int i = 0; i < points; ++i) {
    const double j0 = fixtures::two_mode_j0(a, t, i * h);
    s += absolute ? std::abs(j0) : j0;
  }
  return s * h;
}

}  // namespace

TEST_CASE("evaluate: single mode normalized to unit value at the origin") {
  const ModeSum w = fixtures::plane_wave(1.3, 0.7);
  const auto s = evaluate(w, FourVector(0.0, 0.0));
  CHECK(std::abs(s.psi - cplx(1.0)) < 1e-14);
  // |psi| is constant for a plane wave
  for (double x : {-3.0, 0.4, 11.0}) CHECK(std::abs(std::abs(evaluate(w, FourVector(2.5, x)).psi) - 1.0) < 1e-13);
}

TEST_CASE("evaluate: linearity at the origin") {
  const ModeSum w = fixtures::two_mode(1.2);
  CHECK(std::abs(evaluate(w, FourVector(0.0, 0.0)).psi - cplx(2.2)) < 1e-13);
}

TEST_CASE("evaluate: derivatives agree with central differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const ModeSum w = gen::mode_sum(rng, trial % 2 ? 3 : 1);
    const FourVector x = gen::point(rng, w.dim());
    const auto s = evaluate(w, x);
    const double h = 1e-5;
    for (int mu = 0; mu <= w.dim(); ++mu) {
      FourVector xp = x, xm = x;
      xp[mu] += h;
      xm[mu] -= h;
      const auto sp = evaluate(w, xp), sm = evaluate(w, xm);
      const double scale = 1.0 + std::abs(s.d1[static_cast<size_t>(mu)]);
      CHECK(std::abs((sp.psi - sm.psi) / (2 * h) - s.d1[static_cast<size_t>(mu)]) < 1e-8 * scale);
      for (int nu = 0; nu <= w.dim(); ++nu) {
        const cplx fd = (sp.d1[static_cast<size_t>(nu)] - sm.d1[static_cast<size_t>(nu)]) / (2 * h);
        CHECK(std::abs(fd - s.d2[static_cast<size_t>(mu)][static_cast<size_t>(nu)]) <
              1e-7 * (1.0 + std::abs(s.d2[static_cast<size_t>(mu)][static_cast<size_t>(nu)])));
      }
    }
  }
}

TEST_CASE("property: Klein-Gordon residual vanishes at random points") {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ModeSum w = gen::mode_sum(rng, i % 3 == 0 ? 3 : 1);
    const auto s = evaluate(w, gen::point(rng, w.dim()));
    double scale = std::pow(w.mass(), 2) * std::abs(s.psi);
    for (const auto& row : s.d2)
      for (const auto& v : row) scale = std::max(scale, std::abs(v));
    worst = std::max(worst, std::abs(klein_gordon_residual(s, w.mass())) / scale);
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("current: plane wave gives j_mu = 2 k_mu") {
  const ModeSum w = fixtures::plane_wave(1.0, 0.8);
  const double k0 = std::sqrt(1.64);
  const FourVector j = current(evaluate(w, FourVector(1.7, -0.3)));
  CHECK(j[0] == doctest::Approx(2.0 * k0).epsilon(1e-13));
  CHECK(j[1] == doctest::Approx(-2.0 * 0.8).epsilon(1e-13));  // covariant k_1 = -k^1
}

TEST_CASE("current: vanishes where psi is real with a stationary phase") {
  // cos(x) e^{-i w t} at t = 0 is real and its phase has no spatial gradient
  std::vector<Mode> m(2);
  m[0].k = {1.0, 0, 0};
  m[1].k = {-1.0, 0, 0};
  m[0].amplitude = m[1].amplitude = 1.0;
  const ModeSum w = ModeSum::from_plane_waves(1.0, 1, m);
  const FourVector j = current(evaluate(w, FourVector(0.0, 0.3)));
  CHECK(std::abs(j[1]) < 1e-14);
}

TEST_CASE("current: two-mode density matches its closed form and dips below zero") {
  const double a = 1.2;
  const ModeSum w = fixtures::two_mode(a);
  double min_j0 = 1e300;
  for (int i = 0; i < 2000; ++i) {
    const double x = 2 * kPi * i / 2000, t = 0.37;
    const double j0 = current(evaluate(w, FourVector(t, x)))[0];
    CHECK(j0 == doctest::Approx(fixtures::two_mode_j0(a, t, x)).epsilon(1e-12).scale(1.0));
    min_j0 = std::min(min_j0, j0);
  }
  const double w1 = std::sqrt(2.0);
  const double analytic = 2.0 * (a - 1.0) * (a * 1.0 - w1);
  CHECK(analytic < 0.0);
  CHECK(min_j0 < 0.0);
  CHECK(min_j0 == doctest::Approx(analytic).epsilon(1e-4));
}

TEST_CASE("particle_number: unit normalization and quadratic scaling") {
  const ModeSum w = fixtures::plane_wave(1.0, 2.0).normalized();
  CHECK(particle_number(w) == doctest::Approx(1.0).epsilon(1e-14));
  const ModeSum scaled = w.scaled(cplx(0.0, 3.0));
  CHECK(particle_number(scaled) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(physical_particle_number(w, 0.4, cell_grid(w, 8)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("particle_number: grid and mode forms agree for the two-mode wave") {
  const double a = 1.2;
  const ModeSum w = fixtures::two_mode(a);
  const double mode = particle_number(w);
  const double oracle = two_mode_quadrature(a, 0.0, 64, false);
  CHECK(mode == doctest::Approx(oracle).epsilon(1e-12));
  for (double t : {0.0, 1.3, 7.0})
    CHECK(particle_number_grid(w, t, cell_grid(w, 16)) == doctest::Approx(mode).epsilon(1e-6));
}

TEST_CASE("property: grid particle number is conserved across time slices") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ModeSum w = gen::mode_sum(rng, 1, 5, 4);
    const auto grid = cell_grid(w, 32);
    const double n0 = particle_number_grid(w, 0.0, grid);
    for (int s = 1; s < 10; ++s) {
      const double t = 3.7 * s;
      CHECK(std::abs(particle_number_grid(w, t, grid) - n0) <= 1e-8 * std::abs(n0) + 1e-12);
      CHECK(physical_particle_number(w, t, grid) >= std::abs(particle_number_grid(w, t, grid)) - 1e-12);
    }
  }
}

TEST_CASE("physical_particle_number exceeds N for the negative-density wave") {
  const double a = 1.2;
  const ModeSum w = fixtures::two_mode(a);
  const double nphys = physical_particle_number(w, 0.0, cell_grid(w, 4096));
  const double oracle = two_mode_quadrature(a, 0.0, 200000, true);
  CHECK(nphys > particle_number(w));
  CHECK(nphys == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("particle_number_grid rejects coarse or partial grids") {
  const ModeSum w = fixtures::two_mode(1.2);
  CHECK_THROWS_AS(particle_number_grid(w, 0.0, SpatialGrid{0.0, w.cell_length(), 2}), Error);
  CHECK_THROWS_AS(particle_number_grid(w, 0.0, SpatialGrid{0.0, 1.5 * w.cell_length(), 64}), Error);
  CHECK_NOTHROW(particle_number_grid(w, 0.0, SpatialGrid{0.0, w.cell_length(), 3}));
}

TEST_CASE("ModeSum validation") {
  std::vector<Mode> dup(2);
  dup[0].k = dup[1].k = {1.0, 0, 0};
  CHECK_THROWS_AS(ModeSum(1.0, 1, dup), Error);
  CHECK_THROWS_AS(ModeSum(1.0, 1, {}), Error);
  CHECK_THROWS_AS(ModeSum(-1.0, 1, {Mode{}}), Error);
  CHECK_THROWS_AS(ModeSum(1.0, 2, {Mode{}}), Error);
  std::vector<Mode> m(1);
  m[0].k = {1.5, 0, 0};
  CHECK_THROWS_AS(ModeSum(1.0, 1, m, 2.0 * kPi), Error);
  CHECK(ModeSum(1.0, 1, m).cell_length() == doctest::Approx(2.0 * kPi / 1.5));
}

TEST_CASE("polar: plane wave phase and amplitude") {
  const ModeSum w = fixtures::plane_wave(1.0, 0.5, 2.0);
  const double k0 = std::sqrt(1.25);
  const FourVector x(0.3, 0.2);
  const auto p = polar(evaluate(w, x));
  CHECK(p.R == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(p.S == doctest::Approx(-(k0 * 0.3 - 0.5 * 0.2)).epsilon(1e-13));
  CHECK(p.dS[0] == doctest::Approx(-k0).epsilon(1e-13));
  CHECK(p.dS[1] == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("property: polar reconstructs psi and satisfies j = -2 R^2 dS") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    const ModeSum w = gen::mode_sum(rng);
    const auto s = evaluate(w, gen::point(rng, 1));
    if (s.at_node()) continue;
    const auto p = polar(s);
    CHECK(std::abs(p.R * std::polar(1.0, p.S) - s.psi) <= 1e-12 * std::abs(s.psi));
    const FourVector j = current(s);
    for (int mu = 0; mu <= 1; ++mu)
      CHECK(std::abs(j[mu] + 2.0 * p.R * p.R * p.dS[mu]) <= 1e-10 * (1.0 + std::abs(j[mu])));
  }
}

TEST_CASE("polar: branch tracking stays continuous across S = pi") {
  const ModeSum w = fixtures::plane_wave(1.0, 0.0);
  std::optional<PolarForm> prev;
  double last = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double t = 0.05 * i;  // S = -t runs through -pi, -3 pi, ...
    const auto p = polar(evaluate(w, FourVector(t, 0.0)), prev);
    if (prev) CHECK(std::abs(p.S - last) < 0.06);
    last = p.S;
    prev = p;
  }
  CHECK(last == doctest::Approx(-10.0).epsilon(1e-12));
  // a jump beyond pi / 2 is refused
  PolarForm far;
  far.S = 2.0;
  CHECK_THROWS_AS(polar(evaluate(w, FourVector(0.0, 0.0)), far), Error);
}

TEST_CASE("polar and quantum_potential signal nodes") {
  std::vector<Mode> m(2);
  m[0].k = {1.0, 0, 0};
  m[1].k = {-1.0, 0, 0};
  m[0].amplitude = 1.0;
  m[1].amplitude = -1.0;
  const ModeSum w = ModeSum::from_plane_waves(1.0, 1, m);  // 2i sin(x) e^{-i w t}
  CHECK_THROWS_AS(polar(evaluate(w, FourVector(0.0, 0.0))), NodeError);
  CHECK_THROWS_AS(quantum_potential(w, FourVector(0.0, 0.0)), NodeError);
}

TEST_CASE("quantum_potential: zero for a plane wave") {
  const ModeSum w = fixtures::plane_wave(2.0, -1.1, cplx(0.3, 0.4));
  for (double x : {0.0, 1.0, -7.5}) CHECK(std::abs(quantum_potential(w, FourVector(x, 2 * x))) < 1e-12);
}

TEST_CASE("quantum_potential: two-mode value matches finite differences of R") {
  const ModeSum w = fixtures::two_mode(1.2);
  auto R = [&](double t, double x) { return std::abs(evaluate(w, FourVector(t, x), Derivatives::first).psi); };
  for (double x : {0.3, 1.1, 2.6}) {
    const double t = 0.4, h = 1e-3;
    const double r = R(t, x);
    const double dtt = (R(t + h, x) - 2 * r + R(t - h, x)) / (h * h);
    const double dxx = (R(t, x + h) - 2 * r + R(t, x - h)) / (h * h);
    const double oracle = (dtt - dxx) / (2.0 * w.mass() * r);
    CHECK(quantum_potential(w, FourVector(t, x)) == doctest::Approx(oracle).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("property: Hamilton-Jacobi and continuity hold off nodes") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const ModeSum w = gen::mode_sum(rng, i % 4 == 0 ? 3 : 1);
    const auto s = evaluate(w, gen::point(rng, w.dim()));
    if (std::norm(s.psi) < 1e8 * w.node_floor()) continue;  // stay well clear of nodes
    const double scale = 1.0 + std::pow(w.mass(), 2);
    CHECK(std::abs(hamilton_jacobi_residual(s, w.mass())) < 1e-8 * scale);
    double dscale = 0.0;
    for (const auto& row : s.d2)
      for (const auto& v : row) dscale = std::max(dscale, std::abs(v) * std::abs(s.psi));
    CHECK(std::abs(current_divergence(s)) < 1e-8 * (1.0 + dscale));
  }
}

TEST_CASE("boost: values map covariantly and the flux through a boosted slice is N") {
  const ModeSum w = fixtures::two_mode(1.2);
  for (double eta : {0.1, -0.4}) {
    const ModeSum wb = boost(w, eta);
    for (double x : {0.0, 1.3, 4.0}) {
      const FourVector p(0.5, x);
      CHECK(std::abs(evaluate(wb, boost(p, eta)).psi - evaluate(w, p).psi) < 1e-12);
    }
    // slice s -> boost((0, s)), s in one cell; flux = int (j^0 T^1 - j^1 T^0) ds
    const int n = 64;
    const double L = w.cell_length(), ch = std::cosh(eta), sh = std::sinh(eta);
    double flux = 0.0;
    for (int i = 0; i < n; ++i) {
      const FourVector j = current(evaluate(wb, boost(FourVector(0.0, L * i / n), eta))).flipped();
      flux += (j[0] * ch - j[1] * sh) * L / n;
    }
    CHECK(flux == doctest::Approx(particle_number(w)).epsilon(1e-10));
  }
}
