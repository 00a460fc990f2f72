#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bohm/error.hpp"
#include "bohm/extract.hpp"

using namespace bohm;
using namespace bohm::extract;
using qft::LatticeModel;
using qft::LatticeSpec;
using qft::make_state;

namespace {

constexpr double kPi = std::numbers::pi;

LatticeSpec spec(int modes, int n_max, double coupling = 0.0, double box = 2.0 * kPi) {
  LatticeSpec s;
  s.modes = modes;
  s.n_max = n_max;
  s.coupling = coupling;
  s.box = box;
  return s;
}

Positions pos(std::initializer_list<double> xs) {
  Positions p;
  for (double x : xs) p.push_back({x, 0.0, 0.0});
  return p;
}

// e^{i(kx - wt)} one-particle state in the first cos/sin pair.
qft::FunctionalState plane_wave_state(const qft::Lattice& lat) {
  return make_state(lat, {{{0, 1, 0}, 1.0}, {{0, 0, 1}, cplx(0.0, 1.0)}});
}

}  // namespace

TEST_CASE("vacuum has no n-particle wave functions") {
  const LatticeModel model(spec(3, 3));
  const auto vac = make_state(model.lattice(), {{{0, 0, 0}, 1.0}});
  for (int n = 1; n <= 4; ++n) {
    Positions x;
    for (int j = 0; j < n; ++j) x.push_back({0.3 * j + 0.1, 0, 0});
    CHECK(std::abs(equal_time_wf(model, vac, x, 0.7)) < 1e-14);
  }
  CHECK_THROWS_AS(equal_time_wf(model, vac, Positions(10, Position{}), 0.0), Error);
}

TEST_CASE("one-particle plane wave matches the analytic matrix element") {
  const LatticeModel model(spec(3, 2));
  const auto& lat = model.lattice();
  const auto st = plane_wave_state(lat);
  const double w = lat.omega(1), V = lat.spec().box;
  for (double t : {0.0, 0.9, 4.2})
    for (double x : {0.0, 1.0, 2.5}) {
      const cplx expect = std::polar(1.0 / std::sqrt(2.0 * V * w), x - w * t);
      CHECK(std::abs(equal_time_wf(model, st, pos({x}), t) - expect) < 1e-13);
    }
}

TEST_CASE("ladder and quadrature routes agree") {
  const LatticeModel model(spec(3, 3, 0.3));
  const auto& lat = model.lattice();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1), ux(0, 2 * kPi);
  Eigen::VectorXcd c(static_cast<long>(lat.basis_size()));
  for (long i = 0; i < c.size(); ++i) c(i) = {u(rng), u(rng)};
  const qft::FunctionalState st{0.0, c / c.norm()};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t = 2.0 * (u(rng) + 1.0);
    const auto x1 = pos({ux(rng)});
    worst = std::max(worst, std::abs(equal_time_wf(model, st, x1, t) - quadrature_wf(model, st, x1, t)));
    if (i % 10 == 0) {
      const auto x2 = pos({ux(rng), ux(rng)});
      CHECK(std::abs(equal_time_wf(model, st, x2, t) - quadrature_wf(model, st, x2, t)) < 1e-8);
    }
  }
  CHECK(worst < 1e-8);
  CHECK_THROWS_AS(quadrature_wf(model, st, pos({0.1}), 0.0, 3), Error);
}

TEST_CASE("orthogonality of field moments between sectors") {
  const qft::Lattice lat(spec(3, 2));
  std::vector<Positions> one, none{Positions{}}, three;
  for (double x : {0.2, 1.9, 4.4}) {
    one.push_back(pos({x}));
    three.push_back(pos({x, x + 0.5, 2.0 * x}));
  }
  CHECK(orthogonality_check(lat, 1, 2, one, lat.n_max() + 2) < 1e-10);
  CHECK(orthogonality_check(lat, 0, 2, none, lat.n_max() + 1) < 1e-10);
  CHECK(orthogonality_check(lat, 1, 0, one, lat.n_max() + 2) < 1e-10);
  // n' = n: <0|phi(x)|1_j> = f_j(x) / sqrt(2 w_j)
  double analytic = 0.0;
  for (const auto& s : one)
    for (int j = 0; j < 3; ++j)
      analytic = std::max(analytic, std::abs(lat.mode_function(j, {s[0].data(), 1}) / std::sqrt(2.0 * lat.omega(j))));
  CHECK(orthogonality_check(lat, 1, 1, one, lat.n_max() + 2) == doctest::Approx(analytic).epsilon(1e-10));
  // three fields reach the one-particle sector through a contraction
  CHECK(orthogonality_check(lat, 3, 1, three, lat.n_max() + 4) > 1e-3);
  CHECK_THROWS_AS(orthogonality_check(lat, 1, 2, one, 2), Error);
}

TEST_CASE("bosonic symmetry and sector filtering") {
  const LatticeModel model(spec(3, 3, 0.2));
  const auto& lat = model.lattice();
  const auto st = make_state(lat, {{{0, 1, 1}, 1.0}, {{2, 0, 0}, cplx(0.3, 0.4)}, {{0, 2, 0}, 0.5}, {{1, 0, 0}, 0.7}});
  const auto x = pos({0.4, 2.2});
  CHECK(std::abs(equal_time_wf(model, st, x, 1.0) - equal_time_wf(model, st, pos({2.2, 0.4}), 1.0)) < 1e-14);
  const double ta[] = {0.3, 1.1}, tb[] = {1.1, 0.3};
  CHECK(std::abs(heisenberg_wf(model, st, x, ta) - heisenberg_wf(model, st, pos({2.2, 0.4}), tb)) < 1e-10);

  // change only sectors 0, 1 and 3: psi_2 at the state time is untouched
  auto other = st;
  other.c(0) += 0.8;
  other.c(static_cast<long>(lat.index({1, 0, 0}))) *= -3.0;
  other.c(static_cast<long>(lat.index({1, 1, 1}))) += cplx(0, 2);
  CHECK(std::abs(equal_time_wf(model, st, x, 0.0) - equal_time_wf(model, other, x, 0.0)) < 1e-12);
  const LatticeModel free_model(spec(3, 3));
  CHECK(std::abs(equal_time_wf(free_model, st, x, 2.0) - equal_time_wf(free_model, other, x, 2.0)) < 1e-12);
}

TEST_CASE("nonequal-time evaluator reduces to the equal-time one") {
  const LatticeModel model(spec(3, 3, 0.4));
  const auto& lat = model.lattice();
  const auto st = make_state(lat, {{{0, 1, 1}, 1.0}, {{0, 2, 0}, cplx(0.2, 0.9)}, {{2, 0, 0}, 0.3}, {{0, 0, 0}, 0.5}});
  for (double t : {0.0, 0.6, 2.5}) {
    const double ts[] = {t, t};
    const auto x = pos({0.7, 3.1});
    CHECK(std::abs(heisenberg_wf(model, st, x, ts) - equal_time_wf(model, st, x, t)) < 1e-8);
  }
}

TEST_CASE("free two-particle wave function solves Klein-Gordon in each argument") {
  const LatticeModel model(spec(5, 2));
  const auto& lat = model.lattice();
  const auto st = make_state(lat, {{{0, 1, 1, 0, 0}, 1.0}, {{0, 0, 0, 1, 1}, cplx(0.0, 0.6)}, {{1, 0, 0, 0, 1}, 0.4}});
  const double ts[] = {0.2, 0.9};
  CHECK(kg_residual(model, st, pos({0.5, 2.0}), ts, 1e-3) < 1e-5);
  // with interaction the residual is visibly nonzero
  const LatticeModel inter(spec(5, 2, 2.0));
  CHECK(kg_residual(inter, st, pos({0.5, 2.0}), ts, 1e-3) > 1e-4);
}

TEST_CASE("particle_velocity: plane wave, parity, norm independence") {
  const LatticeModel model(spec(3, 2));
  const auto& lat = model.lattice();
  const auto st = plane_wave_state(lat);
  const auto v = particle_velocity(model, st, 0, pos({0.8}), 0.4);
  CHECK(v[0] == doctest::Approx(1.0 / lat.omega(1)).epsilon(1e-8));

  // cos modes only: psi_2 is even under x -> -x, so velocities flip sign
  const auto even = make_state(lat, {{{0, 2, 0}, 1.0}, {{1, 1, 0}, cplx(0.0, 0.5)}, {{2, 0, 0}, 0.3}});
  const auto x = pos({0.6, 1.7}), mx = pos({-0.6, -1.7});
  for (int j = 0; j < 2; ++j) {
    const auto a = particle_velocity(model, even, j, x, 0.3);
    const auto b = particle_velocity(model, even, j, mx, 0.3);
    CHECK(a[0] == doctest::Approx(-b[0]).epsilon(1e-8));
    CHECK(std::abs(a[0]) > 1e-3);
  }

  const auto mixed = make_state(lat, {{{0, 0, 0}, 1.0}, {{0, 1, 0}, 0.5}, {{0, 0, 1}, cplx(0.0, 0.8)}, {{1, 0, 0}, cplx(0.3, 0.1)}});
  auto small = mixed;
  for (size_t i = 0; i < lat.basis_size(); ++i)
    if (lat.total_number(i) == 1) small.c(static_cast<long>(i)) *= 1e-6;
  const auto va = particle_velocity(model, mixed, 0, pos({1.3}), 0.5);
  const auto vb = particle_velocity(model, small, 0, pos({1.3}), 0.5);
  CHECK(std::abs(va[0] - vb[0]) <= 1e-10 * std::abs(va[0]));
}

TEST_CASE("nonrelativistic multiparticle limit") {
  // box 20 pi: k = 0.1 n, so the first modes have |k| <= 0.1 m
  const LatticeModel model(spec(3, 2, 0.0, 20.0 * kPi));
  const auto& lat = model.lattice();
  const auto st = make_state(lat, {{{0, 1, 1}, 1.0}, {{1, 1, 0}, cplx(0.5, 0.5)}, {{0, 2, 0}, 0.3}});
  CHECK(nonrel_residual(model, st, pos({3.0, 11.0}), 1.5, 1e-2) < 1e-3);
}

TEST_CASE("mass_density") {
  ParticleSet vac{2.0, {Positions{}, pos({1.0}), pos({1.0, 2.0})}, {1.0, 0.0, 0.0}};
  const auto a = mass_density(vac);
  CHECK(a.points.empty());
  CHECK(a.total == 0.0);
  ParticleSet two{2.0, {Positions{}, pos({1.0}), pos({1.0, 2.0})}, {0.0, 0.0, 1.0}};
  const auto b = mass_density(two);
  REQUIRE(b.points.size() == 2);
  CHECK(b.points[0].weight == 2.0);
  CHECK(b.total == 4.0);
  ParticleSet half{1.0, {Positions{}, pos({1.0}), pos({1.0, 2.0})}, {0.0, 0.5, 0.5}};
  CHECK(mass_density(half).total == doctest::Approx(1.5));
}

TEST_CASE("integrate_particles: plane wave moves at k / w") {
  const LatticeModel model(spec(3, 2));
  const auto st = plane_wave_state(model.lattice());
  const auto path = integrate_particles(model, st, pos({0.5}), 3.0);
  REQUIRE(path.completed);
  CHECK(path.x.back()[0][0] == doctest::Approx(0.5 + 3.0 / model.lattice().omega(1)).epsilon(1e-7));
}
