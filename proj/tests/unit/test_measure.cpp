#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bohm/error.hpp"
#include "bohm/measure.hpp"

using namespace bohm;
using namespace bohm::measure;

namespace {

constexpr double kPi = std::numbers::pi;

SystemState two_waves(double p0, int n0 = 1, int n1 = -1) {
  SystemState s;
  s.n = {n0, n1};
  s.c = {std::sqrt(p0), std::sqrt(1.0 - p0)};
  return s;
}

PointerSpec separated(double widths, double mass = std::numeric_limits<double>::infinity()) {
  PointerSpec p;
  p.separation = widths;
  p.mass = mass;
  return p;
}

// d_t rho + div(rho v) by central differences; v from the guidance law.
template <class Rho, class Vel>
double continuity_defect(const Rho& rho, const Vel& vel, std::vector<double> at, double t, double h) {
  const double dt = (rho(at, t + h) - rho(at, t - h)) / (2 * h);
  double div = 0.0;
  for (size_t i = 0; i < at.size(); ++i) {
    auto p = at, m = at;
    p[i] += h;
    m[i] -= h;
    div += (rho(p, t) * vel(p, t)[i] - rho(m, t) * vel(m, t)[i]) / (2 * h);
  }
  return std::abs(dt + div) / rho(at, t);
}

}  // namespace

TEST_CASE("substreams are reproducible and distinct") {
  auto a = make_rng(42, kSampling, 7), b = make_rng(42, kSampling, 7), c = make_rng(42, kSampling, 8),
       d = make_rng(43, kSampling, 7);
  const auto va = a();
  CHECK(va == b());
  CHECK(va != c());
  CHECK(va != d());
  CHECK(substream_seed(1, 2, 3) != substream_seed(1, 3, 2));
}

TEST_CASE("pointer overlap matches direct quadrature") {
  PointerSpec p;
  p.width = 0.7;
  for (double D : {0.0, 0.5, 1.4, 3.0}) {
    // independent oracle: trapezoid of chi(y) chi(y - D) on a wide grid
    const double s = p.width, h = 1e-3;
    double sum = 0.0;
    for (double y = -12; y <= 12 + D; y += h)
      sum += h * std::exp(-y * y / (2 * s * s)) * std::exp(-(y - D) * (y - D) / (2 * s * s)) / std::sqrt(kPi * s * s);
    CHECK(pointer_overlap(p, D) == doctest::Approx(sum).epsilon(1e-9));
  }
  PointerSpec unit;
  CHECK(pointer_overlap(unit, 10.0) < 1e-10);
  PointerSpec heavy;
  heavy.mass = 2.0;
  CHECK(pointer_width(heavy, 4.0) == doctest::Approx(std::sqrt(5.0)));
  CHECK(pointer_width(unit, 100.0) == 1.0);
}

TEST_CASE("entangle: channels, centers, overlap flag") {
  SystemState one;
  one.n = {2};
  one.c = {cplx(0.0, 3.0)};
  PointerSpec p;
  p.coupling = 2.0;
  p.duration = 1.5;
  const auto j1 = entangle(one, Observable{0.5, 1.0}, p);
  REQUIRE(j1.channels().size() == 1);
  CHECK(j1.channels()[0].center == doctest::Approx(2.0 * 1.5 * (0.5 * 2.0 + 1.0)));
  CHECK(j1.ideal());

  const auto j2 = entangle(two_waves(0.3), Observable{}, separated(10.0));
  CHECK(j2.coupling() == doctest::Approx(5.0));
  CHECK(j2.max_overlap() < 1e-10);
  CHECK(j2.ideal());
  CHECK(std::abs(j2.channels()[0].coefficient) == doctest::Approx(std::sqrt(0.3)).epsilon(1e-10));
  CHECK(std::abs(j2.channels()[1].coefficient) == doctest::Approx(std::sqrt(0.7)).epsilon(1e-10));

  const auto j3 = entangle(two_waves(0.3), Observable{}, separated(3.0));
  CHECK_FALSE(j3.ideal());
  CHECK_FALSE(j3.diagnostic().empty());

  CHECK_THROWS_AS(entangle(two_waves(0.3), Observable{0.0, 1.0}, p), Error);
  SystemState dup;
  dup.n = {1, 1};
  dup.c = {1.0, 1.0};
  CHECK_THROWS_AS(entangle(dup, Observable{}, p), Error);
}

TEST_CASE("joint guidance satisfies continuity during and after the coupling") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(0, 2 * kPi), uy(-3, 6), ut(0.05, 1.9);
  for (double mass : {std::numeric_limits<double>::infinity(), 3.0}) {
    SystemState s;
    s.n = {1, -1, 0};
    s.c = {0.6, cplx(0.3, 0.5), 0.4};
    PointerSpec p = separated(4.0, mass);
    const auto j = entangle(s, Observable{1.3, -0.2}, p);
    const auto rho = [&](const std::vector<double>& q, double t) { return std::norm(j.evaluate(q[0], q[1], t).psi); };
    const auto vel = [&](const std::vector<double>& q, double t) {
      const auto v = j.velocity(q[0], q[1], t);
      return std::vector<double>{v[0], v[1]};
    };
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      double t = ut(rng);
      if (std::abs(t - 1.0) < 0.01) t += 0.05;
      const std::vector<double> at{ux(rng), uy(rng)};
      const double coarse = continuity_defect(rho, vel, at, t, 1e-3), fine = continuity_defect(rho, vel, at, t, 1e-4);
      // what remains is difference-quotient error: it drops as h^2
      if (fine > 1e-9) CHECK(std::log10(coarse / fine) == doctest::Approx(2.0).epsilon(0.05));
      worst = std::max(worst, fine);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("grid sampler: marginal then conditional") {
  // density on a diagonal band: y cell equals x cell
  const int n = 8;
  std::vector<double> d(n * n, 0.0);
  for (int i = 0; i < n; ++i) d[static_cast<size_t>(i * n + i)] = 1.0 + i;
  const GridSampler s({0, 0}, {1, 1}, {n, n}, d);
  auto rng = make_rng(1, 2, 3);
  double mean = 0.0;
  const int draws = 20000;
  for (int k = 0; k < draws; ++k) {
    const auto p = s.draw(rng);
    CHECK(static_cast<int>(p[0] * n) == static_cast<int>(p[1] * n));
    mean += p[0] / draws;
  }
  // oracle: sum (i + 1)(i + 0.5)/n / sum (i + 1)
  double num = 0, den = 0;
  for (int i = 0; i < n; ++i) {
    num += (1.0 + i) * (i + 0.5) / n;
    den += 1.0 + i;
  }
  CHECK(std::abs(mean - num / den) < 4 * 0.3 / std::sqrt(draws));
  CHECK_THROWS_AS(GridSampler({0}, {1}, {2}, {0.0, 0.0}), Error);
  CHECK_THROWS_AS(GridSampler({0}, {1}, {2}, {1.0, -1.0}), Error);
}

TEST_CASE("run_ensemble: Born frequencies, single channel, relabeling, threads") {
  const auto joint = entangle(two_waves(0.3), Observable{}, separated(10.0));
  EnsembleSettings st;
  st.samples = 2000;
  st.grid_x = st.grid_y = 128;
  const auto r = run_ensemble(joint, st);
  CHECK(r.passed);
  CHECK(r.gap_hits == 0);
  CHECK(r.failures == 0);
  CHECK(std::abs(r.z[0]) < 4.0);
  CHECK(r.hits[0] + r.hits[1] == 2000);
  CHECK(r.max_guidance_deviation < 1e-6);

  const auto swapped = entangle(two_waves(0.7, -1, 1), Observable{}, separated(10.0));
  const auto rs = run_ensemble(swapped, st);
  CHECK(rs.hits[0] == r.hits[1]);
  CHECK(rs.hits[1] == r.hits[0]);

  EnsembleSettings threaded = st;
  threaded.threads = 3;
  const auto rt = run_ensemble(joint, threaded);
  REQUIRE(rt.outcomes.size() == r.outcomes.size());
  for (size_t i = 0; i < r.outcomes.size(); i += 97) CHECK(rt.outcomes[i].y == r.outcomes[i].y);

  SystemState one;
  one.n = {3};
  one.c = {1.0};
  EnsembleSettings small = st;
  small.samples = 200;
  const auto r1 = run_ensemble(entangle(one, Observable{}, PointerSpec{}), small);
  CHECK(r1.frequency[0] == 1.0);
  CHECK(r1.passed);
}

TEST_CASE("overlapping channels do not pass") {
  const auto joint = entangle(two_waves(0.5), Observable{}, separated(2.0));
  EnsembleSettings st;
  st.samples = 300;
  st.grid_x = st.grid_y = 64;
  const auto r = run_ensemble(joint, st);
  CHECK_FALSE(r.ideal);
  CHECK_FALSE(r.passed);
}

TEST_CASE("momentum measurement follows the spectral weights") {
  SystemState s;
  s.n = {-1, 0, 2};
  s.c = {0.5, cplx(0.0, 0.7), std::sqrt(1.0 - 0.25 - 0.49)};
  PointerSpec p = separated(10.0);
  const auto joint = entangle(s, Observable{}, p);
  EnsembleSettings st;
  st.samples = 3000;
  st.grid_x = st.grid_y = 128;
  const auto r = run_ensemble(joint, st);
  CHECK(r.passed);
  for (size_t a = 0; a < 3; ++a) CHECK(std::abs(r.z[a]) < 4.0);
}

TEST_CASE("empty channels do not act; repeated measurement is idempotent") {
  const auto joint = entangle(two_waves(0.4), Observable{}, separated(10.0, 50.0));
  EnsembleSettings st;
  st.samples = 40;
  st.grid_x = st.grid_y = 64;
  const auto r = run_ensemble(joint, st);
  for (size_t i = 0; i < r.outcomes.size(); i += 8) {
    const auto& o = r.outcomes[i];
    REQUIRE(o.channel >= 0);
    CHECK(empty_channel_deviation(joint, o.x, o.y, 3.0, 1e-11) < 1e-8);
  }
  const auto rep = remeasure(joint, st);
  CHECK(rep.idempotent);
  for (double a : rep.agreement) CHECK(a == 1.0);
}

TEST_CASE("momentum_distribution: plane wave and standing wave") {
  const double edges[] = {-2.5, -1.5, -0.5, 0.5, 1.5, 2.5};
  SystemState plane;
  plane.n = {1};
  plane.c = {1.0};
  CHECK(momentum_distribution(plane, 0.3, edges).tv_distance < 1e-12);
  SystemState standing;
  standing.n = {1, -1};
  standing.c = {1.0, 1.0};
  const auto d = momentum_distribution(standing, 0.7, edges);
  CHECK(d.bohmian[2] == doctest::Approx(1.0));
  CHECK(d.spectral[1] == doctest::Approx(0.5));
  CHECK(d.spectral[3] == doctest::Approx(0.5));
  CHECK(d.tv_distance == doctest::Approx(1.0));

  // a one-dimensional ModeSum: the spectral side carries its plane-wave weights
  relkin::Mode m1, m2;
  m1.k = {1, 0, 0};
  m1.amplitude = 1.0;
  m2.k = {-2, 0, 0};
  m2.amplitude = 0.5;
  const relkin::ModeSum wave(1.0, 1, {m1, m2});
  const auto dw = momentum_distribution(wave, 0.0, edges);
  const double w1 = 1.0 / wave.frequency(0), w2 = 0.25 / wave.frequency(1);
  CHECK(dw.spectral[3] == doctest::Approx(w1 / (w1 + w2)));
  CHECK(dw.tv_distance > 0.05);
  const auto sys = system_from_mode_sum(wave, 0.4);
  CHECK(sys.n == std::vector<int>{1, -2});
}

TEST_CASE("number pointer guidance satisfies continuity") {
  qft::LatticeSpec ls;
  ls.modes = 2;
  ls.n_max = 3;
  const qft::LatticeModel model(ls);
  const auto state = qft::make_state(model.lattice(), {{{0, 0}, 1.0}, {{1, 1}, cplx(0.2, 0.6)}, {{2, 0}, 0.5}, {{0, 1}, 0.3}});
  PointerSpec p;
  p.coupling = 0.7;
  p.duration = 3.0;
  p.width = 1.3;
  const NumberPointer np(model, state, p);
  const auto rho = [&](const std::vector<double>& c, double t) { return np.density({c.data(), 2}, c[2], t); };
  const auto vel = [&](const std::vector<double>& c, double t) { return np.velocity({c.data(), 2}, c[2], t); };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uq(-1.5, 1.5), uy(-1, 3), ut(0.1, 2.8);
  double worst = 0.0;
  for (int i = 0; i < 40; ++i) worst = std::max(worst, continuity_defect(rho, vel, {uq(rng), uq(rng), uy(rng)}, ut(rng), 1e-4));
  CHECK(worst < 1e-5);
}

TEST_CASE("effectivity collapse") {
  qft::LatticeSpec ls;
  ls.modes = 1;
  ls.n_max = 4;
  const qft::LatticeModel model(ls);
  CollapseSpec cs;
  cs.pointer.coupling = 1.0;
  cs.pointer.duration = 10.0;
  cs.runs = 100;
  cs.trace_points = 5;

  const auto one = qft::make_state(model.lattice(), {{{1}, 1.0}});
  const auto r1 = effectivity_collapse(model, one, cs);
  CHECK(r1.passed);
  for (const auto& run : r1.runs)
    for (const auto& [t, e] : run.trace) CHECK(e[1] == 1.0);

  const auto sup = qft::make_state(model.lattice(), {{{0}, 1.0}, {{2}, 1.0}});
  const auto r = effectivity_collapse(model, sup, cs);
  CHECK(r.ideal);
  CHECK(r.failures == 0);
  CHECK(r.uncollapsed == 0);
  CHECK(r.hits[0] + r.hits[2] == 100);
  CHECK(std::abs(r.z[0]) < 4.0);
  int interior = 0;
  for (const auto& run : r.runs) interior += run.e_initial[0] > 0.0 && run.e_initial[0] < 1.0;
  CHECK(interior == 100);

  CollapseSpec weak = cs;
  weak.pointer.coupling = 0.1;
  weak.runs = 20;
  const auto rw = effectivity_collapse(model, sup, weak);
  CHECK_FALSE(rw.ideal);
  CHECK_FALSE(rw.passed);

  ls.coupling = 0.5;
  const qft::LatticeModel interacting(ls);
  CHECK_THROWS_AS(effectivity_collapse(interacting, sup, cs), Error);
}
