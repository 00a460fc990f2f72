#include <doctest.h>

#include <cmath>

#include "bohm/error.hpp"
#include "bohm/ode.hpp"

using namespace bohm;

namespace {

ode::Rhs oscillator() {
  return [](double, std::span<const double> y, std::span<double> f) {
    f[0] = y[1];
    f[1] = -y[0];
  };
}

}  // namespace

TEST_CASE("ode: harmonic oscillator to tolerance, both directions") {
  ode::Options o;
  o.rtol = o.atol = 1e-11;
  for (double T : {10.0, -10.0}) {
    const auto r = ode::integrate(oscillator(), 0.0, {1.0, 0.0}, T, o);
    REQUIRE(r.outcome == ode::Outcome::completed);
    CHECK(r.t == T);
    CHECK(r.y[0] == doctest::Approx(std::cos(T)).epsilon(1e-8).scale(1.0));
    CHECK(r.y[1] == doctest::Approx(-std::sin(T)).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("ode: dense output is accurate inside steps") {
  ode::Options o;
  o.rtol = o.atol = 1e-10;
  double worst = 0.0;
  ode::integrate(oscillator(), 0.0, {1.0, 0.0}, 6.0, o, [&](const ode::Step& s) {
    for (int i = 1; i < 5; ++i) {
      const double t = s.t0 + s.h * i / 5.0;
      worst = std::max(worst, std::abs(s.interpolate(t, 0) - std::cos(t)));
      CHECK(s.interpolate(t)[1] == doctest::Approx(s.interpolate(t, 1)));
    }
    CHECK(s.interpolate(s.t1(), 0) == doctest::Approx(s.y1[0]).epsilon(1e-14).scale(1.0));
    return true;
  });
  CHECK(worst < 1e-8);
}

TEST_CASE("ode: observer can stop the run") {
  int n = 0;
  const auto r = ode::integrate(oscillator(), 0.0, {1.0, 0.0}, 100.0, {}, [&](const ode::Step&) { return ++n < 3; });
  CHECK(r.outcome == ode::Outcome::stopped);
  CHECK(r.accepted == 3);
}

TEST_CASE("ode: step retry around a forbidden point, and node report") {
  // dy/dt = 1 with the rhs undefined beyond y = 0.5: steps shrink, then a node is reported
  ode::Rhs rhs = [](double, std::span<const double> y, std::span<double> f) {
    if (y[0] > 0.5) throw NodeError("blocked");
    f[0] = 1.0;
  };
  const auto r = ode::integrate(rhs, 0.0, {0.0}, 1.0, {});
  CHECK(r.outcome == ode::Outcome::node);
  CHECK(r.t <= 0.5 + 1e-12);
}

TEST_CASE("ode: step_increment is fifth order") {
  auto err = [](double h) {
    const auto inc = ode::step_increment(oscillator(), 0.0, std::vector<double>{1.0, 0.0}, h);
    return std::abs(1.0 + inc[0] - std::cos(h));
  };
  const double ratio = err(0.1) / err(0.05);
  CHECK(std::log2(ratio) == doctest::Approx(6.0).epsilon(0.1));
}

TEST_CASE("ode: bisect_root") {
  const double r = ode::bisect_root([](double x) { return x * x - 2.0; }, 0.0, 2.0, 1e-13);
  CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(ode::bisect_root([](double x) { return x * x + 1; }, 0.0, 1.0, 1e-6), Error);
}
