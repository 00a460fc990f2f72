#pragma once

// Embedded Dormand-Prince 5(4) integrator with continuous (dense) output.

#include <array>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace bohm::ode {

using State = std::vector<double>;

/// dydt = f(t, y). May throw bohm::NodeError for points where the field is
/// undefined; the integrator then retries with a smaller step.
using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct Options {
  double rtol = 1e-9;
  double atol = 1e-9;
  double h_init = 0.0;  // 0 selects automatically
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 2'000'000;
};

/// One accepted step with the stage derivatives needed for dense output.
struct Step {
  double t0 = 0.0;
  double h = 0.0;
  State y0;
  State y1;
  std::array<State, 7> k;

  double t1() const { return t0 + h; }
  /// 4th-order continuous extension, valid for t between t0 and t0 + h.
  State interpolate(double t) const;
  double interpolate(double t, size_t component) const;
};

enum class Outcome { completed, stopped, node, step_underflow, max_steps };

struct Result {
  Outcome outcome = Outcome::completed;
  double t = 0.0;
  State y;
  long accepted = 0;
  long rejected = 0;
  std::string message;
};

/// Called after every accepted step; return false to stop integrating.
using StepObserver = std::function<bool(const Step&)>;

/// Integrates from t0 to t_end (either direction).
Result integrate(const Rhs& rhs, double t0, const State& y0, double t_end, const Options& opts,
                 const StepObserver& observer = {});

/// A single unchecked Dormand-Prince step of size h. Returns the increment
/// y(t0 + h) - y0 so that callers differencing nearby steps keep precision.
State step_increment(const Rhs& rhs, double t0, std::span<const double> y0, double h);

/// Bisection for a sign change of g on [a, b] (g(a) and g(b) must differ in
/// sign or one must vanish). Stops when the bracket is shorter than tol.
double bisect_root(const std::function<double(double)>& g, double a, double b, double tol);

}  // namespace bohm::ode
