#include "bohm/ode.hpp"

#include <algorithm>
#include <cmath>

#include "bohm/error.hpp"

namespace bohm::ode {

namespace {

constexpr std::array<double, 7> C{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double A[7][6] = {
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr std::array<double, 7> B{35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
// B - B_hat (embedded 4th-order weights)
constexpr std::array<double, 7> E{-71.0 / 57600, 0, 71.0 / 16695, -71.0 / 1920,
                                  17253.0 / 339200, -22.0 / 525, 1.0 / 40};
// Shampine's continuous extension: weight_i(theta) = sum_j P[i][j] theta^(j+1)
constexpr double P[7][4] = {
    {1, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
    {0, 0, 0, 0},
    {0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
    {0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
    {0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
    {0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
    {0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423},
};

std::array<double, 7> dense_weights(double theta) {
  std::array<double, 7> w{};
  for (size_t i = 0; i < 7; ++i) {
    double p = theta, acc = 0.0;
    for (size_t j = 0; j < 4; ++j) {
      acc += P[i][j] * p;
      p *= theta;
    }
    w[i] = acc;
  }
  return w;
}

// Fills k[1..6] given k[0] = f(t0, y0); y1 receives the 5th-order solution.
void stages(const Rhs& rhs, double t0, std::span<const double> y0, double h,
            std::array<State, 7>& k, State& y1) {
  const size_t n = y0.size();
  State tmp(n);
  for (size_t s = 1; s < 7; ++s) {
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < s; ++j) acc += A[s][j] * k[j][i];
      tmp[i] = y0[i] + h * acc;
    }
    k[s].resize(n);
    rhs(t0 + C[s] * h, tmp, k[s]);
  }
  y1 = tmp;  // row 6 of A equals B, so the last stage point is the solution
}

double error_norm(const std::array<State, 7>& k, const State& y0, const State& y1, double h,
                  const Options& opts) {
  double acc = 0.0;
  for (size_t i = 0; i < y0.size(); ++i) {
    double e = 0.0;
    for (size_t s = 0; s < 7; ++s) e += E[s] * k[s][i];
    e *= h;
    const double sc = opts.atol + opts.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    acc += (e / sc) * (e / sc);
  }
  return std::sqrt(acc / static_cast<double>(y0.size()));
}

double initial_step(const Rhs& rhs, double t0, const State& y0, const State& f0, double dir,
                    const Options& opts) {
  double d0 = 0.0, d1 = 0.0;
  for (size_t i = 0; i < y0.size(); ++i) {
    const double sc = opts.atol + opts.rtol * std::abs(y0[i]);
    d0 += (y0[i] / sc) * (y0[i] / sc);
    d1 += (f0[i] / sc) * (f0[i] / sc);
  }
  d0 = std::sqrt(d0 / y0.size());
  d1 = std::sqrt(d1 / y0.size());
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, opts.h_max);
  State y1(y0.size()), f1(y0.size());
  for (size_t i = 0; i < y0.size(); ++i) y1[i] = y0[i] + dir * h0 * f0[i];
  try {
    rhs(t0 + dir * h0, y1, f1);
  } catch (const NodeError&) {
    return h0 * 1e-3;
  }
  double d2 = 0.0;
  for (size_t i = 0; i < y0.size(); ++i) {
    const double sc = opts.atol + opts.rtol * std::abs(y0[i]);
    d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
  }
  d2 = std::sqrt(d2 / y0.size()) / h0;
  const double h1 = (std::max(d1, d2) <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                  : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  return std::min({100 * h0, h1, opts.h_max});
}

}  // namespace

State Step::interpolate(double t) const {
  const double theta = h == 0.0 ? 0.0 : (t - t0) / h;
  const auto w = dense_weights(theta);
  State y = y0;
  for (size_t i = 0; i < y.size(); ++i) {
    double acc = 0.0;
    for (size_t s = 0; s < 7; ++s) acc += w[s] * k[s][i];
    y[i] += h * acc;
  }
  return y;
}

double Step::interpolate(double t, size_t component) const {
  const double theta = h == 0.0 ? 0.0 : (t - t0) / h;
  const auto w = dense_weights(theta);
  double acc = 0.0;
  for (size_t s = 0; s < 7; ++s) acc += w[s] * k[s][component];
  return y0[component] + h * acc;
}

Result integrate(const Rhs& rhs, double t0, const State& y0, double t_end, const Options& opts,
                 const StepObserver& observer) {
  Result res;
  res.t = t0;
  res.y = y0;
  if (t_end == t0) return res;
  const double dir = t_end > t0 ? 1.0 : -1.0;
  const size_t n = y0.size();

  std::array<State, 7> k;
  k[0].resize(n);
  try {
    rhs(t0, y0, k[0]);
  } catch (const NodeError& e) {
    res.outcome = Outcome::node;
    res.message = e.what();
    return res;
  }

  double h = opts.h_init > 0.0 ? opts.h_init : initial_step(rhs, t0, y0, k[0], dir, opts);
  double t = t0;
  State y = y0, y1;
  bool last_rejected = false;

  for (long iter = 0; iter < opts.max_steps; ++iter) {
    const double remaining = std::abs(t_end - t);
    const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < h_min) {
      res.outcome = Outcome::step_underflow;
      res.message = "step size underflow";
      break;
    }
    bool final_step = false;
    if (h >= remaining) {
      h = remaining;
      final_step = true;
    }
    double err = 0.0;
    try {
      stages(rhs, t, y, dir * h, k, y1);
      err = error_norm(k, y, y1, dir * h, opts);
    } catch (const NodeError& e) {
      h *= 0.25;
      last_rejected = true;
      ++res.rejected;
      res.message = e.what();
      if (h < h_min) {
        res.outcome = Outcome::node;
        break;
      }
      continue;
    }
    if (!std::isfinite(err) || err > 1.0) {
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h *= fac;
      last_rejected = true;
      ++res.rejected;
      continue;
    }

    Step step;
    step.t0 = t;
    step.h = dir * h;
    step.y0 = y;
    step.y1 = y1;
    step.k = k;
    ++res.accepted;
    t = final_step ? t_end : t + dir * h;
    y = y1;
    k[0] = k[6];
    res.t = t;
    res.y = y;
    if (observer && !observer(step)) {
      res.outcome = Outcome::stopped;
      return res;
    }
    if (final_step) {
      res.outcome = Outcome::completed;
      res.message.clear();
      return res;
    }
    double fac = err == 0.0 ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    if (last_rejected) fac = std::min(1.0, fac);
    h = std::min(h * fac, opts.h_max);
    last_rejected = false;
    if (iter + 1 == opts.max_steps) {
      res.outcome = Outcome::max_steps;
      res.message = "maximum number of steps reached";
    }
  }
  if (res.outcome == Outcome::completed) {
    res.outcome = Outcome::max_steps;
    res.message = "maximum number of steps reached";
  }
  return res;
}

State step_increment(const Rhs& rhs, double t0, std::span<const double> y0, double h) {
  const size_t n = y0.size();
  std::array<State, 7> k;
  k[0].resize(n);
  rhs(t0, y0, k[0]);
  State y1;
  stages(rhs, t0, y0, h, k, y1);
  State inc(n);
  for (size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (size_t s = 0; s < 7; ++s) acc += B[s] * k[s][i];
    inc[i] = h * acc;
  }
  return inc;
}

double bisect_root(const std::function<double(double)>& g, double a, double b, double tol) {
  double ga = g(a);
  if (ga == 0.0) return a;
  double gb = g(b);
  if (gb == 0.0) return b;
  require((ga < 0.0) != (gb < 0.0), "bisect_root: no sign change on the bracket");
  while (std::abs(b - a) > tol) {
    const double mid = 0.5 * (a + b);
    if (mid == a || mid == b) break;
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm < 0.0) == (ga < 0.0)) {
      a = mid;
      ga = gm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace bohm::ode
