#include "bohm/traject.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "bohm/error.hpp"

namespace bohm::traject {

using relkin::Derivatives;
using relkin::evaluate;

namespace {

double j0_at(const ModeSum& wave, const FourVector& x) {
  return relkin::current(evaluate(wave, x, Derivatives::first))[0];
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

FourVector from_state(int dim, std::span<const double> y) {
  FourVector x(dim);
  for (int mu = 0; mu <= dim; ++mu) x[mu] = y[static_cast<size_t>(mu)];
  return x;
}

ode::State to_state(const FourVector& x) {
  return ode::State(x.c.begin(), x.c.begin() + x.size());
}

ode::Rhs tau_rhs(const ModeSum& wave) {
  return [&wave](double, std::span<const double> y, std::span<double> dydt) {
    const FourVector u = tau_velocity(wave, from_state(wave.dim(), y));
    for (int mu = 0; mu <= wave.dim(); ++mu) dydt[static_cast<size_t>(mu)] = u[mu];
  };
}

const ode::Step* segment_for(const Trajectory& traj, double tau) {
  for (const auto& s : traj.segments) {
    const double lo = std::min(s.t0, s.t1()), hi = std::max(s.t0, s.t1());
    if (tau >= lo && tau <= hi) return &s;
  }
  return nullptr;
}

}  // namespace

const char* to_string(TrajStatus s) {
  switch (s) {
    case TrajStatus::completed: return "completed";
    case TrajStatus::hit_node: return "hit_node";
    case TrajStatus::left_domain: return "left_domain";
    case TrajStatus::step_underflow: return "step_underflow";
  }
  return "unknown";
}

FourVector tau_velocity(const ModeSum& wave, const FourVector& x) {
  const auto s = evaluate(wave, x, Derivatives::first);
  if (s.at_node()) throw NodeError("guidance undefined at a node of psi");
  const FourVector j = relkin::current(s);
  const double scale = 1.0 / (2.0 * wave.mass() * s.density());
  FourVector u = scale * j.flipped();  // j^mu
  return u;
}

CoordinateVelocity coordinate_velocity(const ModeSum& wave, double t, const SpatialVector& x) {
  FourVector p(wave.dim());
  p[0] = t;
  for (int i = 0; i < wave.dim(); ++i) p[i + 1] = x[static_cast<size_t>(i)];
  const FourVector j = relkin::current(evaluate(wave, p, Derivatives::first)).flipped();
  double jmag = 0.0;
  for (int i = 1; i <= wave.dim(); ++i) jmag = std::max(jmag, std::abs(j[i]));
  if (j[0] == 0.0 || std::abs(j[0]) <= 1e-12 * jmag)
    fail(ErrorKind::numerical, "j0 vanishes: coordinate velocity is infinite");
  CoordinateVelocity cv;
  double v2 = 0.0;
  for (int i = 0; i < wave.dim(); ++i) {
    cv.v[static_cast<size_t>(i)] = j[i + 1] / j[0];
    v2 += cv.v[static_cast<size_t>(i)] * cv.v[static_cast<size_t>(i)];
  }
  cv.speed = std::sqrt(v2);
  if (std::abs(cv.speed - 1.0) <= 1e-12)
    cv.kind = VelocityClass::luminal;
  else
    cv.kind = cv.speed < 1.0 ? VelocityClass::subluminal : VelocityClass::superluminal;
  return cv;
}

FourVector Trajectory::position(double tau) const {
  const ode::Step* s = segment_for(*this, tau);
  require(s != nullptr, "tau outside the integrated range");
  return from_state(dim, s->interpolate(tau));
}

double Trajectory::t_min() const {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& p : points) t = std::min(t, p.x[0]);
  for (const auto& e : reversals) t = std::min(t, e.x[0]);
  return t;
}

double Trajectory::t_max() const {
  double t = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) t = std::max(t, p.x[0]);
  for (const auto& e : reversals) t = std::max(t, e.x[0]);
  return t;
}

Trajectory integrate(const ModeSum& wave, const FourVector& x0, double tau_span,
                     const IntegrateOptions& opts) {
  require(x0.dim == wave.dim(), "start point dimension does not match the wave");
  for (int mu = 0; mu <= x0.dim; ++mu) require(std::isfinite(x0[mu]), "start point must be finite");
  require(std::isfinite(tau_span), "tau span must be finite");

  Trajectory traj;
  traj.dim = wave.dim();
  const FourVector u0 = tau_velocity(wave, x0);  // throws at a node
  traj.points.push_back({0.0, x0, u0, sign_of(j0_at(wave, x0))});
  if (tau_span == 0.0) return traj;

  const ode::Rhs rhs = tau_rhs(wave);
  ode::Options o;
  o.rtol = 0.0;  // absolute per-step error: coordinates grow along the path
  o.atol = opts.tol;
  o.h_max = opts.h_max;
  o.max_steps = opts.max_steps;

  int current_sign = traj.points.front().j0_sign;
  bool left = false;
  auto observer = [&](const ode::Step& step) {
    auto j0_tau = [&](double tau) { return j0_at(wave, from_state(wave.dim(), step.interpolate(tau))); };
    double prev_tau = step.t0;
    for (int i = 1; i <= opts.event_samples; ++i) {
      const double tau = step.t0 + step.h * static_cast<double>(i) / opts.event_samples;
      const double g = j0_tau(tau);
      const int sg = sign_of(g);
      if (sg != 0 && current_sign != 0 && sg != current_sign) {
        const double root = ode::bisect_root(j0_tau, prev_tau, tau, opts.event_tol);
        ReversalEvent ev;
        ev.tau = root;
        ev.x = from_state(wave.dim(), step.interpolate(root));
        ev.j0 = j0_at(wave, ev.x);
        ev.sign_after = sg;
        traj.reversals.push_back(ev);
      }
      if (sg != 0) current_sign = sg;
      prev_tau = tau;
    }
    traj.segments.push_back(step);
    const FourVector x = from_state(wave.dim(), step.y1);
    traj.points.push_back({step.t1(), x, tau_velocity(wave, x), sign_of(j0_at(wave, x))});
    for (int mu = 1; mu <= x.dim; ++mu) {
      if (std::abs(x[mu]) > opts.max_coordinate) {
        left = true;
        return false;
      }
    }
    return true;
  };

  const ode::Result res = ode::integrate(rhs, 0.0, to_state(x0), tau_span, o, observer);
  switch (res.outcome) {
    case ode::Outcome::completed: traj.status = TrajStatus::completed; break;
    case ode::Outcome::stopped:
      traj.status = left ? TrajStatus::left_domain : TrajStatus::completed;
      break;
    case ode::Outcome::node: traj.status = TrajStatus::hit_node; break;
    case ode::Outcome::step_underflow:
    case ode::Outcome::max_steps: traj.status = TrajStatus::step_underflow; break;
  }
  traj.message = res.message;
  return traj;
}

int CrossingRecord::signed_count() const {
  int s = 0;
  for (const auto& c : crossings) s += c.sign;
  return s;
}

CrossingRecord crossings(const Trajectory& traj, double t_slice, double tol) {
  CrossingRecord rec;
  rec.t_slice = t_slice;
  if (traj.segments.empty() || t_slice < traj.t_min() || t_slice > traj.t_max()) {
    rec.out_of_range = true;
    return rec;
  }
  constexpr int kSubdivisions = 4;
  for (const auto& seg : traj.segments) {
    // Pieces between reversals are monotone in t; subdivide further for safety.
    std::vector<double> cuts{seg.t0};
    for (const auto& ev : traj.reversals) {
      const double lo = std::min(seg.t0, seg.t1()), hi = std::max(seg.t0, seg.t1());
      if (ev.tau > lo && ev.tau < hi) cuts.push_back(ev.tau);
    }
    cuts.push_back(seg.t1());
    if (seg.h > 0) std::sort(cuts.begin(), cuts.end());
    else std::sort(cuts.begin(), cuts.end(), std::greater<>());
    std::vector<double> probes;
    for (size_t i = 0; i + 1 < cuts.size(); ++i)
      for (int s = 0; s < kSubdivisions; ++s)
        probes.push_back(cuts[i] + (cuts[i + 1] - cuts[i]) * s / kSubdivisions);
    probes.push_back(cuts.back());

    auto f = [&](double tau) { return seg.interpolate(tau, 0) - t_slice; };
    double fa = f(probes.front());
    for (size_t i = 1; i < probes.size(); ++i) {
      const double fb = f(probes[i]);
      if ((fa < 0.0) != (fb < 0.0)) {
        const double root = ode::bisect_root(f, probes[i - 1], probes[i], tol);
        Crossing c;
        c.tau = root;
        c.x = from_state(traj.dim, seg.interpolate(root));
        // dt/dtau has the sign of j0 along the path.
        const double dt = seg.interpolate(root + 1e-7 * seg.h, 0) - seg.interpolate(root - 1e-7 * seg.h, 0);
        c.sign = sign_of(dt) * (seg.h > 0 ? 1 : -1);
        rec.crossings.push_back(c);
      }
      fa = fb;
    }
  }
  return rec;
}

double eom_residual(const ModeSum& wave, const Trajectory& traj, double fd_step) {
  require(traj.points.size() >= 5, "eom_residual needs at least five trajectory points");
  require(fd_step > 0.0, "finite-difference step must be positive");
  const ode::Rhs rhs = tau_rhs(wave);
  const double m = wave.mass();
  double worst = 0.0;
  int used = 0;
  for (size_t i = 1; i + 1 < traj.points.size(); ++i) {
    const FourVector& x = traj.points[i].x;
    try {
      const ode::State y = to_state(x);
      const ode::State up = ode::step_increment(rhs, 0.0, y, fd_step);
      const ode::State dn = ode::step_increment(rhs, 0.0, y, -fd_step);
      for (int mu = 0; mu <= x.dim; ++mu) {
        const double acc = (up[static_cast<size_t>(mu)] + dn[static_cast<size_t>(mu)]) / (fd_step * fd_step);
        FourVector xp = x, xm = x;
        xp[mu] += fd_step;
        xm[mu] -= fd_step;
        double dq = (relkin::quantum_potential(wave, xp) - relkin::quantum_potential(wave, xm)) / (2.0 * fd_step);
        if (mu > 0) dq = -dq;  // raise the index
        worst = std::max(worst, std::abs(m * acc - dq));
      }
      ++used;
    } catch (const NodeError&) {
      continue;
    }
  }
  require(used >= 3, "too few trajectory points clear of nodes");
  return worst;
}

double phase_identity_residual(const ModeSum& wave, const Trajectory& traj, double fd_step) {
  const ode::Rhs rhs = tau_rhs(wave);
  double worst = 0.0;
  for (const auto& p : traj.points) {
    const auto s0 = evaluate(wave, p.x, Derivatives::first);
    const auto pol = relkin::polar(s0);
    const ode::State y = to_state(p.x);
    const ode::State up = ode::step_increment(rhs, 0.0, y, fd_step);
    const ode::State dn = ode::step_increment(rhs, 0.0, y, -fd_step);
    FourVector xp = p.x, xm = p.x;
    for (int mu = 0; mu <= p.x.dim; ++mu) {
      xp[mu] += up[static_cast<size_t>(mu)];
      xm[mu] += dn[static_cast<size_t>(mu)];
    }
    const double sp = relkin::polar(evaluate(wave, xp, Derivatives::first), pol).S;
    const double sm = relkin::polar(evaluate(wave, xm, Derivatives::first), pol).S;
    const double ds_dtau = (sp - sm) / (2.0 * fd_step);
    double u_ds = 0.0;
    for (int mu = 0; mu <= p.x.dim; ++mu) u_ds += p.u[mu] * pol.dS[mu];
    worst = std::max(worst, std::abs(ds_dtau - u_ds));
  }
  return worst;
}

double guidance_consistency(const ModeSum& wave, const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& p : traj.points) {
    const auto pol = relkin::polar(evaluate(wave, p.x, Derivatives::first));
    const FourVector ds_up = pol.dS.flipped();
    for (int mu = 0; mu <= p.x.dim; ++mu)
      worst = std::max(worst, std::abs(p.u[mu] + ds_up[mu] / wave.mass()));
  }
  return worst;
}

double hamilton_jacobi_on_path(const ModeSum& wave, const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& p : traj.points)
    worst = std::max(worst, std::abs(relkin::hamilton_jacobi_residual(evaluate(wave, p.x), wave.mass())));
  return worst;
}

namespace {

struct DenseRun {
  std::vector<ode::Step> steps;
  ode::State at(double t) const {
    for (const auto& s : steps)
      if (t >= std::min(s.t0, s.t1()) && t <= std::max(s.t0, s.t1())) return s.interpolate(t);
    return steps.back().y1;
  }
};

DenseRun run_dense(const ode::Rhs& rhs, const ode::State& y0, double t_span, double tol) {
  DenseRun run;
  ode::Options o;
  o.rtol = tol;
  o.atol = tol;
  const auto res = ode::integrate(rhs, 0.0, y0, t_span, o, [&](const ode::Step& s) {
    run.steps.push_back(s);
    return true;
  });
  if (res.outcome != ode::Outcome::completed)
    fail(ErrorKind::numerical, "nonrelativistic comparison: integration failed: " + res.message);
  return run;
}

}  // namespace

NonrelComparison nonrel_compare(const ModeSum& wave, const SpatialVector& x0, double t_span,
                                double tol, int samples) {
  const double m = wave.mass();
  const int dim = wave.dim();
  NonrelComparison out;
  for (const auto& mode : wave.modes()) {
    double k2 = 0.0;
    for (int i = 0; i < dim; ++i) k2 += mode.k[static_cast<size_t>(i)] * mode.k[static_cast<size_t>(i)];
    out.epsilon = std::max(out.epsilon, std::sqrt(k2) / m);
  }
  require(out.epsilon <= 0.1 + 1e-12,
          "nonrelativistic limit not applicable: mode momenta exceed 0.1 m");
  require(t_span > 0.0 && samples >= 2, "t_span must be positive");

  out.min_j0 = std::numeric_limits<double>::infinity();
  ode::Rhs kg = [&](double t, std::span<const double> y, std::span<double> dydt) {
    FourVector x(dim);
    x[0] = t;
    for (int i = 0; i < dim; ++i) x[i + 1] = y[static_cast<size_t>(i)];
    const FourVector j = relkin::current(evaluate(wave, x, Derivatives::first)).flipped();
    out.min_j0 = std::min(out.min_j0, j[0]);
    if (j[0] <= 0.0) fail(ErrorKind::numerical, "j0 <= 0 along the path: nonrelativistic limit not applicable");
    for (int i = 0; i < dim; ++i) dydt[static_cast<size_t>(i)] = j[i + 1] / j[0];
  };

  std::vector<relkin::cplx> b;
  for (size_t i = 0; i < wave.size(); ++i) b.push_back(std::sqrt(2.0 * m) * wave.plane_wave_coefficient(i));
  ode::Rhs schr = [&](double t, std::span<const double> y, std::span<double> dydt) {
    relkin::cplx chi{};
    std::array<relkin::cplx, 3> grad{};
    for (size_t n = 0; n < wave.size(); ++n) {
      const auto& k = wave.modes()[n].k;
      double phase = 0.0, k2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        phase += k[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
        k2 += k[static_cast<size_t>(i)] * k[static_cast<size_t>(i)];
      }
      phase -= k2 * t / (2.0 * m);
      const relkin::cplx e = b[n] * std::polar(1.0, phase);
      chi += e;
      for (int i = 0; i < dim; ++i) grad[static_cast<size_t>(i)] += relkin::cplx(0.0, k[static_cast<size_t>(i)]) * e;
    }
    if (std::norm(chi) == 0.0) throw NodeError("node of the Schroedinger wave");
    for (int i = 0; i < dim; ++i) dydt[static_cast<size_t>(i)] = std::imag(grad[static_cast<size_t>(i)] / chi) / m;
  };

  const ode::State y0(x0.begin(), x0.begin() + dim);
  const DenseRun a = run_dense(kg, y0, t_span, tol);
  const DenseRun s = run_dense(schr, y0, t_span, tol);
  for (int i = 0; i <= samples; ++i) {
    const double t = t_span * i / samples;
    const ode::State xa = a.at(t), xs = s.at(t);
    double dev = 0.0, disp = 0.0;
    for (int d = 0; d < dim; ++d) {
      dev += (xa[static_cast<size_t>(d)] - xs[static_cast<size_t>(d)]) * (xa[static_cast<size_t>(d)] - xs[static_cast<size_t>(d)]);
      disp += (xs[static_cast<size_t>(d)] - y0[static_cast<size_t>(d)]) * (xs[static_cast<size_t>(d)] - y0[static_cast<size_t>(d)]);
    }
    out.max_deviation = std::max(out.max_deviation, std::sqrt(dev));
    out.displacement = std::max(out.displacement, std::sqrt(disp));
  }
  out.relative_deviation = out.displacement > 0.0 ? out.max_deviation / out.displacement : out.max_deviation;
  return out;
}

void write_trajectory(std::ostream& os, const ModeSum& wave, const Trajectory& traj) {
  const int dim = traj.dim;
  static const char* axes[] = {"x", "y", "z"};
  os << "tau\tt";
  for (int i = 0; i < dim; ++i) os << '\t' << axes[i];
  os << "\tu0";
  for (int i = 0; i < dim; ++i) os << "\tu" << axes[i];
  os << "\tj0\tR\tS\tQ\n";
  os << std::setprecision(17);
  double prev_s = 0.0;
  bool have_prev = false;
  for (const auto& p : traj.points) {
    const auto smp = evaluate(wave, p.x);
    double s = std::arg(smp.psi);
    if (have_prev) s += 2.0 * std::numbers::pi * std::round((prev_s - s) / (2.0 * std::numbers::pi));
    prev_s = s;
    have_prev = true;
    os << p.tau;
    for (int mu = 0; mu <= dim; ++mu) os << '\t' << p.x[mu];
    for (int mu = 0; mu <= dim; ++mu) os << '\t' << p.u[mu];
    os << '\t' << relkin::current(smp)[0] << '\t' << std::abs(smp.psi) << '\t' << s << '\t'
       << relkin::quantum_potential(smp, wave.mass()) << '\n';
  }
}

void write_reversals(std::ostream& os, const Trajectory& traj) {
  static const char* axes[] = {"x", "y", "z"};
  os << "tau\tt";
  for (int i = 0; i < traj.dim; ++i) os << '\t' << axes[i];
  os << "\tj0\tsign_after\n" << std::setprecision(17);
  for (const auto& e : traj.reversals) {
    os << e.tau;
    for (int mu = 0; mu <= traj.dim; ++mu) os << '\t' << e.x[mu];
    os << '\t' << e.j0 << '\t' << e.sign_after << '\n';
  }
}

void write_crossings(std::ostream& os, const CrossingRecord& rec) {
  os << "t_slice\ttau\tx\tsign\n" << std::setprecision(17);
  for (const auto& c : rec.crossings)
    os << rec.t_slice << '\t' << c.tau << '\t' << c.x[1] << '\t' << c.sign << '\n';
}

}  // namespace bohm::traject
