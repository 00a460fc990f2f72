#include "bohm/extract.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "bohm/error.hpp"
#include "bohm/hermite.hpp"
#include "bohm/ode.hpp"

namespace bohm::extract {

using qft::FunctionalState;
using qft::Lattice;
using qft::LatticeModel;

namespace {

int count_of(const Positions& x) { return static_cast<int>(x.size()); }

// phi-like operator sum_j g_j q_j applied to v.
Eigen::VectorXcd apply_linear(const Lattice& lat, std::span<const double> g, const Eigen::VectorXcd& v) {
  const int M = lat.modes();
  const int cap = lat.n_max();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
  std::vector<size_t> stride(static_cast<size_t>(M));
  for (int j = 0; j < M; ++j) {
    qft::OccIndex o(static_cast<size_t>(M), 0);
    if (cap > 0) o[static_cast<size_t>(j)] = 1;
    stride[static_cast<size_t>(j)] = cap > 0 ? lat.index(o) : 0;
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const cplx vi = v(i);
    if (vi == 0.0) continue;
    for (int j = 0; j < M; ++j) {
      const double gj = g[static_cast<size_t>(j)];
      if (gj == 0.0) continue;
      const int n = lat.occupation(static_cast<size_t>(i), j);
      const double s = gj / std::sqrt(2.0 * lat.omega(j));
      const auto st = static_cast<Eigen::Index>(stride[static_cast<size_t>(j)]);
      if (n > 0) out(i - st) += vi * (s * std::sqrt(static_cast<double>(n)));
      if (n < cap) out(i + st) += vi * (s * std::sqrt(n + 1.0));
    }
  }
  return out;
}

std::vector<double> field_weights(const Lattice& lat, const Position& x) {
  std::vector<double> g(static_cast<size_t>(lat.modes()));
  for (int j = 0; j < lat.modes(); ++j)
    g[static_cast<size_t>(j)] = lat.mode_function(j, std::span<const double>(x.data(), static_cast<size_t>(lat.spec().dim)));
  return g;
}

std::vector<double> gradient_weights(const Lattice& lat, const Position& x, int axis) {
  std::vector<double> g(static_cast<size_t>(lat.modes()));
  for (int j = 0; j < lat.modes(); ++j)
    g[static_cast<size_t>(j)] =
        lat.mode_gradient(j, std::span<const double>(x.data(), static_cast<size_t>(lat.spec().dim)))[static_cast<size_t>(axis)];
  return g;
}

void project_sector(const Lattice& lat, Eigen::VectorXcd& v, int n) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (lat.total_number(static_cast<size_t>(i)) != n) v(i) = 0.0;
}

Eigen::VectorXcd embed(const Lattice& from, const Lattice& to, const Eigen::VectorXcd& c) {
  if (from.n_max() == to.n_max()) return c;
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(to.basis_size()));
  for (size_t i = 0; i < from.basis_size(); ++i) out(static_cast<Eigen::Index>(to.index(from.occupation(i)))) = c(static_cast<Eigen::Index>(i));
  return out;
}

Eigen::VectorXcd state_at(const LatticeModel& model, const FunctionalState& state, double t) {
  return t == state.t ? state.c : model.propagate(state.c, t - state.t);
}

void check_args(const LatticeModel& model, const FunctionalState& state, const Positions& x) {
  const Lattice& lat = model.lattice();
  require(static_cast<size_t>(state.c.size()) == lat.basis_size(), "state does not match the lattice");
  require(count_of(x) >= 0 && count_of(x) <= lat.max_particles(),
          "particle count exceeds the truncation (M * n_max)");
  for (const auto& p : x)
    for (int d = 0; d < lat.spec().dim; ++d) require(std::isfinite(p[static_cast<size_t>(d)]), "positions must be finite");
}

// Equal-time ladder evaluation with one argument optionally replaced by a
// gradient component.
cplx equal_time_impl(const LatticeModel& model, const FunctionalState& state, const Positions& x, double t,
                     int grad_particle, int grad_axis) {
  check_args(model, state, x);
  const Lattice& lat = model.lattice();
  const int n = count_of(x);
  const Lattice big = lat.with_cutoff(std::max(lat.n_max(), n));
  Eigen::VectorXcd v = state_at(model, state, t);
  project_sector(lat, v, n);
  v = embed(lat, big, v);
  for (int k = n - 1; k >= 0; --k) {
    const auto g = k == grad_particle ? gradient_weights(big, x[static_cast<size_t>(k)], grad_axis)
                                      : field_weights(big, x[static_cast<size_t>(k)]);
    v = apply_linear(big, g, v);
  }
  return vacuum_phase_factor(model, t) * v(0);
}

}  // namespace

cplx vacuum_phase_factor(const LatticeModel& model, double t) {
  if (t == 0.0) return 1.0;
  const auto& V = model.eigenvectors();
  cplx amp{};
  for (Eigen::Index k = 0; k < V.cols(); ++k) amp += V(0, k) * V(0, k) * std::polar(1.0, -model.energies()(k) * t);
  const double r = std::abs(amp);
  if (r < 1e-14) fail(ErrorKind::numerical, "vacuum survival amplitude vanishes: phase undefined");
  return std::conj(amp) / r;
}

Eigen::VectorXcd apply_field(const Lattice& lat, const Position& x, const Eigen::VectorXcd& v) {
  require(static_cast<size_t>(v.size()) == lat.basis_size(), "vector does not match the lattice");
  return apply_linear(lat, field_weights(lat, x), v);
}

cplx equal_time_wf(const LatticeModel& model, const FunctionalState& state, const Positions& x, double t) {
  return equal_time_impl(model, state, x, t, -1, 0);
}

cplx quadrature_wf(const LatticeModel& model, const FunctionalState& state, const Positions& x, double t,
                   int points) {
  check_args(model, state, x);
  const Lattice& lat = model.lattice();
  const int n = count_of(x);
  const int M = lat.modes();
  const int need = lat.n_max() + n + 1;
  if (points == 0) points = need;
  if (points < need) fail(ErrorKind::under_resolved, "quadrature order below n_max + n + 1");
  const double nodes_total = std::pow(points, M);
  require(nodes_total <= 5e6, "quadrature grid too large");

  Eigen::VectorXcd c = state_at(model, state, t);
  project_sector(lat, c, n);
  const auto rule = hermite::gauss_hermite(points);
  const size_t L = static_cast<size_t>(lat.n_max() + 1);
  // polynomial parts p_k(x_i) at every node, shared by all modes
  std::vector<double> poly(static_cast<size_t>(points) * L);
  for (int i = 0; i < points; ++i)
    hermite::polynomial_parts(rule.nodes[static_cast<size_t>(i)], std::span<double>(&poly[static_cast<size_t>(i) * L], L));
  std::vector<std::vector<double>> g;
  for (const auto& p : x) g.push_back(field_weights(lat, p));

  std::vector<int> node(static_cast<size_t>(M), 0);
  std::vector<double> q(static_cast<size_t>(M));
  cplx total{};
  const long count = std::lround(nodes_total);
  for (long idx = 0; idx < count; ++idx) {
    long rem = idx;
    double w = 1.0;
    for (int j = M - 1; j >= 0; --j) {
      node[static_cast<size_t>(j)] = static_cast<int>(rem % points);
      rem /= points;
      const double xi = rule.nodes[static_cast<size_t>(node[static_cast<size_t>(j)])];
      w *= rule.weights[static_cast<size_t>(node[static_cast<size_t>(j)])] * poly[static_cast<size_t>(node[static_cast<size_t>(j)]) * L];
      q[static_cast<size_t>(j)] = xi / std::sqrt(lat.omega(j));
    }
    double fields = 1.0;
    for (const auto& gk : g) fields *= std::inner_product(gk.begin(), gk.end(), q.begin(), 0.0);
    cplx psi{};
    for (size_t I = 0; I < lat.basis_size(); ++I) {
      const cplx cI = c(static_cast<Eigen::Index>(I));
      if (cI == 0.0) continue;
      double b = 1.0;
      for (int j = 0; j < M; ++j)
        b *= poly[static_cast<size_t>(node[static_cast<size_t>(j)]) * L + static_cast<size_t>(lat.occupation(I, j))];
      psi += cI * b;
    }
    total += w * fields * psi;
  }
  return vacuum_phase_factor(model, t) * total;
}

cplx heisenberg_wf(const LatticeModel& model, const FunctionalState& state, const Positions& x,
                   std::span<const double> t) {
  check_args(model, state, x);
  const Lattice& lat = model.lattice();
  const int n = count_of(x);
  require(static_cast<int>(t.size()) == n, "need one time per particle");
  if (n == 0) return vacuum_phase_factor(model, state.t) * state.c(0);
  require(n <= lat.n_max(), "nonequal-time evaluation needs n <= n_max");

  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  cplx sum{};
  int orderings = 0;
  do {
    // <0| U^dag(t_1) phi_1 U(t_1) U^dag(t_2) phi_2 ... U(t_n) |Psi_H>
    const auto last = static_cast<size_t>(perm.back());
    Eigen::VectorXcd v = state_at(model, state, t[last]);
    project_sector(lat, v, n);
    for (int k = n - 1; k >= 0; --k) {
      const auto pk = static_cast<size_t>(perm[static_cast<size_t>(k)]);
      if (k < n - 1) {
        const auto next = static_cast<size_t>(perm[static_cast<size_t>(k) + 1]);
        if (t[pk] != t[next]) v = model.propagate(v, t[pk] - t[next]);
      }
      v = apply_linear(lat, field_weights(lat, x[pk]), v);
    }
    sum += vacuum_phase_factor(model, t[static_cast<size_t>(perm.front())]) * v(0);
    ++orderings;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return sum / static_cast<double>(orderings);
}

cplx n_particle_wf(const LatticeModel& model, const FunctionalState& state, const Positions& x,
                   std::span<const double> t) {
  require(t.size() == x.size(), "need one time per particle");
  const bool equal = std::all_of(t.begin(), t.end(), [&](double v) { return v == t[0]; });
  if (!t.empty() && equal) return equal_time_wf(model, state, x, t[0]);
  return heisenberg_wf(model, state, x, t);
}

NParticleWF::NParticleWF(const LatticeModel& model, FunctionalState state, int n)
    : model_(&model), state_(std::move(state)), n_(n) {
  require(n >= 0 && n <= model.lattice().max_particles(), "particle count exceeds the truncation (M * n_max)");
}

cplx NParticleWF::operator()(const Positions& x, std::span<const double> t) const {
  require(count_of(x) == n_, "wrong number of positions");
  return n_particle_wf(*model_, state_, x, t);
}

cplx NParticleWF::operator()(const Positions& x, double t) const {
  require(count_of(x) == n_, "wrong number of positions");
  return equal_time_wf(*model_, state_, x, t);
}

double orthogonality_check(const Lattice& lat, int n_prime, int n, const std::vector<Positions>& samples,
                           int points) {
  require(n_prime >= 0 && n >= 0 && n <= lat.max_particles(), "sector outside the truncation");
  if (points < lat.n_max() + n_prime + 1) fail(ErrorKind::under_resolved, "quadrature order below n_max + n' + 1");
  for (const auto& s : samples) require(count_of(s) == n_prime, "sample tuples must hold n' positions");
  const int M = lat.modes();
  const double nodes_total = std::pow(points, M);
  require(nodes_total <= 5e6, "quadrature grid too large");
  const auto rule = hermite::gauss_hermite(points);
  const size_t L = static_cast<size_t>(lat.n_max() + 1);
  std::vector<double> poly(static_cast<size_t>(points) * L);
  for (int i = 0; i < points; ++i)
    hermite::polynomial_parts(rule.nodes[static_cast<size_t>(i)], std::span<double>(&poly[static_cast<size_t>(i) * L], L));

  std::vector<size_t> sector;
  for (size_t I = 0; I < lat.basis_size(); ++I)
    if (lat.total_number(I) == n) sector.push_back(I);
  std::vector<std::vector<std::vector<double>>> g;
  for (const auto& s : samples) {
    g.emplace_back();
    for (const auto& p : s) g.back().push_back(field_weights(lat, p));
  }
  std::vector<double> acc(sector.size() * samples.size(), 0.0);
  std::vector<int> node(static_cast<size_t>(M));
  std::vector<double> q(static_cast<size_t>(M));
  const long count = std::lround(nodes_total);
  for (long idx = 0; idx < count; ++idx) {
    long rem = idx;
    double w = 1.0;
    for (int j = M - 1; j >= 0; --j) {
      node[static_cast<size_t>(j)] = static_cast<int>(rem % points);
      rem /= points;
      w *= rule.weights[static_cast<size_t>(node[static_cast<size_t>(j)])] * poly[static_cast<size_t>(node[static_cast<size_t>(j)]) * L];
      q[static_cast<size_t>(j)] = rule.nodes[static_cast<size_t>(node[static_cast<size_t>(j)])] / std::sqrt(lat.omega(j));
    }
    for (size_t s = 0; s < samples.size(); ++s) {
      double fields = w;
      for (const auto& gk : g[s]) fields *= std::inner_product(gk.begin(), gk.end(), q.begin(), 0.0);
      for (size_t b = 0; b < sector.size(); ++b) {
        double v = 1.0;
        for (int j = 0; j < M; ++j)
          v *= poly[static_cast<size_t>(node[static_cast<size_t>(j)]) * L + static_cast<size_t>(lat.occupation(sector[b], j))];
        acc[b * samples.size() + s] += fields * v;
      }
    }
  }
  double worst = 0.0;
  for (double v : acc) worst = std::max(worst, std::abs(v));
  return worst;
}

std::vector<std::array<cplx, 3>> wf_gradient(const LatticeModel& model, const FunctionalState& state,
                                             const Positions& x, double t) {
  std::vector<std::array<cplx, 3>> out(x.size());
  for (int j = 0; j < count_of(x); ++j)
    for (int a = 0; a < model.lattice().spec().dim; ++a)
      out[static_cast<size_t>(j)][static_cast<size_t>(a)] = equal_time_impl(model, state, x, t, j, a);
  return out;
}

Position particle_velocity(const LatticeModel& model, const FunctionalState& state, int j, const Positions& x,
                           double t) {
  const int n = count_of(x);
  require(j >= 0 && j < n, "particle label out of range");
  const cplx psi = equal_time_wf(model, state, x, t);
  const auto grad = wf_gradient(model, state, x, t);
  const double h = 1e-4 / model.lattice().omega_max();
  std::vector<double> tp(static_cast<size_t>(n), t), tm(static_cast<size_t>(n), t);
  tp[static_cast<size_t>(j)] += h;
  tm[static_cast<size_t>(j)] -= h;
  const cplx dt = (n_particle_wf(model, state, x, tp) - n_particle_wf(model, state, x, tm)) / (2.0 * h);
  const double den = std::imag(std::conj(psi) * dt);
  const double scale = std::norm(psi) * model.lattice().omega_max();
  if (!(std::abs(den) > 1e-13 * scale)) fail(ErrorKind::numerical, "velocity diverges: time component of the current vanishes");
  Position v{};
  for (int a = 0; a < model.lattice().spec().dim; ++a)
    v[static_cast<size_t>(a)] = -std::imag(std::conj(psi) * grad[static_cast<size_t>(j)][static_cast<size_t>(a)]) / den;
  return v;
}

double kg_residual(const LatticeModel& model, const FunctionalState& state, const Positions& x,
                   std::span<const double> t, double h) {
  const int n = count_of(x);
  require(static_cast<int>(t.size()) == n && n > 0, "need one time per particle");
  require(h > 0.0, "difference step must be positive");
  const double m = model.lattice().spec().mass;
  const int dim = model.lattice().spec().dim;
  const std::vector<double> t0(t.begin(), t.end());
  const cplx psi = n_particle_wf(model, state, x, t0);
  require(std::abs(psi) > 0.0, "wave function vanishes at the evaluation point");
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    auto tp = t0, tm = t0;
    tp[static_cast<size_t>(j)] += h;
    tm[static_cast<size_t>(j)] -= h;
    cplx box = (n_particle_wf(model, state, x, tp) - 2.0 * psi + n_particle_wf(model, state, x, tm)) / (h * h);
    for (int a = 0; a < dim; ++a) {
      Positions xp = x, xm = x;
      xp[static_cast<size_t>(j)][static_cast<size_t>(a)] += h;
      xm[static_cast<size_t>(j)][static_cast<size_t>(a)] -= h;
      box -= (n_particle_wf(model, state, xp, t0) - 2.0 * psi + n_particle_wf(model, state, xm, t0)) / (h * h);
    }
    worst = std::max(worst, std::abs(box + m * m * psi) / (m * m * std::abs(psi)));
  }
  return worst;
}

double nonrel_residual(const LatticeModel& model, const FunctionalState& state, const Positions& x, double t,
                       double h) {
  const int n = count_of(x);
  require(n > 0 && h > 0.0, "need particles and a positive step");
  const double m = model.lattice().spec().mass;
  const int dim = model.lattice().spec().dim;
  auto chi = [&](const Positions& p, double tt) {
    return std::polar(1.0, n * m * tt) * equal_time_wf(model, state, p, tt);
  };
  const cplx c0 = chi(x, t);
  require(std::abs(c0) > 0.0, "wave function vanishes at the evaluation point");
  const cplx idt = cplx(0.0, 1.0) * (chi(x, t + h) - chi(x, t - h)) / (2.0 * h);
  cplx kin{};
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < dim; ++a) {
      Positions xp = x, xm = x;
      xp[static_cast<size_t>(j)][static_cast<size_t>(a)] += h;
      xm[static_cast<size_t>(j)][static_cast<size_t>(a)] -= h;
      kin -= (chi(xp, t) - 2.0 * c0 + chi(xm, t)) / (h * h * 2.0 * m);
    }
  return std::abs(kin - idt) / (m * std::abs(c0));
}

MassDensityField mass_density(const ParticleSet& particles) {
  require(particles.positions.size() == particles.effectivity.size(), "positions and effectivities must align");
  MassDensityField out;
  for (size_t n = 0; n < particles.positions.size(); ++n) {
    const double e = particles.effectivity[n];
    require(e >= 0.0 && e <= 1.0 + 1e-12, "effectivity outside [0, 1]");
    require(particles.positions[n].size() == n || e == 0.0, "the n-configuration must hold n positions");
    if (e == 0.0) continue;
    for (const auto& p : particles.positions[n]) out.points.push_back({p, particles.mass * e});
    out.total += particles.mass * e * static_cast<double>(n);
  }
  return out;
}

ParticlePath integrate_particles(const LatticeModel& model, const FunctionalState& state, const Positions& x0,
                                 double t_span, double tol) {
  const int n = count_of(x0);
  const int dim = model.lattice().spec().dim;
  require(n > 0, "need at least one particle");
  auto unpack = [&](std::span<const double> y) {
    Positions p(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < dim; ++a) p[static_cast<size_t>(j)][static_cast<size_t>(a)] = y[static_cast<size_t>(j * dim + a)];
    return p;
  };
  ode::Rhs rhs = [&](double t, std::span<const double> y, std::span<double> f) {
    const Positions p = unpack(y);
    for (int j = 0; j < n; ++j) {
      Position v;
      try {
        v = particle_velocity(model, state, j, p, t);
      } catch (const NodeError&) {
        throw;
      } catch (const Error& e) {
        throw NodeError(e.what());
      }
      for (int a = 0; a < dim; ++a) f[static_cast<size_t>(j * dim + a)] = v[static_cast<size_t>(a)];
    }
  };
  ode::State y0;
  for (const auto& p : x0)
    for (int a = 0; a < dim; ++a) y0.push_back(p[static_cast<size_t>(a)]);
  ParticlePath path;
  path.t.push_back(state.t);
  path.x.push_back(x0);
  ode::Options o;
  o.rtol = 0.0;
  o.atol = tol;
  const auto res = ode::integrate(rhs, state.t, y0, state.t + t_span, o, [&](const ode::Step& s) {
    path.t.push_back(s.t1());
    path.x.push_back(unpack(s.y1));
    return true;
  });
  path.completed = res.outcome == ode::Outcome::completed;
  path.message = res.message;
  return path;
}

void write_particle_path(std::ostream& os, const ParticlePath& path, int n, double e_n, int dim) {
  static const char* axes[] = {"x", "y", "z"};
  os << "t";
  for (int a = 0; a < dim; ++a) os << '\t' << axes[a];
  os << "\tn\tj\te_n\n" << std::setprecision(17);
  for (size_t i = 0; i < path.t.size(); ++i)
    for (size_t j = 0; j < path.x[i].size(); ++j) {
      os << path.t[i];
      for (int a = 0; a < dim; ++a) os << '\t' << path.x[i][j][static_cast<size_t>(a)];
      os << '\t' << n << '\t' << j << '\t' << e_n << '\n';
    }
}

}  // namespace bohm::extract
