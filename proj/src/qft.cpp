#include "bohm/qft.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "bohm/error.hpp"
#include "bohm/hermite.hpp"

namespace bohm::qft {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<LatticeMode> default_modes(int count) {
  std::vector<LatticeMode> out;
  out.push_back(LatticeMode{{0, 0, 0}, false});
  for (int p = 1; static_cast<int>(out.size()) < count; ++p) {
    out.push_back(LatticeMode{{p, 0, 0}, false});
    if (static_cast<int>(out.size()) < count) out.push_back(LatticeMode{{p, 0, 0}, true});
  }
  out.resize(static_cast<size_t>(count));
  return out;
}

}  // namespace

Lattice::Lattice(LatticeSpec spec) : spec_(std::move(spec)) {
  require(spec_.dim >= 1 && spec_.dim <= 3, "lattice dimension must be 1, 2 or 3");
  require(spec_.box > 0.0 && std::isfinite(spec_.box), "box length must be positive");
  require(spec_.mass > 0.0 && std::isfinite(spec_.mass), "mass must be positive");
  require(spec_.coupling >= 0.0 && std::isfinite(spec_.coupling), "quartic coupling must be >= 0");
  require(spec_.n_max >= 0, "n_max must be >= 0");

  if (spec_.mode_list.empty()) {
    require(spec_.modes >= 1, "need at least one lattice mode");
    modes_ = default_modes(spec_.modes);
  } else {
    modes_ = spec_.mode_list;
  }
  spec_.modes = static_cast<int>(modes_.size());
  spec_.mode_list = modes_;

  std::set<std::pair<std::array<int, 3>, bool>> seen;
  for (auto& m : modes_) {
    for (int d = spec_.dim; d < 3; ++d) m.n[static_cast<size_t>(d)] = 0;
    const bool zero = m.n == std::array<int, 3>{0, 0, 0};
    require(!(zero && m.sine), "the zero mode has no sine component");
    // cos(k.x) and cos(-k.x) coincide; canonicalize the sign of n
    std::array<int, 3> canon = m.n;
    for (int v : m.n) {
      if (v == 0) continue;
      if (v < 0)
        for (auto& c : canon) c = -c;
      break;
    }
    require(seen.insert({canon, m.sine}).second, "duplicate lattice mode");
  }

  const int M = modes();
  const double vol = std::pow(spec_.box, spec_.dim);
  for (const auto& m : modes_) {
    std::array<double, 3> k{};
    double k2 = 0.0;
    for (int d = 0; d < spec_.dim; ++d) {
      k[static_cast<size_t>(d)] = kTwoPi * m.n[static_cast<size_t>(d)] / spec_.box;
      k2 += k[static_cast<size_t>(d)] * k[static_cast<size_t>(d)];
    }
    k_.push_back(k);
    omega_.push_back(std::sqrt(k2 + spec_.mass * spec_.mass));
  }

  const double levels = spec_.n_max + 1.0;
  const double size = std::pow(levels, M);
  if (size > static_cast<double>(spec_.max_basis)) {
    std::ostringstream os;
    os << "basis size (" << spec_.n_max + 1 << ")^" << M << " = " << size << " exceeds the budget of "
       << spec_.max_basis;
    fail(ErrorKind::invalid_input, os.str());
  }
  size_ = static_cast<size_t>(size);
  stride_.assign(static_cast<size_t>(M), 1);
  for (int j = M - 2; j >= 0; --j)
    stride_[static_cast<size_t>(j)] = stride_[static_cast<size_t>(j) + 1] * static_cast<size_t>(spec_.n_max + 1);
  total_.resize(size_);
  for (size_t i = 0; i < size_; ++i) {
    int t = 0;
    for (int j = 0; j < M; ++j) t += occupation(i, j);
    total_[i] = t;
  }

  // Trapezoid on a grid finer than the largest summed wave number is exact.
  int nmax_axis = 0;
  for (const auto& m : modes_)
    for (int v : m.n) nmax_axis = std::max(nmax_axis, std::abs(v));
  const int P = 4 * nmax_axis + 1;
  long points = 1;
  for (int d = 0; d < spec_.dim; ++d) points *= P;
  const double cell = std::pow(spec_.box / P, spec_.dim);
  overlap_.assign(static_cast<size_t>(M * M * M * M), 0.0);
  std::vector<double> f(static_cast<size_t>(M));
  std::array<double, 3> x{};
  for (long p = 0; p < points; ++p) {
    long rem = p;
    for (int d = 0; d < spec_.dim; ++d) {
      x[static_cast<size_t>(d)] = spec_.box * static_cast<double>(rem % P) / P;
      rem /= P;
    }
    for (int j = 0; j < M; ++j)
      f[static_cast<size_t>(j)] = mode_function(j, std::span<const double>(x.data(), static_cast<size_t>(spec_.dim)));
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b)
        for (int c = 0; c < M; ++c)
          for (int d = 0; d < M; ++d)
            overlap_[static_cast<size_t>(((a * M + b) * M + c) * M + d)] +=
                f[static_cast<size_t>(a)] * f[static_cast<size_t>(b)] * f[static_cast<size_t>(c)] * f[static_cast<size_t>(d)] * cell;
  }
  (void)vol;
}

double Lattice::omega_max() const { return *std::max_element(omega_.begin(), omega_.end()); }

double Lattice::vacuum_energy() const {
  double e = 0.0;
  for (double w : omega_) e += 0.5 * w;
  return e;
}

int Lattice::occupation(size_t index, int mode) const {
  return static_cast<int>((index / stride_[static_cast<size_t>(mode)]) % static_cast<size_t>(spec_.n_max + 1));
}

OccIndex Lattice::occupation(size_t index) const {
  OccIndex occ(static_cast<size_t>(modes()));
  for (int j = 0; j < modes(); ++j) occ[static_cast<size_t>(j)] = occupation(index, j);
  return occ;
}

size_t Lattice::index(const OccIndex& occ) const {
  require(static_cast<int>(occ.size()) == modes(), "occupation index has the wrong number of modes");
  size_t i = 0;
  for (int j = 0; j < modes(); ++j) {
    const int n = occ[static_cast<size_t>(j)];
    require(n >= 0 && n <= spec_.n_max, "occupation number outside the cutoff");
    i += static_cast<size_t>(n) * stride_[static_cast<size_t>(j)];
  }
  return i;
}

double Lattice::mode_function(int j, std::span<const double> x) const {
  const auto& m = modes_[static_cast<size_t>(j)];
  const double vol = std::pow(spec_.box, spec_.dim);
  if (m.n == std::array<int, 3>{0, 0, 0}) return 1.0 / std::sqrt(vol);
  double phase = 0.0;
  for (int d = 0; d < spec_.dim; ++d) phase += k_[static_cast<size_t>(j)][static_cast<size_t>(d)] * x[static_cast<size_t>(d)];
  const double amp = std::sqrt(2.0 / vol);
  return m.sine ? amp * std::sin(phase) : amp * std::cos(phase);
}

std::array<double, 3> Lattice::mode_gradient(int j, std::span<const double> x) const {
  const auto& m = modes_[static_cast<size_t>(j)];
  std::array<double, 3> g{};
  if (m.n == std::array<int, 3>{0, 0, 0}) return g;
  const double vol = std::pow(spec_.box, spec_.dim);
  double phase = 0.0;
  const auto& k = k_[static_cast<size_t>(j)];
  for (int d = 0; d < spec_.dim; ++d) phase += k[static_cast<size_t>(d)] * x[static_cast<size_t>(d)];
  const double amp = std::sqrt(2.0 / vol);
  const double s = m.sine ? amp * std::cos(phase) : -amp * std::sin(phase);
  for (int d = 0; d < spec_.dim; ++d) g[static_cast<size_t>(d)] = s * k[static_cast<size_t>(d)];
  return g;
}

double Lattice::quartic_overlap(int a, int b, int c, int d) const {
  const int M = modes();
  return overlap_[static_cast<size_t>(((a * M + b) * M + c) * M + d)];
}

Lattice Lattice::with_cutoff(int n_max) const {
  LatticeSpec s = spec_;
  s.n_max = n_max;
  s.max_basis = std::max(spec_.max_basis, static_cast<size_t>(std::pow(n_max + 1.0, modes())));
  return Lattice(s);
}

std::vector<double> to_grid(const Lattice& lat, const FieldConfig& cfg) {
  require(lat.spec().dim == 1, "grid maps are implemented for dim == 1");
  require(static_cast<int>(cfg.q.size()) == lat.modes(), "field config has the wrong size");
  const int M = lat.modes();
  std::vector<double> out(static_cast<size_t>(M), 0.0);
  for (int i = 0; i < M; ++i) {
    const double x = lat.spec().box * i / M;
    for (int j = 0; j < M; ++j) out[static_cast<size_t>(i)] += cfg.q[static_cast<size_t>(j)] * lat.mode_function(j, {&x, 1});
  }
  return out;
}

FieldConfig from_grid(const Lattice& lat, std::span<const double> values) {
  require(lat.spec().dim == 1, "grid maps are implemented for dim == 1");
  const int M = lat.modes();
  require(static_cast<int>(values.size()) == M, "grid values have the wrong size");
  Eigen::MatrixXd F(M, M);
  for (int i = 0; i < M; ++i) {
    const double x = lat.spec().box * i / M;
    for (int j = 0; j < M; ++j) F(i, j) = lat.mode_function(j, {&x, 1});
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(F);
  require(lu.isInvertible(), "mode set is not resolvable on the dual grid");
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(values.data(), M);
  Eigen::VectorXd q = lu.solve(v);
  return FieldConfig{std::vector<double>(q.data(), q.data() + M)};
}

double basis_value(const Lattice& lat, const OccIndex& idx, const FieldConfig& cfg) {
  require(static_cast<int>(idx.size()) == lat.modes() && static_cast<int>(cfg.q.size()) == lat.modes(),
          "index or config size does not match the lattice");
  double v = 1.0;
  for (int j = 0; j < lat.modes(); ++j) {
    const int n = idx[static_cast<size_t>(j)];
    require(n >= 0 && n <= lat.n_max(), "occupation outside the cutoff");
    const double w = lat.omega(j);
    v *= hermite::function(n, std::sqrt(w) * cfg.q[static_cast<size_t>(j)]) * std::pow(w, 0.25);
  }
  return v;
}

FunctionalSample sample_functional(const Lattice& lat, const Eigen::VectorXcd& c, const FieldConfig& cfg,
                                   bool derivatives) {
  const int M = lat.modes();
  const size_t L = static_cast<size_t>(lat.n_max() + 1);
  require(static_cast<int>(cfg.q.size()) == M, "field config has the wrong size");
  require(static_cast<size_t>(c.size()) == lat.basis_size(), "coefficient vector has the wrong size");
  std::vector<double> f(M * L), df(M * L), d2f(M * L);
  for (int j = 0; j < M; ++j) {
    const double w = lat.omega(j);
    const double s4 = std::pow(w, 0.25), sw = std::sqrt(w);
    std::span<double> h(&f[j * L], L), dh(&df[j * L], L), d2h(&d2f[j * L], L);
    hermite::functions_with_derivatives(sw * cfg.q[static_cast<size_t>(j)], h, dh, d2h);
    for (size_t n = 0; n < L; ++n) {
      h[n] *= s4;
      dh[n] *= s4 * sw;
      d2h[n] *= s4 * w;
    }
  }
  FunctionalSample s;
  s.sector.assign(static_cast<size_t>(lat.max_particles()) + 1, 0.0);
  if (derivatives) {
    s.grad.assign(static_cast<size_t>(M), 0.0);
    s.hess_diag.assign(static_cast<size_t>(M), 0.0);
  }
  std::vector<double> v(static_cast<size_t>(M));
  for (size_t i = 0; i < lat.basis_size(); ++i) {
    const cplx ci = c(static_cast<Eigen::Index>(i));
    if (ci == 0.0) continue;
    double prod = 1.0;
    for (int j = 0; j < M; ++j) {
      v[static_cast<size_t>(j)] = f[j * L + static_cast<size_t>(lat.occupation(i, j))];
      prod *= v[static_cast<size_t>(j)];
    }
    const cplx term = ci * prod;
    s.psi += term;
    s.sector[static_cast<size_t>(lat.total_number(i))] += term;
    s.incoherent += std::norm(term);
    if (!derivatives) continue;
    for (int j = 0; j < M; ++j) {
      double others = 1.0;
      for (int l = 0; l < M; ++l)
        if (l != j) others *= v[static_cast<size_t>(l)];
      const size_t n = static_cast<size_t>(lat.occupation(i, j));
      s.grad[static_cast<size_t>(j)] += ci * (others * df[j * L + n]);
      s.hess_diag[static_cast<size_t>(j)] += ci * (others * d2f[j * L + n]);
    }
  }
  return s;
}

LatticeModel::LatticeModel(LatticeSpec spec) : lat_(std::move(spec)) {
  const int M = lat_.modes();
  const int nm = lat_.n_max();
  const auto D = static_cast<Eigen::Index>(lat_.basis_size());
  h_ = Eigen::MatrixXd::Zero(D, D);
  for (Eigen::Index i = 0; i < D; ++i) {
    double e = 0.0;
    for (int j = 0; j < M; ++j) e += lat_.omega(j) * (lat_.occupation(static_cast<size_t>(i), j) + 0.5);
    h_(i, i) = e;
  }

  const double lambda = lat_.spec().coupling;
  if (lambda > 0.0) {
    // Exact projections P q^p P (p <= 4) per mode, from a space 4 levels larger.
    const int big = nm + 5;
    std::vector<std::array<Eigen::MatrixXd, 5>> qpow(static_cast<size_t>(M));
    for (int j = 0; j < M; ++j) {
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(big, big);
      for (int n = 0; n + 1 < big; ++n) q(n, n + 1) = q(n + 1, n) = std::sqrt((n + 1.0) / (2.0 * lat_.omega(j)));
      Eigen::MatrixXd p = Eigen::MatrixXd::Identity(big, big);
      for (int k = 0; k <= 4; ++k) {
        qpow[static_cast<size_t>(j)][static_cast<size_t>(k)] = p.topLeftCorner(nm + 1, nm + 1);
        p = p * q;
      }
    }
    // Sum over multisets a <= b <= c <= d with their permutation counts.
    for (int a = 0; a < M; ++a)
      for (int b = a; b < M; ++b)
        for (int c = b; c < M; ++c)
          for (int d = c; d < M; ++d) {
            const double v = lat_.quartic_overlap(a, b, c, d);
            if (std::abs(v) < 1e-14) continue;
            std::vector<int> power(static_cast<size_t>(M), 0);
            for (int x : {a, b, c, d}) ++power[static_cast<size_t>(x)];
            double perms = 24.0;
            for (int p : power)
              for (int f = 2; f <= p; ++f) perms /= f;
            const double coef = lambda / 4.0 * perms * v;
            std::function<void(int, size_t, size_t, double)> rec = [&](int j, size_t row, size_t col, double val) {
              if (j == M) {
                h_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) += coef * val;
                return;
              }
              const auto& mat = qpow[static_cast<size_t>(j)][static_cast<size_t>(power[static_cast<size_t>(j)])];
              const size_t stride = lat_.index([&] {
                OccIndex o(static_cast<size_t>(M), 0);
                o[static_cast<size_t>(j)] = nm > 0 ? 1 : 0;
                return o;
              }());
              for (int r = 0; r <= nm; ++r)
                for (int s = 0; s <= nm; ++s) {
                  const double e = mat(r, s);
                  if (e == 0.0) continue;
                  rec(j + 1, row + static_cast<size_t>(r) * stride, col + static_cast<size_t>(s) * stride, val * e);
                }
            };
            rec(0, 0, 0, 1.0);
          }
  }
  h_ = 0.5 * (h_ + h_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h_);
  require(es.info() == Eigen::Success, "eigendecomposition failed");
  energies_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
}

Eigen::VectorXcd LatticeModel::propagate(const Eigen::VectorXcd& c, double dt) const {
  Eigen::VectorXcd d = vectors_.transpose().cast<cplx>() * c;
  for (Eigen::Index k = 0; k < d.size(); ++k) d(k) *= std::polar(1.0, -energies_(k) * dt);
  return vectors_.cast<cplx>() * d;
}

std::vector<double> LatticeModel::interaction_force(const FieldConfig& cfg) const {
  const int M = lat_.modes();
  std::vector<double> J(static_cast<size_t>(M), 0.0);
  const double lambda = lat_.spec().coupling;
  if (lambda == 0.0) return J;
  for (int j = 0; j < M; ++j)
    for (int b = 0; b < M; ++b)
      for (int c = 0; c < M; ++c)
        for (int d = 0; d < M; ++d)
          J[static_cast<size_t>(j)] -= lambda * lat_.quartic_overlap(j, b, c, d) * cfg.q[static_cast<size_t>(b)] *
                                       cfg.q[static_cast<size_t>(c)] * cfg.q[static_cast<size_t>(d)];
  return J;
}

FunctionalState evolve(const LatticeModel& model, const FunctionalState& state, double dt) {
  return FunctionalState{state.t + dt, model.propagate(state.c, dt)};
}

FunctionalState make_state(const Lattice& lat, const std::vector<std::pair<OccIndex, cplx>>& terms, double t) {
  FunctionalState s;
  s.t = t;
  s.c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(lat.basis_size()));
  for (const auto& [occ, amp] : terms) s.c(static_cast<Eigen::Index>(lat.index(occ))) += amp;
  const double n = s.c.norm();
  require(n > 0.0, "state has zero norm");
  s.c /= n;
  return s;
}

std::vector<double> sector_weights(const Lattice& lat, const Eigen::VectorXcd& c) {
  std::vector<double> w(static_cast<size_t>(lat.max_particles()) + 1, 0.0);
  for (size_t i = 0; i < lat.basis_size(); ++i)
    w[static_cast<size_t>(lat.total_number(i))] += std::norm(c(static_cast<Eigen::Index>(i)));
  return w;
}

std::vector<double> effectivity(const Lattice& lat, const FunctionalState& state, const FieldConfig& cfg) {
  const auto s = sample_functional(lat, state.c, cfg, false);
  double total = 0.0;
  for (const auto& v : s.sector) total += std::norm(v);
  if (!(total > 1e-24 * s.incoherent) || total == 0.0)
    fail(ErrorKind::numerical, "effectivity undefined: every sector functional vanishes here");
  std::vector<double> e;
  for (const auto& v : s.sector) e.push_back(std::norm(v) / total);
  return e;
}

std::vector<double> field_velocity(const Lattice& lat, const FunctionalState& state, const FieldConfig& cfg) {
  const auto s = sample_functional(lat, state.c, cfg, true);
  if (s.at_node()) throw NodeError("field guidance undefined at a node of the wave functional");
  std::vector<double> v;
  for (const auto& g : s.grad) v.push_back(std::imag(g / s.psi));
  return v;
}

FieldConfig FieldTrajectory::at(double time) const {
  for (const auto& s : steps)
    if (time >= std::min(s.t0, s.t1()) && time <= std::max(s.t0, s.t1())) return FieldConfig{s.interpolate(time)};
  require(!q.empty(), "empty field trajectory");
  return q.back();
}

namespace {

struct ExactEvolution {
  const LatticeModel& model;
  double t0;
  Eigen::VectorXcd spectral;

  ExactEvolution(const LatticeModel& m, const FunctionalState& s)
      : model(m), t0(s.t), spectral(m.eigenvectors().transpose().cast<cplx>() * s.c) {}

  FunctionalState at(double t) const {
    Eigen::VectorXcd d = spectral;
    for (Eigen::Index k = 0; k < d.size(); ++k) d(k) *= std::polar(1.0, -model.energies()(k) * (t - t0));
    return FunctionalState{t, model.eigenvectors().cast<cplx>() * d};
  }
};

ode::Rhs field_rhs(const ExactEvolution& ev) {
  return [&ev](double t, std::span<const double> y, std::span<double> dydt) {
    const auto v = field_velocity(ev.model.lattice(), ev.at(t), FieldConfig{{y.begin(), y.end()}});
    std::copy(v.begin(), v.end(), dydt.begin());
  };
}

}  // namespace

FieldTrajectory integrate_field(const LatticeModel& model, const FunctionalState& state0, const FieldConfig& q0,
                                double t_span, double tol) {
  require(static_cast<int>(q0.q.size()) == model.lattice().modes(), "field config has the wrong size");
  const ExactEvolution ev(model, state0);
  FieldTrajectory tr;
  tr.t.push_back(state0.t);
  tr.q.push_back(q0);
  ode::Options o;
  o.rtol = tol;
  o.atol = tol;
  const auto res = ode::integrate(field_rhs(ev), state0.t, q0.q, state0.t + t_span, o, [&](const ode::Step& s) {
    tr.steps.push_back(s);
    tr.t.push_back(s.t1());
    tr.q.push_back(FieldConfig{s.y1});
    return true;
  });
  tr.completed = res.outcome == ode::Outcome::completed;
  tr.message = res.message;
  return tr;
}

double quantum_potential(const Lattice& lat, const Eigen::VectorXcd& c, const FieldConfig& cfg) {
  const auto s = sample_functional(lat, c, cfg, true);
  if (s.at_node()) throw NodeError("quantum potential is singular at a node");
  const double A = std::abs(s.psi);
  double lap = 0.0;
  for (int j = 0; j < lat.modes(); ++j) {
    const cplx g = s.grad[static_cast<size_t>(j)];
    const cplx h = s.hess_diag[static_cast<size_t>(j)];
    const double re1 = std::real(std::conj(s.psi) * g);
    lap += (std::norm(g) + std::real(std::conj(s.psi) * h)) / A - re1 * re1 / (A * A * A);
  }
  return -lap / (2.0 * A);
}

SecondOrderResidual second_order_check(const LatticeModel& model, const FunctionalState& state0,
                                       const FieldTrajectory& traj, double fd_step) {
  require(traj.q.size() >= 5, "second_order_check needs at least five trajectory points");
  require(fd_step > 0.0, "finite-difference step must be positive");
  const Lattice& lat = model.lattice();
  const int M = lat.modes();
  const ExactEvolution ev(model, state0);
  const ode::Rhs rhs = field_rhs(ev);
  SecondOrderResidual out;
  out.fd_step = fd_step;
  out.per_mode.assign(static_cast<size_t>(M), 0.0);
  for (size_t i = 1; i + 1 < traj.q.size(); ++i) {
    const double t = traj.t[i];
    const auto& q = traj.q[i];
    try {
      const auto up = ode::step_increment(rhs, t, q.q, fd_step);
      const auto dn = ode::step_increment(rhs, t, q.q, -fd_step);
      const auto J = model.interaction_force(q);
      const auto st = ev.at(t);
      for (int j = 0; j < M; ++j) {
        const auto ju = static_cast<size_t>(j);
        const double acc = (up[ju] + dn[ju]) / (fd_step * fd_step);
        FieldConfig qp = q, qm = q;
        qp.q[ju] += fd_step;
        qm.q[ju] -= fd_step;
        const double dQ = (quantum_potential(lat, st.c, qp) - quantum_potential(lat, st.c, qm)) / (2.0 * fd_step);
        const double w = lat.omega(j);
        const double r = std::abs(acc + w * w * q.q[ju] - J[ju] + dQ);
        out.per_mode[ju] = std::max(out.per_mode[ju], r);
        out.max_residual = std::max(out.max_residual, r);
      }
    } catch (const NodeError&) {
      continue;
    }
  }
  return out;
}

VacuumPhase vacuum_phase(const LatticeModel& model, double t, const std::optional<VacuumPhase>& prior) {
  cplx amp{};
  const auto& V = model.eigenvectors();
  for (Eigen::Index k = 0; k < V.cols(); ++k) amp += V(0, k) * V(0, k) * std::polar(1.0, -model.energies()(k) * t);
  VacuumPhase out;
  out.r0 = std::abs(amp);
  if (out.r0 < 1e-14) fail(ErrorKind::numerical, "vacuum survival amplitude vanishes: phase undefined");
  out.phi0 = std::arg(amp);
  if (prior) out.phi0 += kTwoPi * std::round((prior->phi0 - out.phi0) / kTwoPi);
  return out;
}

std::vector<VacuumPhase> vacuum_phase_series(const LatticeModel& model, std::span<const double> times) {
  std::vector<VacuumPhase> out;
  if (times.empty()) return out;
  const double emax = model.energies().cwiseAbs().maxCoeff();
  const double dt_max = 0.1 / std::max(emax, 1e-12);
  VacuumPhase cur = vacuum_phase(model, 0.0);
  double t = 0.0;
  for (double target : times) {
    const double span = target - t;
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(span) / dt_max)));
    for (int i = 1; i <= n; ++i) cur = vacuum_phase(model, t + span * i / n, cur);
    t = target;
    out.push_back(cur);
  }
  return out;
}

double truncation_shift(const LatticeSpec& spec, int levels) {
  LatticeSpec doubled = spec;
  doubled.n_max = 2 * spec.n_max;
  doubled.max_basis = std::max(spec.max_basis, static_cast<size_t>(std::pow(doubled.n_max + 1.0, std::max(1, spec.mode_list.empty() ? spec.modes : static_cast<int>(spec.mode_list.size())))));
  const LatticeModel a(spec), b(doubled);
  const int n = std::min<int>(levels, static_cast<int>(a.energies().size()));
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    worst = std::max(worst, std::abs(b.energies()(i) - a.energies()(i)) / std::abs(a.energies()(i)));
  return worst;
}

}  // namespace bohm::qft
