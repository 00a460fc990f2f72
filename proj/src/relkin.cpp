#include "bohm/relkin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bohm/error.hpp"

namespace bohm::relkin {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNodeRelative = 1e-12;

// Euclid on doubles; returns 0 when the values are not commensurate.
double float_gcd(std::vector<double> values) {
  double g = 0.0;
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  const double tol = 1e-9 * scale;
  for (double v : values) {
    double a = std::abs(v);
    if (a <= tol) continue;
    double b = g;
    while (b > tol) {
      const double r = std::fmod(a, b);
      a = b;
      b = (r > b - tol) ? 0.0 : r;
    }
    g = a;
    if (g < 1e-6 * scale) return 0.0;
  }
  return g;
}

double infer_cell(const std::vector<Mode>& modes, int dim) {
  std::vector<double> comps;
  for (const auto& m : modes)
    for (int i = 0; i < dim; ++i) comps.push_back(m.k[static_cast<size_t>(i)]);
  bool all_zero = std::all_of(comps.begin(), comps.end(), [](double v) { return v == 0.0; });
  if (all_zero) return kTwoPi;
  const double g = float_gcd(comps);
  return g > 0.0 ? kTwoPi / g : 0.0;
}

bool commensurate(const std::vector<Mode>& modes, int dim, double cell) {
  for (const auto& m : modes) {
    for (int i = 0; i < dim; ++i) {
      const double n = m.k[static_cast<size_t>(i)] * cell / kTwoPi;
      if (std::abs(n - std::round(n)) > 1e-8 * std::max(1.0, std::abs(n))) return false;
    }
  }
  return true;
}

}  // namespace

FourVector FourVector::flipped() const {
  FourVector r = *this;
  for (int i = 1; i <= dim; ++i) r[i] = -r[i];
  return r;
}

FourVector operator+(const FourVector& a, const FourVector& b) {
  FourVector r(a.dim);
  for (int mu = 0; mu < a.size(); ++mu) r[mu] = a[mu] + b[mu];
  return r;
}

FourVector operator-(const FourVector& a, const FourVector& b) {
  FourVector r(a.dim);
  for (int mu = 0; mu < a.size(); ++mu) r[mu] = a[mu] - b[mu];
  return r;
}

FourVector operator*(double s, const FourVector& a) {
  FourVector r(a.dim);
  for (int mu = 0; mu < a.size(); ++mu) r[mu] = s * a[mu];
  return r;
}

double minkowski(const FourVector& a, const FourVector& b) {
  double s = a[0] * b[0];
  for (int i = 1; i <= a.dim; ++i) s -= a[i] * b[i];
  return s;
}

double max_abs_diff(const FourVector& a, const FourVector& b) {
  double m = 0.0;
  for (int mu = 0; mu < a.size(); ++mu) m = std::max(m, std::abs(a[mu] - b[mu]));
  return m;
}

ModeSum::ModeSum(double mass, int dim, std::vector<Mode> modes, std::optional<double> cell_length)
    : mass_(mass), dim_(dim), modes_(std::move(modes)) {
  require(std::isfinite(mass) && mass > 0.0, "mass must be positive");
  require(dim == 1 || dim == 3, "spatial dimension must be 1 or 3");
  require(!modes_.empty(), "a ModeSum needs at least one mode");
  for (size_t i = 0; i < modes_.size(); ++i) {
    for (size_t j = 0; j < i; ++j) {
      bool same = true;
      for (int d = 0; d < dim; ++d)
        same = same && modes_[i].k[static_cast<size_t>(d)] == modes_[j].k[static_cast<size_t>(d)];
      require(!same, "mode wave vectors must be pairwise distinct");
    }
    for (int d = dim; d < kMaxDim; ++d) modes_[i].k[static_cast<size_t>(d)] = 0.0;
  }

  if (cell_length) {
    require(*cell_length > 0.0 && std::isfinite(*cell_length), "cell length must be positive");
    require(commensurate(modes_, dim, *cell_length),
            "mode wave vectors are not commensurate with the given cell");
    cell_ = *cell_length;
  } else {
    cell_ = infer_cell(modes_, dim);
  }

  double mean = 0.0;
  for (const auto& m : modes_) {
    double k2 = 0.0;
    for (int d = 0; d < dim; ++d) k2 += m.k[static_cast<size_t>(d)] * m.k[static_cast<size_t>(d)];
    const double k0 = std::sqrt(k2 + mass * mass);
    k0_.push_back(k0);
    norm_.push_back(1.0 / std::sqrt(std::pow(kTwoPi, dim) * 2.0 * k0));
    mean += std::norm(m.amplitude) * norm_.back() * norm_.back();
  }
  mean /= static_cast<double>(modes_.size());
  node_floor_ = kNodeRelative * mean;
}

ModeSum ModeSum::from_plane_waves(double mass, int dim, std::vector<Mode> waves,
                                  std::optional<double> cell_length) {
  for (auto& w : waves) {
    double k2 = 0.0;
    for (int d = 0; d < dim; ++d) k2 += w.k[static_cast<size_t>(d)] * w.k[static_cast<size_t>(d)];
    const double k0 = std::sqrt(k2 + mass * mass);
    w.amplitude *= std::sqrt(std::pow(kTwoPi, dim) * 2.0 * k0);
  }
  return ModeSum(mass, dim, std::move(waves), cell_length);
}

double ModeSum::max_beat() const {
  double b = 0.0;
  for (size_t i = 0; i < modes_.size(); ++i)
    for (size_t j = 0; j < i; ++j)
      for (int d = 0; d < dim_; ++d)
        b = std::max(b, std::abs(modes_[i].k[static_cast<size_t>(d)] - modes_[j].k[static_cast<size_t>(d)]));
  return b;
}

ModeSum ModeSum::scaled(cplx factor) const {
  std::vector<Mode> m = modes_;
  for (auto& x : m) x.amplitude *= factor;
  return ModeSum(mass_, dim_, std::move(m), cell_ > 0.0 ? std::optional<double>(cell_) : std::nullopt);
}

ModeSum ModeSum::normalized() const {
  const double n = particle_number(*this);
  require(n > 0.0, "cannot normalize a wave with zero particle number");
  return scaled(1.0 / std::sqrt(n));
}

WaveSample evaluate(const ModeSum& wave, const FourVector& x, Derivatives order) {
  const int dim = wave.dim();
  WaveSample s;
  s.dim = dim;
  s.node_floor = wave.node_floor();
  s.has_second = order == Derivatives::second;
  const auto modes = wave.modes();
  for (size_t i = 0; i < modes.size(); ++i) {
    std::array<double, 4> klow{wave.frequency(i), 0.0, 0.0, 0.0};
    double phase = klow[0] * x[0];
    for (int d = 0; d < dim; ++d) {
      klow[static_cast<size_t>(d) + 1] = -modes[i].k[static_cast<size_t>(d)];
      phase -= modes[i].k[static_cast<size_t>(d)] * x[d + 1];
    }
    const cplx e = wave.plane_wave_coefficient(i) * std::polar(1.0, -phase);
    s.psi += e;
    for (int mu = 0; mu <= dim; ++mu) {
      s.d1[static_cast<size_t>(mu)] += cplx(0.0, -klow[static_cast<size_t>(mu)]) * e;
      if (!s.has_second) continue;
      for (int nu = 0; nu <= dim; ++nu)
        s.d2[static_cast<size_t>(mu)][static_cast<size_t>(nu)] -=
            klow[static_cast<size_t>(mu)] * klow[static_cast<size_t>(nu)] * e;
    }
  }
  return s;
}

cplx klein_gordon_residual(const WaveSample& s, double mass) {
  require(s.has_second, "second derivatives were not evaluated");
  cplx r = s.d2[0][0] + mass * mass * s.psi;
  for (int i = 1; i <= s.dim; ++i) r -= s.d2[static_cast<size_t>(i)][static_cast<size_t>(i)];
  return r;
}

FourVector current(const WaveSample& s) {
  FourVector j(s.dim);
  for (int mu = 0; mu <= s.dim; ++mu)
    j[mu] = -2.0 * std::imag(std::conj(s.psi) * s.d1[static_cast<size_t>(mu)]);
  return j;
}

double current_divergence(const WaveSample& s) {
  require(s.has_second, "second derivatives were not evaluated");
  // d_nu j_mu = -2 Im(d_nu psi* d_mu psi + psi* d_nu d_mu psi)
  auto dj = [&](int mu) {
    const auto m = static_cast<size_t>(mu);
    return -2.0 * std::imag(std::conj(s.d1[m]) * s.d1[m] + std::conj(s.psi) * s.d2[m][m]);
  };
  double div = dj(0);
  for (int i = 1; i <= s.dim; ++i) div -= dj(i);
  return div;
}

PolarForm polar(const WaveSample& s, const std::optional<PolarForm>& prior) {
  if (s.at_node()) throw NodeError("polar decomposition at a node of psi");
  PolarForm p;
  p.R = std::abs(s.psi);
  p.S = std::arg(s.psi);
  if (prior) {
    const double turns = std::round((prior->S - p.S) / (2.0 * std::numbers::pi));
    p.S += turns * 2.0 * std::numbers::pi;
    if (std::abs(p.S - prior->S) > std::numbers::pi / 2.0)
      fail(ErrorKind::under_resolved, "phase step exceeds pi/2 between evaluations");
  }
  const FourVector j = current(s);
  p.dS = FourVector(s.dim);
  const double rho = std::norm(s.psi);
  for (int mu = 0; mu <= s.dim; ++mu) p.dS[mu] = -j[mu] / (2.0 * rho);
  return p;
}

double quantum_potential(const WaveSample& s, double mass) {
  require(s.has_second, "second derivatives were not evaluated");
  if (s.at_node()) throw NodeError("quantum potential is singular at a node");
  const double rho = std::norm(s.psi);
  std::array<double, 4> drho{};
  for (int mu = 0; mu <= s.dim; ++mu)
    drho[static_cast<size_t>(mu)] = 2.0 * std::real(std::conj(s.psi) * s.d1[static_cast<size_t>(mu)]);
  auto ddrho = [&](int mu) {
    const auto m = static_cast<size_t>(mu);
    return 2.0 * std::real(std::conj(s.d1[m]) * s.d1[m] + std::conj(s.psi) * s.d2[m][m]);
  };
  double box_rho = ddrho(0);
  double grad2 = drho[0] * drho[0];
  for (int i = 1; i <= s.dim; ++i) {
    box_rho -= ddrho(i);
    grad2 -= drho[static_cast<size_t>(i)] * drho[static_cast<size_t>(i)];
  }
  const double box_r_over_r = box_rho / (2.0 * rho) - grad2 / (4.0 * rho * rho);
  return box_r_over_r / (2.0 * mass);
}

double quantum_potential(const ModeSum& wave, const FourVector& x) {
  return quantum_potential(evaluate(wave, x), wave.mass());
}

double hamilton_jacobi_residual(const WaveSample& s, double mass) {
  const PolarForm p = polar(s);
  return -minkowski(p.dS, p.dS) / (2.0 * mass) + mass / 2.0 + quantum_potential(s, mass);
}

SpatialGrid cell_grid(const ModeSum& wave, int points) {
  require(wave.cell_length() > 0.0, "wave has no periodicity cell");
  return SpatialGrid{0.0, wave.cell_length(), points};
}

double particle_number(const ModeSum& wave) {
  require(wave.cell_length() > 0.0, "wave has no periodicity cell");
  double n = 0.0;
  for (const auto& m : wave.modes()) n += std::norm(m.amplitude);
  return n * std::pow(wave.cell_length() / kTwoPi, wave.dim());
}

namespace {

void check_grid(const ModeSum& wave, const SpatialGrid& grid) {
  require(grid.points >= 1, "grid needs at least one point per axis");
  require(wave.cell_length() > 0.0, "wave has no periodicity cell");
  const double cells = grid.length / wave.cell_length();
  require(cells >= 1.0 - 1e-12 && std::abs(cells - std::round(cells)) < 1e-9,
          "grid length must be a whole number of periodicity cells");
  const double spacing = grid.length / grid.points;
  if (spacing * wave.max_beat() >= std::numbers::pi) {
    std::ostringstream os;
    os << "grid too coarse: spacing " << spacing << " does not resolve beat wave number "
       << wave.max_beat() << " (Nyquist limit " << std::numbers::pi / wave.max_beat() << ")";
    fail(ErrorKind::invalid_input, os.str());
  }
  const double total = std::pow(static_cast<double>(grid.points), wave.dim());
  require(total <= 1e8, "grid has too many points");
}

template <class F>
double integrate_density(const ModeSum& wave, double t, const SpatialGrid& grid, F&& f) {
  check_grid(wave, grid);
  const int dim = wave.dim();
  const double h = grid.length / grid.points;
  const long n = grid.points;
  const long total = dim == 1 ? n : n * n * n;
  double sum = 0.0;
  FourVector x(dim);
  x[0] = t;
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int d = 0; d < dim; ++d) {
      x[d + 1] = grid.origin + h * static_cast<double>(rem % n);
      rem /= n;
    }
    sum += f(current(evaluate(wave, x, Derivatives::first))[0]);
  }
  return sum * std::pow(h, dim);
}

}  // namespace

double particle_number_grid(const ModeSum& wave, double t, const SpatialGrid& grid) {
  return integrate_density(wave, t, grid, [](double j0) { return j0; });
}

double physical_particle_number(const ModeSum& wave, double t, const SpatialGrid& grid) {
  return integrate_density(wave, t, grid, [](double j0) { return std::abs(j0); });
}

FourVector boost(const FourVector& x, double rapidity) {
  require(x.dim == 1, "boosts are implemented for dim == 1");
  const double ch = std::cosh(rapidity), sh = std::sinh(rapidity);
  FourVector r(1);
  r[0] = ch * x[0] + sh * x[1];
  r[1] = sh * x[0] + ch * x[1];
  return r;
}

ModeSum boost(const ModeSum& wave, double rapidity) {
  require(wave.dim() == 1, "boosts are implemented for dim == 1");
  std::vector<Mode> modes;
  for (size_t i = 0; i < wave.size(); ++i) {
    FourVector k(wave.frequency(i), wave.modes()[i].k[0]);
    const FourVector kb = boost(k, rapidity);
    Mode m;
    m.k[0] = kb[1];
    m.amplitude = wave.modes()[i].amplitude * std::sqrt(kb[0] / k[0]);
    modes.push_back(m);
  }
  return ModeSum(wave.mass(), 1, std::move(modes));
}

}  // namespace bohm::relkin
