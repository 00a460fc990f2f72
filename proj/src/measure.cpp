#include "bohm/measure.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "bohm/error.hpp"
#include "bohm/ode.hpp"

namespace bohm::measure {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Runs fn(i) for i in [0, n) over contiguous chunks; results must be written
// by index so the split does not matter.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  const size_t workers = std::clamp<size_t>(threads > 0 ? static_cast<size_t>(threads) : 1, 1, std::max<size_t>(n, 1));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const size_t chunk = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double z_score(double f, double p, size_t n) {
  if (p <= 0.0 || p >= 1.0) return f == p ? 0.0 : std::numeric_limits<double>::infinity();
  return (f - p) / std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

void check_pointer(const PointerSpec& p) {
  require(p.width > 0.0 && std::isfinite(p.width), "pointer width must be positive");
  require(p.duration > 0.0 && std::isfinite(p.duration), "coupling duration must be positive");
  require(std::isfinite(p.coupling), "pointer coupling must be finite");
  require(p.mass > 0.0, "pointer mass must be positive");
  require(p.separation >= 0.0 && std::isfinite(p.separation), "separation target must be nonnegative");
  require(p.window > 0.0 && p.separation_factor > 0.0, "window and separation factor must be positive");
  require(p.overlap_threshold > 0.0, "overlap threshold must be positive");
}

// Free packet at time t, centered at c.
struct Packet {
  cplx value;
  cplx dy;
};

Packet packet(const PointerSpec& p, double y, double c, double t) {
  const double s2 = p.width * p.width;
  const double norm = std::pow(kPi * s2, -0.25);
  const cplx spread = std::isfinite(p.mass) ? cplx(1.0, t / (p.mass * s2)) : cplx(1.0, 0.0);
  const double u = y - c;
  const cplx v = norm / std::sqrt(spread) * std::exp(-u * u / (2.0 * s2 * spread));
  return {v, -u / (s2 * spread) * v};
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ stream;
  h = splitmix64(s);
  s = h ^ index;
  return splitmix64(s);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return std::mt19937_64(substream_seed(seed, stream, index));
}

double pointer_width(const PointerSpec& p, double t) {
  if (!std::isfinite(p.mass)) return p.width;
  const double tau = t / (p.mass * p.width * p.width);
  return p.width * std::sqrt(1.0 + tau * tau);
}

double pointer_overlap(const PointerSpec& p, double displacement) {
  const double r = displacement / (2.0 * p.width);
  return std::exp(-r * r);
}

double SystemState::wave_number(size_t j) const { return 2.0 * kPi * n[j] / box; }

SystemState SystemState::normalized() const {
  require(box > 0.0 && std::isfinite(box), "system box must be positive");
  require(mass > 0.0 && std::isfinite(mass), "system mass must be positive");
  require(!n.empty() && n.size() == c.size(), "system state needs matching wave numbers and amplitudes");
  std::vector<int> sorted = n;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "repeated wave number in system state");
  double total = 0.0;
  for (const auto& a : c) total += std::norm(a);
  require(total > 0.0 && std::isfinite(total), "system state has zero norm");
  SystemState out = *this;
  for (auto& a : out.c) a /= std::sqrt(total);
  return out;
}

SystemState system_from_mode_sum(const relkin::ModeSum& wave, double t) {
  require(wave.dim() == 1, "momentum and pointer measurements need a one-dimensional wave");
  SystemState s;
  s.box = wave.cell_length();
  s.mass = wave.mass();
  for (size_t i = 0; i < wave.size(); ++i) {
    const double k = wave.modes()[i].k[0];
    const double ni = k * s.box / (2.0 * kPi);
    require(std::abs(ni - std::round(ni)) < 1e-9, "wave vector is not on the cell lattice");
    s.n.push_back(static_cast<int>(std::lround(ni)));
    s.c.push_back(wave.plane_wave_coefficient(i) * std::polar(std::sqrt(s.box), -wave.frequency(i) * t));
  }
  return s;
}

JointState::JointState(SystemState system, Observable obs, PointerSpec pointer)
    : system_(system.normalized()), obs_(obs), pointer_(pointer) {
  check_pointer(pointer_);
  require(obs_.slope != 0.0 && std::isfinite(obs_.slope) && std::isfinite(obs_.offset),
          "observable must have a nonzero finite momentum slope (nondegenerate spectrum)");
  const size_t na = system_.n.size();
  double gap = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < na; ++a)
    for (size_t b = a + 1; b < na; ++b)
      gap = std::min(gap, std::abs(obs_.eigenvalue(system_.wave_number(a)) - obs_.eigenvalue(system_.wave_number(b))));
  g_ = pointer_.coupling;
  if (pointer_.separation > 0.0 && na > 1) g_ = pointer_.separation / (pointer_.duration * gap);
  const double T = pointer_.duration;
  initial_ = system_.c;
  for (size_t a = 0; a < na; ++a) {
    Channel ch;
    ch.wave_number = system_.wave_number(a);
    ch.eigenvalue = obs_.eigenvalue(ch.wave_number);
    const double energy = ch.wave_number * ch.wave_number / (2.0 * system_.mass);
    ch.coefficient = system_.c[a] * std::polar(1.0, -energy * T);
    ch.center = g_ * T * ch.eigenvalue;
    channels_.push_back(ch);
  }
  overlap_.assign(na, std::vector<double>(na, 1.0));
  for (size_t a = 0; a < na; ++a)
    for (size_t b = 0; b < na; ++b)
      if (a != b) {
        overlap_[a][b] = pointer_overlap(pointer_, channels_[a].center - channels_[b].center);
        max_overlap_ = std::max(max_overlap_, overlap_[a][b]);
      }
  const double separation = na > 1 ? std::abs(g_) * T * gap : std::numeric_limits<double>::infinity();
  ideal_ = separation >= pointer_.separation_factor * pointer_.width && max_overlap_ <= pointer_.overlap_threshold;
  if (!ideal_) {
    std::ostringstream os;
    os << "channels overlap: separation " << separation << " vs " << pointer_.separation_factor << " widths, max overlap "
       << max_overlap_;
    diagnostic_ = os.str();
  }
}

JointState::Sample JointState::evaluate(double x, double y, double t) const {
  const double tc = std::min(t, pointer_.duration);
  const double norm = 1.0 / std::sqrt(system_.box);
  Sample s;
  for (size_t a = 0; a < channels_.size(); ++a) {
    if (initial_[a] == 0.0) continue;
    const double k = channels_[a].wave_number;
    const double energy = k * k / (2.0 * system_.mass);
    const cplx sys = initial_[a] * norm * std::polar(1.0, k * x - energy * t);
    const Packet p = packet(pointer_, y, g_ * tc * channels_[a].eigenvalue, t);
    s.psi += sys * p.value;
    s.dx += cplx(0.0, k) * sys * p.value;
    s.dy += sys * p.dy;
  }
  return s;
}

std::array<double, 2> JointState::velocity(double x, double y, double t) const {
  const Sample s = evaluate(x, y, t);
  const double rho = std::norm(s.psi);
  // node floor relative to the channel-incoherent density
  double incoherent = 0.0;
  const double tc = std::min(t, pointer_.duration);
  for (size_t a = 0; a < channels_.size(); ++a)
    incoherent += std::norm(initial_[a] * packet(pointer_, y, g_ * tc * channels_[a].eigenvalue, t).value) / system_.box;
  if (!(rho > 1e-12 * incoherent)) throw NodeError("joint wave vanishes at the sample");
  const double sx = std::imag(std::conj(s.psi) * s.dx) / rho;
  const double sy = std::imag(std::conj(s.psi) * s.dy) / rho;
  std::array<double, 2> v{sx / system_.mass, std::isfinite(pointer_.mass) ? sy / pointer_.mass : 0.0};
  if (t < pointer_.duration) {
    v[0] += g_ * obs_.slope * sy;
    v[1] += g_ * (obs_.slope * sx + obs_.offset);
  }
  return v;
}

JointState JointState::without_channel(size_t a) const {
  require(a < channels_.size(), "channel index out of range");
  JointState out = *this;
  out.initial_[a] = 0.0;
  out.channels_[a].coefficient = 0.0;
  return out;
}

int JointState::channel_of(double y, double t) const {
  const double tc = std::min(t, pointer_.duration);
  const double reach = pointer_.window * pointer_width(pointer_, t);
  int best = -1;
  double dist = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < channels_.size(); ++a) {
    const double d = std::abs(y - g_ * tc * channels_[a].eigenvalue);
    if (d < dist) {
      dist = d;
      best = static_cast<int>(a);
    }
  }
  return dist <= reach ? best : -1;
}

JointState entangle(const SystemState& system, const Observable& obs, const PointerSpec& pointer) {
  return JointState(system, obs, pointer);
}

GridSampler::GridSampler(std::vector<double> lo, std::vector<double> hi, std::vector<int> points,
                         std::vector<double> density)
    : lo_(std::move(lo)), hi_(std::move(hi)), points_(std::move(points)) {
  const size_t d = points_.size();
  require(d > 0 && lo_.size() == d && hi_.size() == d, "sampler axes are inconsistent");
  size_t total = 1;
  for (size_t l = 0; l < d; ++l) {
    require(points_[l] > 0 && hi_[l] > lo_[l], "sampler axis needs cells and a positive extent");
    total *= static_cast<size_t>(points_[l]);
  }
  require(density.size() == total, "sampler density has the wrong size");
  double mass = 0.0;
  for (double v : density) {
    require(v >= 0.0 && std::isfinite(v), "sampler density must be finite and nonnegative");
    mass += v;
  }
  require(mass > 0.0, "sampler density is identically zero");
  partial_.resize(d);
  partial_[d - 1] = std::move(density);
  for (size_t l = d - 1; l > 0; --l) {
    const size_t inner = static_cast<size_t>(points_[l]);
    const auto& src = partial_[l];
    auto& dst = partial_[l - 1];
    dst.assign(src.size() / inner, 0.0);
    for (size_t i = 0; i < src.size(); ++i) dst[i / inner] += src[i];
  }
}

std::vector<double> GridSampler::draw(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(points_.size());
  size_t prefix = 0;  // flat index of the chosen cells on the axes so far
  for (size_t l = 0; l < points_.size(); ++l) {
    const size_t m = static_cast<size_t>(points_[l]);
    const double* w = partial_[l].data() + prefix * m;
    double total = 0.0;
    for (size_t i = 0; i < m; ++i) total += w[i];
    const double target = u(rng) * total;
    double acc = 0.0;
    size_t pick = m - 1;
    for (size_t i = 0; i < m; ++i) {
      acc += w[i];
      if (target < acc && w[i] > 0.0) {
        pick = i;
        break;
      }
    }
    while (w[pick] == 0.0 && pick > 0) --pick;
    const double h = (hi_[l] - lo_[l]) / static_cast<double>(m);
    out[l] = lo_[l] + h * (static_cast<double>(pick) + u(rng));
    prefix = prefix * m + pick;
  }
  return out;
}

std::array<double, 2> transport(const JointState& joint, double x0, double y0, double t_end, double tol) {
  const ode::Rhs rhs = [&joint](double t, std::span<const double> y, std::span<double> dydt) {
    const auto v = joint.velocity(y[0], y[1], t);
    dydt[0] = v[0];
    dydt[1] = v[1];
  };
  ode::Options o;
  o.rtol = tol;
  o.atol = tol;
  // do not step across the end of the coupling, where the velocity jumps
  const double T = joint.end_time();
  ode::State y{x0, y0};
  double t = 0.0;
  for (double stop : {std::min(T, t_end), t_end}) {
    if (stop <= t) continue;
    const auto res = ode::integrate(rhs, t, y, stop, o);
    if (res.outcome != ode::Outcome::completed) fail(ErrorKind::numerical, "sample trajectory failed: " + res.message);
    y = res.y;
    t = stop;
  }
  return {y[0], y[1]};
}

EnsembleReport run_ensemble(const JointState& joint, const EnsembleSettings& st) {
  require(st.samples > 0, "ensemble needs at least one sample");
  require(st.grid_x > 1 && st.grid_y > 1 && st.extent > 0.0, "sampling grid is too small");
  require(st.tol > 0.0 && st.t_post >= 0.0, "ensemble tolerance and post time must be positive");
  const auto& sys = joint.system();
  const double L = sys.box, ymax = st.extent * joint.pointer().width;
  std::vector<double> density(static_cast<size_t>(st.grid_x) * static_cast<size_t>(st.grid_y));
  for (int i = 0; i < st.grid_x; ++i)
    for (int j = 0; j < st.grid_y; ++j) {
      const double x = (i + 0.5) * L / st.grid_x;
      const double y = -ymax + (j + 0.5) * 2.0 * ymax / st.grid_y;
      density[static_cast<size_t>(i) * static_cast<size_t>(st.grid_y) + static_cast<size_t>(j)] =
          std::norm(joint.evaluate(x, y, 0.0).psi);
    }
  const GridSampler sampler({0.0, -ymax}, {L, ymax}, {st.grid_x, st.grid_y}, std::move(density));

  const size_t na = joint.channels().size();
  std::vector<JointState> alone;
  for (size_t a = 0; a < na; ++a) {
    JointState only = joint;
    for (size_t b = 0; b < na; ++b)
      if (b != a) only = only.without_channel(b);
    alone.push_back(std::move(only));
  }

  const double t_end = joint.end_time() + st.t_post;
  std::vector<SampleOutcome> out(st.samples);
  parallel_for(st.samples, st.threads, [&](size_t i) {
    SampleOutcome& o = out[i];
    o.index = i;
    o.stream = substream_seed(st.seed, kSampling + (st.stream << 8), i);
    std::mt19937_64 rng(o.stream);
    const auto p = sampler.draw(rng);
    o.x0 = p[0];
    o.y0 = p[1];
    try {
      const auto end = transport(joint, p[0], p[1], t_end, st.tol);
      o.x = end[0];
      o.y = end[1];
      o.channel = joint.channel_of(o.y, t_end);
      if (o.channel >= 0) {
        const double vj = joint.velocity(o.x, o.y, t_end)[0];
        const double va = alone[static_cast<size_t>(o.channel)].velocity(o.x, o.y, t_end)[0];
        o.guidance_deviation = std::abs(vj - va);
      }
    } catch (const Error&) {
      o.channel = -2;
    }
  });

  EnsembleReport r;
  r.samples = st.samples;
  r.ideal = joint.ideal();
  r.hits.assign(na, 0);
  for (const auto& o : out) {
    if (o.channel == -1) ++r.gap_hits;
    else if (o.channel == -2) ++r.failures;
    else {
      ++r.hits[static_cast<size_t>(o.channel)];
      r.max_guidance_deviation = std::max(r.max_guidance_deviation, o.guidance_deviation);
    }
  }
  bool z_ok = true;
  for (size_t a = 0; a < na; ++a) {
    const double f = static_cast<double>(r.hits[a]) / static_cast<double>(st.samples);
    const double p = std::norm(sys.c[a]);
    r.frequency.push_back(f);
    r.probability.push_back(p);
    r.z.push_back(z_score(f, p, st.samples));
    r.tv_distance += 0.5 * std::abs(f - p);
    z_ok = z_ok && std::abs(r.z.back()) < 4.0;
  }
  r.passed = r.ideal && r.failures == 0 && static_cast<double>(r.gap_hits) <= 1e-3 * static_cast<double>(st.samples) &&
             z_ok;
  if (st.keep_samples) r.outcomes = std::move(out);
  return r;
}

double empty_channel_deviation(const JointState& joint, double x, double y, double t_post, double tol) {
  const double T = joint.end_time();
  const int a = joint.channel_of(y, T);
  require(a >= 0, "sample is not inside a channel at the end of the coupling");
  JointState only = joint;
  for (size_t b = 0; b < joint.channels().size(); ++b)
    if (static_cast<int>(b) != a) only = only.without_channel(b);
  ode::Options o;
  o.rtol = tol;
  o.atol = tol;
  const auto run = [&](const JointState& s, double t0, const ode::State& y0, double t1) {
    const ode::Rhs rhs = [&s](double t, std::span<const double> q, std::span<double> dq) {
      const auto v = s.velocity(q[0], q[1], t);
      dq[0] = v[0];
      dq[1] = v[1];
    };
    const auto res = ode::integrate(rhs, t0, y0, t1, o);
    if (res.outcome != ode::Outcome::completed) fail(ErrorKind::numerical, "channel trajectory failed: " + res.message);
    return res.y;
  };
  constexpr int kCheckpoints = 8;
  ode::State full{x, y}, reduced{x, y};
  double worst = 0.0;
  for (int c = 0; c < kCheckpoints; ++c) {
    const double t0 = T + t_post * c / kCheckpoints, t1 = T + t_post * (c + 1) / kCheckpoints;
    full = run(joint, t0, full, t1);
    reduced = run(only, t0, reduced, t1);
    worst = std::max({worst, std::abs(full[0] - reduced[0]), std::abs(full[1] - reduced[1])});
  }
  return worst;
}

RepeatReport remeasure(const JointState& joint, const EnsembleSettings& settings) {
  RepeatReport r;
  r.idempotent = true;
  const auto& sys = joint.system();
  for (size_t a = 0; a < joint.channels().size(); ++a) {
    SystemState cond = sys;
    cond.n = {sys.n[a]};
    cond.c = {joint.channels()[a].coefficient};
    const JointState again(cond, joint.observable(), joint.pointer());
    EnsembleSettings s = settings;
    s.stream = settings.stream + 1000 + a;
    s.keep_samples = false;
    const auto rep = run_ensemble(again, s);
    r.agreement.push_back(rep.frequency[0]);
    r.idempotent = r.idempotent && rep.hits[0] == static_cast<long>(s.samples);
  }
  return r;
}

BornConvergence born_convergence(const JointState& joint, std::span<const size_t> sizes, int repetitions,
                                 EnsembleSettings settings) {
  require(sizes.size() >= 2 && repetitions > 0, "convergence needs two sizes and a repetition");
  BornConvergence out;
  settings.keep_samples = false;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t k = 0; k < sizes.size(); ++k) {
    ConvergencePoint p;
    p.samples = sizes[k];
    for (int r = 0; r < repetitions; ++r) {
      settings.samples = sizes[k];
      settings.stream = (k + 1) * 100000 + static_cast<size_t>(r);
      p.mean_tv += run_ensemble(joint, settings).tv_distance / repetitions;
    }
    const double lx = std::log(static_cast<double>(p.samples)), ly = std::log(p.mean_tv);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    out.points.push_back(p);
  }
  const double n = static_cast<double>(sizes.size());
  out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

namespace {

struct Wave1d {
  std::function<std::pair<cplx, cplx>(double)> at;  // psi and d psi / dx
  std::vector<std::pair<double, double>> spectrum;  // (p, weight)
  double box;
};

MomentumDistribution histogram(const Wave1d& w, std::span<const double> edges, int points) {
  require(edges.size() >= 2, "momentum histogram needs at least one bin");
  require(std::is_sorted(edges.begin(), edges.end()) &&
              std::adjacent_find(edges.begin(), edges.end()) == edges.end(),
          "bin edges must increase");
  require(points > 1, "momentum grid needs points");
  MomentumDistribution d;
  d.edges.assign(edges.begin(), edges.end());
  const size_t nb = edges.size() - 1;
  d.bohmian.assign(nb, 0.0);
  d.spectral.assign(nb, 0.0);
  const auto bin = [&](double p) -> long {
    if (p < edges.front() || p >= edges.back()) return -1;
    return static_cast<long>(std::upper_bound(edges.begin(), edges.end(), p) - edges.begin()) - 1;
  };
  std::vector<std::pair<double, double>> cells;
  double mean = 0.0;
  for (int i = 0; i < points; ++i) {
    const auto [psi, dpsi] = w.at((i + 0.5) * w.box / points);
    const double rho = std::norm(psi);
    mean += rho / points;
    cells.push_back({rho, rho > 0.0 ? std::imag(std::conj(psi) * dpsi) / rho : 0.0});
  }
  double total = 0.0;
  for (const auto& [rho, p] : cells) {
    if (rho <= 1e-12 * mean) continue;
    total += rho;
    if (const long b = bin(p); b >= 0) d.bohmian[static_cast<size_t>(b)] += rho;
  }
  double stotal = 0.0;
  for (const auto& [p, wgt] : w.spectrum) {
    stotal += wgt;
    if (const long b = bin(p); b >= 0) d.spectral[static_cast<size_t>(b)] += wgt;
  }
  for (size_t b = 0; b < nb; ++b) {
    d.bohmian[b] /= total;
    d.spectral[b] /= stotal;
    d.tv_distance += 0.5 * std::abs(d.bohmian[b] - d.spectral[b]);
  }
  return d;
}

}  // namespace

MomentumDistribution momentum_distribution(const SystemState& system, double t, std::span<const double> edges,
                                           int points) {
  const SystemState s = system.normalized();
  Wave1d w;
  w.box = s.box;
  w.at = [&s, t](double x) {
    cplx psi{}, d{};
    for (size_t j = 0; j < s.n.size(); ++j) {
      const double k = s.wave_number(j);
      const cplx v = s.c[j] * std::polar(1.0 / std::sqrt(s.box), k * x - k * k * t / (2.0 * s.mass));
      psi += v;
      d += cplx(0.0, k) * v;
    }
    return std::pair{psi, d};
  };
  for (size_t j = 0; j < s.n.size(); ++j) w.spectrum.push_back({s.wave_number(j), std::norm(s.c[j])});
  return histogram(w, edges, points);
}

MomentumDistribution momentum_distribution(const relkin::ModeSum& wave, double t, std::span<const double> edges,
                                           int points) {
  require(wave.dim() == 1, "momentum distribution needs a one-dimensional wave");
  Wave1d w;
  w.box = wave.cell_length();
  w.at = [&wave, t](double x) {
    const auto s = relkin::evaluate(wave, relkin::FourVector(t, x), relkin::Derivatives::first);
    return std::pair{s.psi, s.d1[1]};
  };
  for (size_t i = 0; i < wave.size(); ++i)
    w.spectrum.push_back({wave.modes()[i].k[0], std::norm(wave.plane_wave_coefficient(i))});
  return histogram(w, edges, points);
}

void write_ensemble(std::ostream& os, const EnsembleReport& r) {
  os << "# sample\tstream\tx0\ty0\tx\ty\tchannel\n" << std::setprecision(17);
  for (const auto& o : r.outcomes)
    os << o.index << '\t' << o.stream << '\t' << o.x0 << '\t' << o.y0 << '\t' << o.x << '\t' << o.y << '\t' << o.channel
       << '\n';
}

void write_ensemble_summary(std::ostream& os, const EnsembleReport& r) {
  os << "# channel\thits\tfrequency\tprobability\tz\n" << std::setprecision(17);
  for (size_t a = 0; a < r.hits.size(); ++a)
    os << a << '\t' << r.hits[a] << '\t' << r.frequency[a] << '\t' << r.probability[a] << '\t' << r.z[a] << '\n';
  os << "# samples " << r.samples << " gap_hits " << r.gap_hits << " failures " << r.failures << " tv "
     << r.tv_distance << " ideal " << r.ideal << " passed " << r.passed << '\n';
}

// --- number pointer ------------------------------------------------------------

NumberPointer::NumberPointer(const qft::LatticeModel& model, qft::FunctionalState state, PointerSpec pointer)
    : model_(&model), state_(std::move(state)), pointer_(pointer) {
  check_pointer(pointer_);
  const auto& lat = model.lattice();
  require(lat.spec().coupling == 0.0, "a number pointer needs a number-conserving (lambda = 0) Hamiltonian");
  require(state_.c.size() == static_cast<Eigen::Index>(lat.basis_size()), "state does not match the lattice");
  const double norm = state_.c.norm();
  require(norm > 0.0 && std::isfinite(norm), "field state has zero norm");
  state_.c /= norm;
  energy_ = model.hamiltonian().diagonal();
  prob_ = qft::sector_weights(lat, state_.c);
  projected_.resize(prob_.size());
  for (size_t n = 0; n < prob_.size(); ++n) {
    if (prob_[n] <= 1e-14) continue;
    occupied_.push_back(static_cast<int>(n));
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(state_.c.size());
    for (size_t i = 0; i < lat.basis_size(); ++i)
      if (lat.total_number(i) == static_cast<int>(n)) c(static_cast<Eigen::Index>(i)) = state_.c(static_cast<Eigen::Index>(i));
    projected_[n] = std::move(c);
  }
  double gap = std::numeric_limits<double>::infinity();
  for (size_t a = 1; a < occupied_.size(); ++a) gap = std::min(gap, double(occupied_[a] - occupied_[a - 1]));
  if (pointer_.separation > 0.0 && occupied_.size() > 1)
    pointer_.coupling = pointer_.separation / (pointer_.duration * gap);
  const double separation = occupied_.size() > 1 ? std::abs(pointer_.coupling) * pointer_.duration * gap
                                                 : std::numeric_limits<double>::infinity();
  max_overlap_ = occupied_.size() > 1 ? pointer_overlap(pointer_, separation) : 0.0;
  ideal_ = separation >= pointer_.separation_factor * pointer_.width && max_overlap_ <= pointer_.overlap_threshold;
  if (!ideal_) {
    std::ostringstream os;
    os << "sector channels overlap: separation " << separation << ", overlap " << max_overlap_;
    diagnostic_ = os.str();
  }
}

double NumberPointer::center(int n, double t) const {
  return pointer_.coupling * n * std::clamp(t, 0.0, pointer_.duration);
}

std::vector<NumberPointer::SectorSample> NumberPointer::sectors(std::span<const double> q, double t) const {
  const auto& lat = model_->lattice();
  const qft::FieldConfig cfg{{q.begin(), q.end()}};
  std::vector<SectorSample> out;
  for (int n : occupied_) {
    const auto& c0 = projected_[static_cast<size_t>(n)];
    Eigen::VectorXcd c(c0.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = c0(i) * std::polar(1.0, -energy_(i) * t);
    const auto s = qft::sample_functional(lat, c, cfg, true);
    out.push_back({s.psi, s.grad});
  }
  return out;
}

double NumberPointer::density(std::span<const double> q, double y, double t) const {
  const auto sec = sectors(q, t);
  cplx psi{};
  for (size_t a = 0; a < sec.size(); ++a) psi += sec[a].psi * packet(pointer_, y, center(occupied_[a], t), t).value;
  return std::norm(psi);
}

std::vector<double> NumberPointer::effectivity(const qft::FieldConfig& q, double y, double t) const {
  const auto sec = sectors(q.q, t);
  const double s2 = pointer_.width * pointer_.width;
  // log-weights, shifted so the largest pointer factor is 1
  std::vector<double> expo(sec.size());
  double top = -std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < sec.size(); ++a) {
    const double u = y - center(occupied_[a], t);
    expo[a] = -u * u / s2;
    top = std::max(top, expo[a]);
  }
  std::vector<double> e(prob_.size(), 0.0);
  double total = 0.0;
  for (size_t a = 0; a < sec.size(); ++a) {
    const double w = std::norm(sec[a].psi) * std::exp(expo[a] - top);
    e[static_cast<size_t>(occupied_[a])] = w;
    total += w;
  }
  if (!(total > 0.0)) fail(ErrorKind::numerical, "effectivity undefined: every sector vanishes at this configuration");
  for (auto& v : e) v /= total;
  return e;
}

std::vector<double> NumberPointer::velocity(std::span<const double> q, double y, double t) const {
  const auto& lat = model_->lattice();
  const int M = lat.modes();
  const auto sec = sectors(q, t);
  const double s2 = pointer_.width * pointer_.width;
  std::vector<double> expo(sec.size());
  double top = -std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < sec.size(); ++a) {
    const double u = y - center(occupied_[a], t);
    expo[a] = -u * u / (2.0 * s2);
    top = std::max(top, expo[a]);
  }
  cplx psi{}, dy{}, npsi{};
  std::vector<cplx> dq(static_cast<size_t>(M)), dqdy(static_cast<size_t>(M));
  double incoherent = 0.0;
  for (size_t a = 0; a < sec.size(); ++a) {
    const double chi = std::exp(expo[a] - top);
    const double dchi = -(y - center(occupied_[a], t)) / s2 * chi;
    psi += sec[a].psi * chi;
    dy += sec[a].psi * dchi;
    npsi += double(occupied_[a]) * sec[a].psi * chi;
    incoherent += std::norm(sec[a].psi * chi);
    for (int j = 0; j < M; ++j) {
      dq[static_cast<size_t>(j)] += sec[a].grad[static_cast<size_t>(j)] * chi;
      dqdy[static_cast<size_t>(j)] += sec[a].grad[static_cast<size_t>(j)] * dchi;
    }
  }
  const double rho = std::norm(psi);
  if (!(rho > 1e-12 * incoherent)) throw NodeError("joint functional vanishes at the configuration");
  const bool coupled = t < pointer_.duration;
  const double g = pointer_.coupling;
  std::vector<double> v(static_cast<size_t>(M) + 1, 0.0);
  for (int j = 0; j < M; ++j) {
    const size_t js = static_cast<size_t>(j);
    v[js] = std::imag(std::conj(psi) * dq[js]) / rho;
    if (coupled)
      v[js] -= g / (2.0 * lat.omega(j)) * std::real(std::conj(psi) * dqdy[js] - std::conj(dy) * dq[js]) / rho;
  }
  if (coupled) v[static_cast<size_t>(M)] = g * std::real(std::conj(psi) * npsi) / rho;
  return v;
}

CollapseReport effectivity_collapse(const qft::LatticeModel& model, const qft::FunctionalState& state,
                                    const CollapseSpec& spec) {
  const NumberPointer np(model, state, spec.pointer);
  const auto& lat = model.lattice();
  const int M = lat.modes();
  require(spec.runs > 0 && spec.grid > 1 && spec.grid_y > 1 && spec.extent > 0.0 && spec.tol > 0.0,
          "collapse run needs runs, grids and a positive tolerance");
  double cells = spec.grid_y;
  for (int j = 0; j < M; ++j) cells *= spec.grid;
  require(cells <= double(1 << 22), "sampling grid for the field configuration is too large; lower the grid or modes");
  const double T = spec.pointer.duration;
  const double t_end = spec.t_end > 0.0 ? spec.t_end : T;
  require(t_end >= T, "collapse runs must last at least the coupling time");

  // grid over (q_1..q_M, y)
  std::vector<double> lo, hi;
  std::vector<int> pts;
  for (int j = 0; j < M; ++j) {
    const double r = (std::sqrt(2.0 * lat.n_max() + 1.0) + 4.0) / std::sqrt(lat.omega(j));
    lo.push_back(-r);
    hi.push_back(r);
    pts.push_back(spec.grid);
  }
  const double ymax = spec.extent * spec.pointer.width;
  lo.push_back(-ymax);
  hi.push_back(ymax);
  pts.push_back(spec.grid_y);
  std::vector<double> density(static_cast<size_t>(cells));
  std::vector<double> p(static_cast<size_t>(M) + 1);
  for (size_t flat = 0; flat < density.size(); ++flat) {
    size_t rest = flat;
    for (int l = M; l >= 0; --l) {
      const size_t m = static_cast<size_t>(pts[static_cast<size_t>(l)]);
      const size_t i = rest % m;
      rest /= m;
      const size_t ls = static_cast<size_t>(l);
      p[ls] = lo[ls] + (static_cast<double>(i) + 0.5) * (hi[ls] - lo[ls]) / static_cast<double>(m);
    }
    density[flat] = np.density(std::span<const double>(p.data(), static_cast<size_t>(M)), p.back(), 0.0);
  }
  const GridSampler sampler(lo, hi, pts, std::move(density));

  const ode::Rhs rhs = [&np, M](double t, std::span<const double> y, std::span<double> dydt) {
    const auto v = np.velocity(y.first(static_cast<size_t>(M)), y[static_cast<size_t>(M)], t);
    std::copy(v.begin(), v.end(), dydt.begin());
  };
  ode::Options o;
  o.rtol = spec.tol;
  o.atol = spec.tol;

  CollapseReport rep;
  rep.runs.resize(spec.runs);
  parallel_for(spec.runs, spec.threads, [&](size_t i) {
    auto rng = make_rng(spec.seed, kCollapse, i);
    const auto start = sampler.draw(rng);
    CollapseRun& run = rep.runs[i];
    run.index = i;
    run.q0.assign(start.begin(), start.begin() + M);
    run.y0 = start.back();
    const auto eff = [&](const ode::State& y, double t) {
      return np.effectivity(qft::FieldConfig{{y.begin(), y.begin() + M}}, y.back(), t);
    };
    ode::State y(start.begin(), start.end());
    try {
      run.e_initial = eff(y, 0.0);
      std::vector<double> stops;
      const int segs = std::max(spec.trace_points, 1);
      for (int s = 1; s <= segs; ++s) stops.push_back(T * s / segs);
      if (t_end > T) stops.push_back(t_end);
      if (spec.trace_points > 0) run.trace.push_back({0.0, run.e_initial});
      double t = 0.0;
      for (double stop : stops) {
        const auto res = ode::integrate(rhs, t, y, stop, o);
        if (res.outcome != ode::Outcome::completed) fail(ErrorKind::numerical, res.message);
        y = res.y;
        t = stop;
        if (spec.trace_points > 0) run.trace.push_back({t, eff(y, t)});
      }
      run.q.assign(y.begin(), y.begin() + M);
      run.y = y.back();
      run.e_final = eff(y, t_end);
      for (size_t n = 0; n < run.e_final.size(); ++n)
        if (run.e_final[n] > 1.0 - 1e-6) run.sector = static_cast<int>(n);
      for (size_t n = 0; n < run.e_final.size(); ++n)
        if (static_cast<int>(n) != run.sector && run.e_final[n] >= 1e-6) run.sector = -1;
    } catch (const Error&) {
      run.completed = false;
    }
  });

  rep.probability = np.sector_probability();
  rep.hits.assign(rep.probability.size(), 0);
  rep.ideal = np.ideal();
  for (const auto& r : rep.runs) {
    if (!r.completed) ++rep.failures;
    else if (r.sector < 0) ++rep.uncollapsed;
    else ++rep.hits[static_cast<size_t>(r.sector)];
  }
  bool z_ok = true;
  for (size_t n = 0; n < rep.hits.size(); ++n) {
    const double f = static_cast<double>(rep.hits[n]) / static_cast<double>(spec.runs);
    rep.z.push_back(z_score(f, rep.probability[n] > 1e-14 ? rep.probability[n] : 0.0, spec.runs));
    z_ok = z_ok && std::abs(rep.z.back()) < 4.0;
  }
  rep.passed = rep.ideal && rep.failures == 0 && rep.uncollapsed == 0 && z_ok;
  return rep;
}

void write_collapse(std::ostream& os, const CollapseReport& r) {
  os << "# run\ty0\ty\tsector";
  for (size_t n = 0; n < r.probability.size(); ++n) os << "\te" << n;
  os << '\n' << std::setprecision(17);
  for (const auto& run : r.runs) {
    os << run.index << '\t' << run.y0 << '\t' << run.y << '\t' << (run.completed ? run.sector : -2);
    for (size_t n = 0; n < r.probability.size(); ++n) os << '\t' << (n < run.e_final.size() ? run.e_final[n] : 0.0);
    os << '\n';
  }
}

}  // namespace bohm::measure
