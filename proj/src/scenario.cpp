#include "bohm/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "bohm/error.hpp"
#include "bohm/extract.hpp"
#include "bohm/measure.hpp"
#include "bohm/qft.hpp"
#include "bohm/relkin.hpp"
#include "bohm/traject.hpp"

#ifndef BOHM_VERSION
#define BOHM_VERSION "0.0.0"
#endif

namespace bohm::scenario {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Typed access to one JSON object; every key must be consumed, so typos in a
// config are reported instead of silently ignored.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    require(j.is_object(), where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

  double num(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const Json* v = get(key, fallback.has_value());
    if (!v) return *fallback;
    require(v->is_number(), where(key) + " must be a number");
    const double d = v->get<double>();
    require(std::isfinite(d), where(key) + " must be finite");
    return d;
  }

  long integer(const std::string& key, std::optional<long> fallback = std::nullopt) {
    const Json* v = get(key, fallback.has_value());
    if (!v) return *fallback;
    require(v->is_number_integer(), where(key) + " must be an integer");
    return v->get<long>();
  }

  bool flag(const std::string& key, bool fallback) {
    const Json* v = get(key, true);
    if (!v) return fallback;
    require(v->is_boolean(), where(key) + " must be true or false");
    return v->get<bool>();
  }

  std::string str(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const Json* v = get(key, fallback.has_value());
    if (!v) return *fallback;
    require(v->is_string(), where(key) + " must be a string");
    return v->get<std::string>();
  }

  std::vector<double> nums(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const Json* v = get(key, fallback.has_value());
    if (!v) return *fallback;
    require(v->is_array(), where(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      require(e.is_number() && std::isfinite(e.get<double>()), where(key) + " must hold finite numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<long> ints(const std::string& key, std::optional<std::vector<long>> fallback = std::nullopt) {
    const Json* v = get(key, fallback.has_value());
    if (!v) return *fallback;
    require(v->is_array(), where(key) + " must be an array of integers");
    std::vector<long> out;
    for (const auto& e : *v) {
      require(e.is_number_integer(), where(key) + " must hold integers");
      out.push_back(e.get<long>());
    }
    return out;
  }

  Reader child(const std::string& key) {
    const Json* v = get(key, false);
    return Reader(*v, where(key));
  }

  std::optional<Reader> optional_child(const std::string& key) {
    const Json* v = get(key, true);
    if (!v) return std::nullopt;
    return Reader(*v, where(key));
  }

  std::vector<Reader> children(const std::string& key) {
    const Json* v = get(key, false);
    require(v->is_array() && !v->empty(), where(key) + " must be a nonempty array");
    std::vector<Reader> out;
    for (size_t i = 0; i < v->size(); ++i) out.emplace_back((*v)[i], where(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  const Json* raw(const std::string& key) { return get(key, true); }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [k, _] : j_->items())
      require(used_.count(k) > 0, "unknown key " + where(k));
  }

  std::string where(const std::string& key = "") const { return key.empty() ? path_ : path_ + "." + key; }

 private:
  const Json* get(const std::string& key, bool optional) {
    used_.insert(key);
    if (!has(key)) {
      require(optional, "missing required key " + where(key));
      return nullptr;
    }
    return &(*j_)[key];
  }

  const Json* j_;
  std::string path_;
  std::set<std::string> used_;
};

// --- shared parsers -------------------------------------------------------------

relkin::ModeSum parse_wave(Reader r) {
  const double mass = r.num("mass", 1.0);
  const int dim = static_cast<int>(r.integer("dimension", 1));
  const bool plane = r.flag("plane_waves", false);
  std::optional<double> cell;
  if (r.has("cell")) cell = r.num("cell");
  std::vector<relkin::Mode> modes;
  for (auto m : r.children("modes")) {
    relkin::Mode mode;
    const auto k = m.nums("k");
    require(static_cast<int>(k.size()) == dim, m.where("k") + " must have `dimension` components");
    std::copy(k.begin(), k.end(), mode.k.begin());
    mode.amplitude = {m.num("re", 0.0), m.num("im", 0.0)};
    m.finish();
    modes.push_back(mode);
  }
  r.finish();
  return plane ? relkin::ModeSum::from_plane_waves(mass, dim, modes, cell) : relkin::ModeSum(mass, dim, modes, cell);
}

qft::LatticeSpec parse_lattice(Reader r) {
  qft::LatticeSpec s;
  s.dim = static_cast<int>(r.integer("dimension", 1));
  s.box = r.num("box", 2.0 * kPi);
  s.modes = static_cast<int>(r.integer("modes", 1));
  s.mass = r.num("mass", 1.0);
  s.coupling = r.num("coupling", 0.0);
  s.n_max = static_cast<int>(r.integer("n_max", 4));
  s.max_basis = static_cast<size_t>(r.integer("max_basis", 4096));
  r.finish();
  return s;
}

qft::FunctionalState parse_field_state(Reader r, const qft::Lattice& lat) {
  std::vector<std::pair<qft::OccIndex, qft::cplx>> terms;
  for (auto t : r.children("terms")) {
    const auto occ = t.ints("occ");
    require(static_cast<int>(occ.size()) == lat.modes(), t.where("occ") + " needs one occupation per mode");
    qft::OccIndex idx(occ.begin(), occ.end());
    for (int n : idx) require(n >= 0 && n <= lat.n_max(), t.where("occ") + " exceeds the cutoff n_max");
    terms.push_back({idx, {t.num("re", 0.0), t.num("im", 0.0)}});
    t.finish();
  }
  const double t0 = r.num("t", 0.0);
  r.finish();
  return qft::make_state(lat, terms, t0);
}

measure::PointerSpec parse_pointer(std::optional<Reader> r) {
  measure::PointerSpec p;
  if (!r) return p;
  if (r->has("mass")) p.mass = r->num("mass");
  p.coupling = r->num("coupling", p.coupling);
  p.duration = r->num("duration", p.duration);
  p.width = r->num("width", p.width);
  p.separation = r->num("separation", p.separation);
  p.separation_factor = r->num("separation_factor", p.separation_factor);
  p.overlap_threshold = r->num("overlap_threshold", p.overlap_threshold);
  p.window = r->num("window", p.window);
  r->finish();
  return p;
}

measure::SystemState parse_system(Reader r) {
  measure::SystemState s;
  s.box = r.num("box", s.box);
  s.mass = r.num("mass", s.mass);
  for (auto w : r.children("waves")) {
    s.n.push_back(static_cast<int>(w.integer("n")));
    s.c.push_back({w.num("re", 0.0), w.num("im", 0.0)});
    w.finish();
  }
  r.finish();
  return s.normalized();
}

// --- output helpers -------------------------------------------------------------

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Context {
  std::uint64_t seed = 0;
  RunResult* out = nullptr;
  std::map<std::string, std::pair<double, double>> overrides;

  void check(const std::string& name, double value, double lo, double hi) {
    if (auto it = overrides.find(name); it != overrides.end()) std::tie(lo, hi) = it->second;
    out->checks.push_back({name, value, lo, hi, value >= lo && value <= hi && std::isfinite(value)});
  }
  void at_most(const std::string& name, double value, double hi) { check(name, value, -kInf, hi); }
  void at_least(const std::string& name, double value, double lo) { check(name, value, lo, kInf); }
  void file(const std::string& name, std::string contents) { out->files[name] = std::move(contents); }
};

std::mt19937_64 rng_for(const Context& c, std::uint64_t stream) { return measure::make_rng(c.seed, stream, 0); }

// least-squares slope of log y against log x
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// --- kinds ------------------------------------------------------------------------

relkin::ModeSum random_wave(std::mt19937_64& rng, int dim, int modes, int kmax) {
  std::uniform_real_distribution<double> um(0.5, 2.0);
  std::normal_distribution<double> ua(0.0, 1.0);
  std::uniform_int_distribution<int> uk(-kmax, kmax);
  const double mass = um(rng);
  std::vector<relkin::Mode> w;
  std::set<std::array<int, 3>> seen;
  while (static_cast<int>(w.size()) < modes) {
    std::array<int, 3> k{};
    for (int d = 0; d < dim; ++d) k[static_cast<size_t>(d)] = uk(rng);
    if (!seen.insert(k).second) continue;
    relkin::Mode m;
    for (int d = 0; d < dim; ++d) m.k[static_cast<size_t>(d)] = k[static_cast<size_t>(d)];
    m.amplitude = {ua(rng), ua(rng)};
    w.push_back(m);
  }
  return relkin::ModeSum(mass, dim, w, 2.0 * kPi);
}

void run_evolve(Reader p, Context& c) {
  std::vector<relkin::ModeSum> waves;
  if (p.has("waves"))
    for (auto w : p.children("waves")) waves.push_back(parse_wave(w));
  if (auto r = p.optional_child("random")) {
    const int count = static_cast<int>(r->integer("count", 20));
    const int modes = static_cast<int>(r->integer("modes", 4));
    const int kmax = static_cast<int>(r->integer("kmax", 3));
    const int dim = static_cast<int>(r->integer("dimension", 1));
    r->finish();
    require(count > 0 && modes > 0 && kmax > 0, "random waves need positive count, modes and kmax");
    require(modes <= std::pow(2 * kmax + 1, dim), "more random modes than lattice wave vectors");
    auto rng = rng_for(c, 11);
    for (int i = 0; i < count; ++i) waves.push_back(random_wave(rng, dim, modes, kmax));
  }
  require(!waves.empty(), p.where() + " needs `waves` or `random`");
  const double t0 = p.num("t_begin", 0.0), t1 = p.num("t_end", 10.0);
  const int slices = static_cast<int>(p.integer("slices", 10));
  const int points = static_cast<int>(p.integer("grid", 256));
  p.finish();
  require(slices >= 2 && t1 > t0, "evolve needs t_end > t_begin and at least two slices");

  std::ostringstream numbers, density;
  numbers << "# wave\tt\tN_modes\tN_grid\tN_phys\n";
  density << "# t\tx\tj0\trho\n";
  double drift = 0.0, bound = kInf, excess = 0.0;
  for (size_t w = 0; w < waves.size(); ++w) {
    const auto& wave = waves[w];
    const auto grid = relkin::cell_grid(wave, points);
    const double n_modes = relkin::particle_number(wave);
    double first = 0.0;
    for (int s = 0; s < slices; ++s) {
      const double t = t0 + (t1 - t0) * s / (slices - 1);
      const double n = relkin::particle_number_grid(wave, t, grid);
      const double nphys = relkin::physical_particle_number(wave, t, grid);
      if (s == 0) first = n;
      const double scale = std::max(std::abs(n_modes), 1e-300);
      drift = std::max(drift, std::abs(n - first) / scale);
      bound = std::min(bound, (nphys - std::abs(n)) / scale);
      excess = std::max(excess, (nphys - std::abs(n)) / scale);
      numbers << w << '\t' << fmt(t) << '\t' << fmt(n_modes) << '\t' << fmt(n) << '\t' << fmt(nphys) << '\n';
      if (w == 0 && wave.dim() == 1)
        for (int i = 0; i < points; ++i) {
          const double x = grid.origin + grid.length * i / points;
          const auto smp = relkin::evaluate(wave, relkin::FourVector(t, x), relkin::Derivatives::first);
          density << fmt(t) << '\t' << fmt(x) << '\t' << fmt(relkin::current(smp)[0]) << '\t' << fmt(smp.density())
                  << '\n';
        }
    }
  }
  c.file("numbers.tsv", numbers.str());
  if (waves.front().dim() == 1) c.file("density.tsv", density.str());
  c.out->summary["waves"] = waves.size();
  c.at_most("conservation", drift, 1e-8);
  c.at_least("nphys_bound", bound, -1e-10);
  c.at_least("nphys_excess", excess, 0.0);
}

struct PathChecks {
  bool hj = false;
  bool eom = false;
  std::vector<double> eom_steps{0.04, 0.02, 0.01};
};

void emit_path(Context& c, const relkin::ModeSum& wave, const traject::Trajectory& tr,
               const std::vector<traject::CrossingRecord>& recs) {
  std::ostringstream path, rev, cross;
  traject::write_trajectory(path, wave, tr);
  traject::write_reversals(rev, tr);
  for (const auto& r : recs) traject::write_crossings(cross, r);
  c.file("trajectory.tsv", path.str());
  c.file("reversals.tsv", rev.str());
  if (!recs.empty()) c.file("crossings.tsv", cross.str());
}

void fail_path(const traject::Trajectory& tr) {
  if (tr.status != traject::TrajStatus::completed)
    fail(tr.status == traject::TrajStatus::hit_node ? ErrorKind::node : ErrorKind::numerical,
         std::string("trajectory ") + traject::to_string(tr.status) + ": " + tr.message);
}

void run_trajectory(Reader p, Context& c) {
  const auto wave = parse_wave(p.child("wave"));
  const auto x0v = p.nums("x0");
  require(static_cast<int>(x0v.size()) == wave.dim() + 1, p.where("x0") + " must hold t and the spatial coordinates");
  relkin::FourVector x0(wave.dim());
  for (size_t i = 0; i < x0v.size(); ++i) x0[static_cast<int>(i)] = x0v[i];
  traject::IntegrateOptions o;
  o.tol = p.num("tol", 1e-9);
  const double span = p.num("tau_span");
  const auto slices = p.nums("slices", std::vector<double>{});
  const bool hj = p.flag("hamilton_jacobi", true);
  const auto steps = p.nums("eom_steps", std::vector<double>{0.04, 0.02, 0.01});
  p.finish();
  require(steps.empty() || steps.size() >= 2, "eom_steps needs at least two steps");

  const auto tr = traject::integrate(wave, x0, span, o);
  fail_path(tr);
  std::vector<traject::CrossingRecord> recs;
  for (double t : slices) recs.push_back(traject::crossings(tr, t));
  emit_path(c, wave, tr, recs);
  c.out->summary["reversals"] = tr.reversals.size();
  c.out->summary["points"] = tr.points.size();
  if (hj) {
    c.at_most("hamilton_jacobi", traject::hamilton_jacobi_on_path(wave, tr), 1e-7);
    c.at_most("guidance_consistency", traject::guidance_consistency(wave, tr), 1e-8);
  }
  if (!steps.empty()) {
    std::vector<double> res;
    std::ostringstream os;
    os << "# fd_step\teom_residual\n";
    for (double h : steps) {
      res.push_back(traject::eom_residual(wave, tr, h));
      os << fmt(h) << '\t' << fmt(res.back()) << '\n';
    }
    c.file("eom.tsv", os.str());
    c.check("eom_order", loglog_slope(steps, res), 1.7, 2.3);
  }
}

relkin::ModeSum fig1_wave(double a) {
  std::vector<relkin::Mode> w(2);
  w[0].k = {1.0, 0.0, 0.0};
  w[0].amplitude = 1.0;
  w[1].amplitude = a;
  return relkin::ModeSum::from_plane_waves(1.0, 1, w);
}

void run_fig1(Reader p, Context& c) {
  const double a = p.num("amplitude", 1.2);
  const double span = p.num("tau_span", 80.0);
  traject::IntegrateOptions o;
  o.tol = p.num("tol", 1e-9);
  const auto x0v = p.nums("x0", std::vector<double>{0.0, 0.0});
  std::optional<double> slice;
  if (p.has("slice")) slice = p.num("slice");
  p.finish();
  require(x0v.size() == 2, p.where("x0") + " must be [t, x]");
  const auto wave = fig1_wave(a);
  const auto tr = traject::integrate(wave, relkin::FourVector(x0v[0], x0v[1]), span, o);
  fail_path(tr);
  require(tr.reversals.size() >= 2 || slice.has_value(),
          "no creation/annihilation pair on the path; give an explicit slice");
  const double t_slice = slice ? *slice : 0.5 * (tr.reversals[0].x[0] + tr.reversals[1].x[0]);
  const auto rec = traject::crossings(tr, t_slice);
  emit_path(c, wave, tr, {rec});
  int pattern = rec.count() == 3 && rec.crossings[0].sign == 1 && rec.crossings[1].sign == -1 &&
                rec.crossings[2].sign == 1;
  double event_j0 = kInf;
  if (tr.reversals.size() >= 2) event_j0 = std::max(std::abs(tr.reversals[0].j0), std::abs(tr.reversals[1].j0));
  c.out->summary["slice"] = t_slice;
  c.out->summary["signs"] = Json::array();
  for (const auto& x : rec.crossings) c.out->summary["signs"].push_back(x.sign);
  c.check("crossing_count", rec.count(), 3, 3);
  c.check("crossing_sum", rec.signed_count(), 1, 1);
  c.check("sign_pattern", pattern, 1, 1);
  c.at_most("event_j0", event_j0, 1e-8);
}

void run_nonrel(Reader p, Context& c) {
  const auto eps = p.nums("epsilons", std::vector<double>{0.1, 0.05, 0.025});
  const double x0 = p.num("x0", 0.3);
  const double periods = p.num("periods", 1.0);
  const double ratio = p.num("second_k", -0.5);
  const qft::cplx b2{p.num("second_re", 0.5), p.num("second_im", 0.2)};
  const double tol = p.num("tol", 1e-12);
  p.finish();
  require(eps.size() >= 2, "nonrel needs at least two epsilons");
  std::vector<double> rel;
  std::ostringstream os;
  os << "# epsilon\tmax_deviation\tdisplacement\trelative_deviation\tmin_j0\n";
  for (double e : eps) {
    std::vector<relkin::Mode> m(2);
    m[0].k = {e, 0, 0};
    m[0].amplitude = 1.0;
    m[1].k = {ratio * e, 0, 0};
    m[1].amplitude = b2;
    const auto w = relkin::ModeSum::from_plane_waves(1.0, 1, m);
    const auto r = traject::nonrel_compare(w, {x0, 0, 0}, periods * 2.0 * kPi / (e * e), tol);
    rel.push_back(r.relative_deviation);
    os << fmt(e) << '\t' << fmt(r.max_deviation) << '\t' << fmt(r.displacement) << '\t' << fmt(r.relative_deviation)
       << '\t' << fmt(r.min_j0) << '\n';
  }
  c.file("nonrel.tsv", os.str());
  c.check("nonrel_order", loglog_slope(eps, rel), 1.7, 2.3);
}

void run_qft_evolve(Reader p, Context& c) {
  const auto spec = parse_lattice(p.child("lattice"));
  const qft::LatticeModel model(spec);
  const auto& lat = model.lattice();
  const auto st = parse_field_state(p.child("state"), lat);
  double wmin = kInf;
  for (int j = 0; j < lat.modes(); ++j) wmin = std::min(wmin, lat.omega(j));
  const double t_end = p.num("t_end", 2.0 * kPi / wmin);
  const int slices = static_cast<int>(p.integer("slices", 64));
  const bool truncation = p.flag("truncation_check", spec.coupling != 0.0);
  const int levels = static_cast<int>(p.integer("levels", 4));
  p.finish();
  require(t_end > 0.0 && slices >= 1, "qft-evolve needs t_end > 0 and slices >= 1");

  const auto series = [&](const qft::LatticeModel& m, const qft::FunctionalState& s0) {
    std::vector<std::vector<double>> w;
    for (int i = 0; i <= slices; ++i)
      w.push_back(qft::sector_weights(m.lattice(), qft::evolve(m, s0, t_end * i / slices).c));
    return w;
  };

  std::ostringstream coeffs, sectors;
  coeffs << "# t\tindex\tabs\targ\n";
  sectors << "# t";
  for (int n = 0; n <= lat.max_particles(); ++n) sectors << "\tw" << n;
  sectors << '\n';
  double drift = 0.0, phase = 0.0;
  const auto w = series(model, st);
  for (int i = 0; i <= slices; ++i) {
    const double t = t_end * i / slices;
    const auto ct = qft::evolve(model, st, t).c;
    for (Eigen::Index k = 0; k < ct.size(); ++k) {
      const auto c0 = st.c(k);
      if (std::abs(c0) == 0.0 && std::abs(ct(k)) < 1e-300) continue;
      coeffs << fmt(t) << '\t' << k << '\t' << fmt(std::abs(ct(k))) << '\t' << fmt(std::arg(ct(k))) << '\n';
      drift = std::max(drift, std::abs(std::abs(ct(k)) - std::abs(c0)));
      // free phases from the single-mode frequencies
      double e = lat.vacuum_energy();
      for (int j = 0; j < lat.modes(); ++j) e += lat.occupation(static_cast<size_t>(k), j) * lat.omega(j);
      phase = std::max(phase, std::abs(ct(k) - c0 * std::polar(1.0, -e * t)));
    }
    sectors << fmt(t);
    for (double v : w[static_cast<size_t>(i)]) sectors << '\t' << fmt(v);
    sectors << '\n';
  }
  c.file("coefficients.tsv", coeffs.str());
  c.file("sectors.tsv", sectors.str());
  double change = 0.0;
  for (const auto& wi : w)
    for (size_t n = 0; n < wi.size(); ++n) change = std::max(change, std::abs(wi[n] - w.front()[n]));
  c.out->summary["sector_change"] = change;
  if (spec.coupling == 0.0) {
    c.at_most("coefficient_drift", drift, 1e-10);
    c.at_most("phase_error", phase, 1e-8);
  } else {
    c.at_least("sector_change", change, 1e-3);
  }
  if (truncation) {
    qft::LatticeSpec doubled = spec;
    doubled.n_max = 2 * spec.n_max;
    doubled.max_basis = std::max(spec.max_basis, static_cast<size_t>(std::pow(doubled.n_max + 1.0, spec.modes)));
    const qft::LatticeModel big(doubled);
    std::vector<std::pair<qft::OccIndex, qft::cplx>> terms;
    for (size_t i = 0; i < lat.basis_size(); ++i)
      if (st.c(static_cast<Eigen::Index>(i)) != 0.0) terms.push_back({lat.occupation(i), st.c(static_cast<Eigen::Index>(i))});
    const auto wb = series(big, qft::make_state(big.lattice(), terms, st.t));
    double shift = 0.0;
    for (size_t i = 0; i < w.size(); ++i)
      for (size_t n = 0; n < w[i].size(); ++n) shift = std::max(shift, std::abs(w[i][n] - wb[i][n]));
    const double eig = qft::truncation_shift(spec, levels);
    c.out->summary["eigenvalue_shift"] = eig;
    c.out->summary["sector_weight_shift"] = shift;
    c.at_most("truncation_shift", std::max(eig, shift), 1e-4);
  }
}

extract::Positions random_positions(std::mt19937_64& rng, int n, double box) {
  std::uniform_real_distribution<double> u(0.0, box);
  extract::Positions x(static_cast<size_t>(n));
  for (auto& p : x) p = {u(rng), 0.0, 0.0};
  return x;
}

void run_extract(Reader p, Context& c) {
  const auto spec = parse_lattice(p.child("lattice"));
  require(spec.dim == 1, "extract scenarios use a one-dimensional lattice");
  const qft::LatticeModel model(spec);
  const auto& lat = model.lattice();
  const auto st = parse_field_state(p.child("state"), lat);
  const double t_max = p.num("t_max", 5.0);
  auto routes = p.optional_child("compare_routes");
  auto ortho = p.optional_child("orthogonality");
  auto kg = p.optional_child("kg");
  auto norm = p.optional_child("norm_scale");
  p.finish();
  auto rng = rng_for(c, 21);
  std::uniform_real_distribution<double> ut(0.0, t_max);
  const double L = spec.box;

  if (routes) {
    const int n = static_cast<int>(routes->integer("n", 1));
    const int points = static_cast<int>(routes->integer("points", 100));
    routes->finish();
    std::ostringstream os;
    os << "# t";
    for (int j = 0; j < n; ++j) os << "\tx" << j + 1;
    os << "\tre_ladder\tim_ladder\tre_quadrature\tim_quadrature\n";
    double worst = 0.0;
    for (int i = 0; i < points; ++i) {
      const auto x = random_positions(rng, n, L);
      const double t = ut(rng);
      const auto a = extract::equal_time_wf(model, st, x, t), b = extract::quadrature_wf(model, st, x, t);
      worst = std::max(worst, std::abs(a - b));
      os << fmt(t);
      for (const auto& xi : x) os << '\t' << fmt(xi[0]);
      os << '\t' << fmt(a.real()) << '\t' << fmt(a.imag()) << '\t' << fmt(b.real()) << '\t' << fmt(b.imag()) << '\n';
    }
    c.file("wave_function.tsv", os.str());
    c.at_most("ladder_vs_quadrature", worst, 1e-8);
  }
  if (ortho) {
    std::vector<std::pair<int, int>> pairs;
    if (const Json* v = ortho->raw("pairs")) {
      require(v->is_array(), ortho->where("pairs") + " must be an array of [n', n]");
      for (const auto& e : *v) {
        require(e.is_array() && e.size() == 2 && e[0].is_number_integer() && e[1].is_number_integer(),
                ortho->where("pairs") + " entries must be [n', n]");
        pairs.push_back({e[0].get<int>(), e[1].get<int>()});
      }
    } else {
      pairs = {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {1, 0}, {2, 1}, {3, 2}};
    }
    const int samples = static_cast<int>(ortho->integer("samples", 10));
    ortho->finish();
    double worst = 0.0;
    std::ostringstream os;
    os << "# n_fields\tn_quanta\tmax_overlap\n";
    for (const auto& [np, n] : pairs) {
      require(np >= 0 && n >= 0 && n <= lat.max_particles(), "orthogonality pair outside the truncated space");
      std::vector<extract::Positions> xs;
      for (int s = 0; s < samples; ++s) xs.push_back(random_positions(rng, np, L));
      const double v = extract::orthogonality_check(lat, np, n, xs, lat.n_max() + np + 1);
      worst = std::max(worst, v);
      os << np << '\t' << n << '\t' << fmt(v) << '\n';
    }
    c.file("orthogonality.tsv", os.str());
    c.at_most("orthogonality", worst, 1e-10);
  }
  if (kg) {
    const int n = static_cast<int>(kg->integer("n", 2));
    const int samples = static_cast<int>(kg->integer("samples", 5));
    const double h = kg->num("h", 1e-3);
    kg->finish();
    require(n >= 1 && n <= lat.n_max(), "kg check needs 1 <= n <= n_max");
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      const auto x = random_positions(rng, n, L);
      std::vector<double> ts;
      for (int j = 0; j < n; ++j) ts.push_back(ut(rng));
      worst = std::max(worst, extract::kg_residual(model, st, x, ts, h));
    }
    c.at_most("kg_residual", worst, 1e-5);
  }
  if (norm) {
    const auto sectors = norm->ints("sectors", std::vector<long>{1, 2});
    const double factor = norm->num("factor", 1e-6);
    const int samples = static_cast<int>(norm->integer("samples", 10));
    norm->finish();
    double worst = 0.0;
    std::ostringstream os;
    os << "# sector\tparticle\tt\tv\tv_scaled\n";
    for (long n : sectors) {
      require(n >= 1 && n <= lat.n_max(), "norm_scale sectors must lie in 1..n_max");
      auto scaled = st;
      for (size_t i = 0; i < lat.basis_size(); ++i)
        if (lat.total_number(i) == n) scaled.c(static_cast<Eigen::Index>(i)) *= factor;
      for (int s = 0; s < samples; ++s) {
        const auto x = random_positions(rng, static_cast<int>(n), L);
        const double t = ut(rng);
        for (int j = 0; j < n; ++j) {
          const double a = extract::particle_velocity(model, st, j, x, t)[0];
          const double b = extract::particle_velocity(model, scaled, j, x, t)[0];
          worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
          os << n << '\t' << j << '\t' << fmt(t) << '\t' << fmt(a) << '\t' << fmt(b) << '\n';
        }
      }
    }
    c.file("velocity.tsv", os.str());
    c.at_most("velocity_norm_change", worst, 1e-10);
  }
}

measure::EnsembleSettings parse_ensemble(Reader& p, const Context& c) {
  measure::EnsembleSettings s;
  const long samples = p.integer("samples", 10000);
  require(samples > 0, p.where("samples") + " must be positive");
  s.samples = static_cast<size_t>(samples);
  s.grid_x = static_cast<int>(p.integer("grid_x", s.grid_x));
  s.grid_y = static_cast<int>(p.integer("grid_y", s.grid_y));
  s.extent = p.num("extent", s.extent);
  s.t_post = p.num("t_post", s.t_post);
  s.tol = p.num("tol", s.tol);
  s.threads = static_cast<int>(p.integer("threads", 1));
  s.seed = c.seed;
  return s;
}

void ensemble_checks(Context& c, const measure::EnsembleReport& r) {
  double zmax = 0.0;
  for (double z : r.z) zmax = std::max(zmax, std::abs(z));
  c.check("ideal_pointer", r.ideal ? 1.0 : 0.0, 1, 1);
  c.at_most("born_max_z", zmax, 4.0);
  c.at_most("gap_fraction", static_cast<double>(r.gap_hits) / static_cast<double>(r.samples), 1e-3);
  c.at_most("failures", static_cast<double>(r.failures), 0.0);
  c.at_most("channel_guidance", r.max_guidance_deviation, 1e-6);
}

void emit_ensemble(Context& c, const measure::EnsembleReport& r) {
  std::ostringstream os, sum;
  measure::write_ensemble(os, r);
  measure::write_ensemble_summary(sum, r);
  c.file("ensemble.tsv", os.str());
  c.file("summary.tsv", sum.str());
  c.out->summary["frequency"] = r.frequency;
  c.out->summary["probability"] = r.probability;
  c.out->summary["z"] = r.z;
}

void run_measure(Reader p, Context& c) {
  const auto sys = parse_system(p.child("system"));
  measure::Observable obs;
  if (auto o = p.optional_child("observable")) {
    obs.slope = o->num("slope", 1.0);
    obs.offset = o->num("offset", 0.0);
    o->finish();
  }
  const auto pointer = parse_pointer(p.optional_child("pointer"));
  auto settings = parse_ensemble(p, c);
  auto mom = p.optional_child("momentum");
  auto empty = p.optional_child("empty_channel");
  const bool again = p.flag("remeasure", false);
  p.finish();
  const auto joint = measure::entangle(sys, obs, pointer);
  const auto r = measure::run_ensemble(joint, settings);
  emit_ensemble(c, r);
  ensemble_checks(c, r);
  if (mom) {
    auto edges = mom->nums("edges", std::vector<double>{});
    const int points = static_cast<int>(mom->integer("points", 4096));
    mom->finish();
    if (edges.empty()) {
      int lo = *std::min_element(sys.n.begin(), sys.n.end()), hi = *std::max_element(sys.n.begin(), sys.n.end());
      lo = std::min(lo, 0);
      hi = std::max(hi, 0);
      for (int n = lo; n <= hi + 1; ++n) edges.push_back(2.0 * kPi * (n - 0.5) / sys.box);
    }
    const auto d = measure::momentum_distribution(sys, 0.0, edges, points);
    std::ostringstream os;
    os << "# p_lo\tp_hi\tbohmian\tspectral\n";
    for (size_t b = 0; b + 1 < d.edges.size(); ++b)
      os << fmt(d.edges[b]) << '\t' << fmt(d.edges[b + 1]) << '\t' << fmt(d.bohmian[b]) << '\t' << fmt(d.spectral[b])
         << '\n';
    c.file("momentum.tsv", os.str());
    c.out->summary["momentum_tv"] = d.tv_distance;
  }
  if (empty) {
    const int samples = static_cast<int>(empty->integer("samples", 5));
    const double t_post = empty->num("t_post", 2.0);
    empty->finish();
    double worst = 0.0;
    int used = 0;
    for (const auto& o : r.outcomes) {
      if (used >= samples) break;
      if (o.channel < 0 || settings.t_post != 0.0) continue;
      worst = std::max(worst, measure::empty_channel_deviation(joint, o.x, o.y, t_post, 1e-11));
      ++used;
    }
    require(used > 0, "empty_channel needs samples that end inside a channel with t_post = 0");
    c.at_most("empty_channel", worst, 1e-8);
  }
  if (again) {
    auto s = settings;
    s.samples = std::min<size_t>(settings.samples, 1000);
    const auto rep = measure::remeasure(joint, s);
    c.check("idempotent", rep.idempotent ? 1.0 : 0.0, 1, 1);
  }
}

void run_born(Reader p, Context& c) {
  const auto sys = parse_system(p.child("system"));
  const auto pointer = parse_pointer(p.optional_child("pointer"));
  auto settings = parse_ensemble(p, c);
  std::vector<long> sizes{100, 1000, 10000};
  int reps = 20;
  if (auto conv = p.optional_child("convergence")) {
    sizes = conv->ints("sizes", sizes);
    reps = static_cast<int>(conv->integer("repetitions", reps));
    conv->finish();
  }
  p.finish();
  require(sizes.size() >= 2 && reps > 0, "convergence needs two sizes and positive repetitions");
  for (long s : sizes) require(s > 0, "convergence sizes must be positive");
  const auto joint = measure::entangle(sys, measure::Observable{}, pointer);
  const auto r = measure::run_ensemble(joint, settings);
  emit_ensemble(c, r);
  ensemble_checks(c, r);
  std::vector<size_t> n(sizes.begin(), sizes.end());
  const auto conv = measure::born_convergence(joint, n, reps, settings);
  std::ostringstream os;
  os << "# samples\tmean_tv\n";
  for (const auto& pt : conv.points) os << pt.samples << '\t' << fmt(pt.mean_tv) << '\n';
  c.file("convergence.tsv", os.str());
  c.check("convergence_slope", conv.slope, -0.7, -0.3);
}

void run_collapse(Reader p, Context& c) {
  const auto spec = parse_lattice(p.child("lattice"));
  const qft::LatticeModel model(spec);
  const auto st = parse_field_state(p.child("state"), model.lattice());
  measure::CollapseSpec cs;
  cs.pointer = parse_pointer(p.optional_child("pointer"));
  const long runs = p.integer("runs", 1000);
  require(runs > 0, p.where("runs") + " must be positive");
  cs.runs = static_cast<size_t>(runs);
  cs.t_end = p.num("t_end", 0.0);
  cs.tol = p.num("tol", cs.tol);
  cs.grid = static_cast<int>(p.integer("grid", cs.grid));
  cs.grid_y = static_cast<int>(p.integer("grid_y", cs.grid_y));
  cs.extent = p.num("extent", cs.extent);
  cs.threads = static_cast<int>(p.integer("threads", 1));
  cs.trace_points = static_cast<int>(p.integer("trace_points", 0));
  cs.seed = c.seed;
  p.finish();
  const auto r = measure::effectivity_collapse(model, st, cs);
  std::ostringstream os;
  measure::write_collapse(os, r);
  c.file("collapse.tsv", os.str());
  if (cs.trace_points > 0) {
    std::ostringstream tr;
    tr << "# run\tt\tsector\te\n";
    for (const auto& run : r.runs)
      for (const auto& [t, e] : run.trace)
        for (size_t n = 0; n < e.size(); ++n)
          if (r.probability[n] > 1e-14) tr << run.index << '\t' << fmt(t) << '\t' << n << '\t' << fmt(e[n]) << '\n';
    c.file("effectivity_trace.tsv", tr.str());
  }
  double zmax = 0.0;
  for (double z : r.z) zmax = std::max(zmax, std::abs(z));
  std::vector<double> freq;
  for (long h : r.hits) freq.push_back(static_cast<double>(h) / static_cast<double>(cs.runs));
  c.out->summary["frequency"] = freq;
  c.out->summary["probability"] = r.probability;
  c.check("ideal_pointer", r.ideal ? 1.0 : 0.0, 1, 1);
  c.at_most("uncollapsed_runs", static_cast<double>(r.uncollapsed + r.failures), 0.0);
  c.at_most("split_max_z", zmax, 4.0);
}

std::string iso_time(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::io, "cannot write " + tmp.string());
    os << contents;
    if (!os.flush()) fail(ErrorKind::io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

}  // namespace

bool RunResult::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const std::vector<std::string>& kinds() {
  static const std::vector<std::string> k{"evolve", "trajectory", "fig1",    "nonrel", "qft-evolve",
                                          "extract", "measure",   "born",    "collapse"};
  return k;
}

std::uint64_t config_hash(const Json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunResult run(const Json& config_in, const RunOptions& opts) {
  const auto start = std::chrono::system_clock::now();
  Json config = config_in;
  if (opts.seed) config["seed"] = *opts.seed;
  Reader top(config, "config");
  RunResult result;
  result.kind = top.str("kind");
  require(std::find(kinds().begin(), kinds().end(), result.kind) != kinds().end(),
          "unknown kind \"" + result.kind + "\"");
  const Json* seed = top.raw("seed");
  require(!seed || seed->is_number_unsigned() || (seed->is_number_integer() && seed->get<long long>() >= 0),
          "config.seed must be a nonnegative integer");
  result.seed = seed ? seed->get<std::uint64_t>() : 42;
  top.str("output", "");     // directory hint, resolved by the caller
  top.str("description", "");
  Context ctx;
  ctx.seed = result.seed;
  ctx.out = &result;
  if (auto checks = top.optional_child("checks")) {
    for (const auto& [name, v] : config["checks"].items()) {
      if (v.is_number()) ctx.overrides[name] = {-kInf, v.get<double>()};
      else {
        require(v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number(),
                "config.checks." + name + " must be a number (upper bound) or [lo, hi]");
        ctx.overrides[name] = {v[0].get<double>(), v[1].get<double>()};
      }
      checks->raw(name);
    }
  }
  static const Json kEmpty = Json::object();
  Reader params = config.contains("params") ? top.child("params") : Reader(kEmpty, "config.params");
  top.finish();
  result.config_hash = config_hash(config);

  const std::string& k = result.kind;
  if (k == "evolve") run_evolve(params, ctx);
  else if (k == "trajectory") run_trajectory(params, ctx);
  else if (k == "fig1") run_fig1(params, ctx);
  else if (k == "nonrel") run_nonrel(params, ctx);
  else if (k == "qft-evolve") run_qft_evolve(params, ctx);
  else if (k == "extract") run_extract(params, ctx);
  else if (k == "measure") run_measure(params, ctx);
  else if (k == "born") run_born(params, ctx);
  else run_collapse(params, ctx);

  for (const auto& [name, _] : ctx.overrides)
    require(std::any_of(result.checks.begin(), result.checks.end(), [&](const Check& c) { return c.name == name; }),
            "config.checks." + name + " names no check of this scenario");

  result.summary["kind"] = k;
  result.summary["seed"] = result.seed;
  result.summary["all_passed"] = result.all_passed();
  result.files["checks.tsv"] = format_checks(result.checks);
  result.files["summary.json"] = result.summary.dump(2) + "\n";

  if (!opts.out_dir.empty()) {
    const fs::path dir(opts.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create output directory " + dir.string() + ": " + ec.message());
    for (const auto& [name, contents] : result.files) {
      write_atomic(dir / name, contents);
      result.written.push_back((dir / name).string());
    }
    Json manifest;
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << result.config_hash;
    manifest["config_hash"] = hash.str();
    manifest["version"] = BOHM_VERSION;
    manifest["kind"] = k;
    manifest["seed"] = result.seed;
    manifest["start"] = iso_time(start);
    manifest["end"] = iso_time(std::chrono::system_clock::now());
    manifest["outputs"] = Json::array();
    for (const auto& [name, _] : result.files) manifest["outputs"].push_back(name);
    manifest["config"] = config;
    write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    result.written.push_back((dir / "manifest.json").string());
  }
  return result;
}

std::string format_checks(const std::vector<Check>& checks) {
  std::ostringstream os;
  os << "# check\tvalue\tlo\thi\tpass\n";
  for (const auto& c : checks)
    os << c.name << '\t' << fmt(c.value) << '\t' << fmt(c.lo) << '\t' << fmt(c.hi) << '\t' << (c.passed ? "pass" : "FAIL")
       << '\n';
  return os.str();
}

const Preset* find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace bohm::scenario
