#include "bohm/bohm.h"

#include <algorithm>
#include <exception>
#include <memory>
#include <string>
#include <vector>

#include "bohm/error.hpp"
#include "bohm/extract.hpp"
#include "bohm/qft.hpp"
#include "bohm/relkin.hpp"
#include "bohm/scenario.hpp"
#include "bohm/traject.hpp"

struct bohm_wave {
  bohm::relkin::ModeSum wave;
};

struct bohm_path {
  bohm::traject::Trajectory path;
};

struct bohm_lattice {
  bohm::qft::LatticeModel model;
};

struct bohm_run {
  bohm::scenario::RunResult result;
  std::string checks;
  std::string summary;
};

namespace {

thread_local std::string g_error;

bohm_status to_status(bohm::ErrorKind k) {
  switch (k) {
    case bohm::ErrorKind::invalid_input: return BOHM_ERR_INVALID;
    case bohm::ErrorKind::node: return BOHM_ERR_NODE;
    case bohm::ErrorKind::numerical: return BOHM_ERR_NUMERICAL;
    case bohm::ErrorKind::under_resolved: return BOHM_ERR_UNDER_RESOLVED;
    case bohm::ErrorKind::io: return BOHM_ERR_IO;
  }
  return BOHM_ERR_INTERNAL;
}

template <class F>
bohm_status guard(F&& f) {
  g_error.clear();
  try {
    f();
    return BOHM_OK;
  } catch (const bohm::Error& e) {
    g_error = e.what();
    return to_status(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_error = std::string("config: ") + e.what();
    return BOHM_ERR_INVALID;
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return BOHM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return BOHM_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) bohm::fail(bohm::ErrorKind::invalid_input, std::string(what) + " is NULL");
}

bohm::relkin::FourVector point(int dim, const double* x) {
  bohm::relkin::FourVector v(dim);
  for (int i = 0; i <= dim; ++i) v[i] = x[i];
  return v;
}

bohm::qft::FunctionalState field_state(const bohm_lattice* l, const double* re, const double* im) {
  const auto n = static_cast<Eigen::Index>(l->model.lattice().basis_size());
  bohm::qft::FunctionalState s;
  s.c.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.c(i) = {re[i], im ? im[i] : 0.0};
  return s;
}

bohm_status finish_run(bohm::scenario::RunResult&& r, bohm_run** out) {
  auto run = std::make_unique<bohm_run>();
  run->result = std::move(r);
  run->checks = bohm::scenario::format_checks(run->result.checks);
  run->summary = run->result.summary.dump(2);
  *out = run.release();
  return BOHM_OK;
}

bohm::scenario::RunOptions options(const bohm_run_options* o) {
  bohm::scenario::RunOptions r;
  if (!o) return r;
  if (o->has_seed) r.seed = o->seed;
  if (o->out_dir) r.out_dir = o->out_dir;
  return r;
}

}  // namespace

extern "C" {

const char* bohm_version(void) { return BOHM_VERSION; }

const char* bohm_last_error(void) { return g_error.c_str(); }

const char* bohm_status_name(bohm_status s) {
  switch (s) {
    case BOHM_OK: return "ok";
    case BOHM_ERR_INVALID: return "invalid input";
    case BOHM_ERR_NODE: return "node";
    case BOHM_ERR_NUMERICAL: return "numerical failure";
    case BOHM_ERR_UNDER_RESOLVED: return "under-resolved";
    case BOHM_ERR_IO: return "i/o error";
    case BOHM_ERR_CHECK: return "check failed";
    case BOHM_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

bohm_status bohm_wave_create(double mass, int dim, size_t n, const double* k, const double* re, const double* im,
                             int plane_waves, bohm_wave** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    need(k, "k");
    need(re, "re");
    bohm::require(dim == 1 || dim == 3, "dimension must be 1 or 3");
    std::vector<bohm::relkin::Mode> modes(n);
    for (size_t i = 0; i < n; ++i) {
      for (int d = 0; d < dim; ++d) modes[i].k[static_cast<size_t>(d)] = k[i * static_cast<size_t>(dim) + static_cast<size_t>(d)];
      modes[i].amplitude = {re[i], im ? im[i] : 0.0};
    }
    auto w = plane_waves ? bohm::relkin::ModeSum::from_plane_waves(mass, dim, modes)
                         : bohm::relkin::ModeSum(mass, dim, modes);
    *out = new bohm_wave{std::move(w)};
  });
}

void bohm_wave_free(bohm_wave* w) { delete w; }

bohm_status bohm_wave_eval(const bohm_wave* w, const double* x, double* re, double* im) {
  return guard([&] {
    need(w, "wave");
    need(x, "x");
    const auto s = bohm::relkin::evaluate(w->wave, point(w->wave.dim(), x), bohm::relkin::Derivatives::first);
    if (re) *re = s.psi.real();
    if (im) *im = s.psi.imag();
  });
}

bohm_status bohm_wave_current(const bohm_wave* w, const double* x, double* j) {
  return guard([&] {
    need(w, "wave");
    need(x, "x");
    need(j, "j");
    const auto s = bohm::relkin::evaluate(w->wave, point(w->wave.dim(), x), bohm::relkin::Derivatives::first);
    const auto c = bohm::relkin::current(s);
    for (int mu = 0; mu <= w->wave.dim(); ++mu) j[mu] = c[mu];
  });
}

bohm_status bohm_wave_particle_number(const bohm_wave* w, double* n) {
  return guard([&] {
    need(w, "wave");
    need(n, "n");
    *n = bohm::relkin::particle_number(w->wave);
  });
}

bohm_status bohm_path_integrate(const bohm_wave* w, const double* x0, double tau_span, double tol, bohm_path** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    need(w, "wave");
    need(x0, "x0");
    bohm::traject::IntegrateOptions o;
    if (tol > 0.0) o.tol = tol;
    auto tr = bohm::traject::integrate(w->wave, point(w->wave.dim(), x0), tau_span, o);
    if (tr.status == bohm::traject::TrajStatus::hit_node)
      bohm::fail(bohm::ErrorKind::node, "trajectory reached a node: " + tr.message);
    if (tr.status == bohm::traject::TrajStatus::step_underflow)
      bohm::fail(bohm::ErrorKind::numerical, "trajectory step underflow: " + tr.message);
    *out = new bohm_path{std::move(tr)};
  });
}

void bohm_path_free(bohm_path* p) { delete p; }

size_t bohm_path_size(const bohm_path* p) { return p ? p->path.points.size() : 0; }

bohm_status bohm_path_point(const bohm_path* p, size_t i, double* tau, double* x) {
  return guard([&] {
    need(p, "path");
    bohm::require(i < p->path.points.size(), "point index out of range");
    const auto& pt = p->path.points[i];
    if (tau) *tau = pt.tau;
    if (x)
      for (int mu = 0; mu <= p->path.dim; ++mu) x[mu] = pt.x[mu];
  });
}

size_t bohm_path_reversal_count(const bohm_path* p) { return p ? p->path.reversals.size() : 0; }

bohm_status bohm_path_reversal(const bohm_path* p, size_t i, double* tau, double* x, double* j0) {
  return guard([&] {
    need(p, "path");
    bohm::require(i < p->path.reversals.size(), "reversal index out of range");
    const auto& r = p->path.reversals[i];
    if (tau) *tau = r.tau;
    if (j0) *j0 = r.j0;
    if (x)
      for (int mu = 0; mu <= p->path.dim; ++mu) x[mu] = r.x[mu];
  });
}

bohm_status bohm_path_crossings(const bohm_path* p, double t_slice, int* signs, size_t cap, size_t* count) {
  return guard([&] {
    need(p, "path");
    const auto rec = bohm::traject::crossings(p->path, t_slice);
    if (rec.out_of_range) bohm::fail(bohm::ErrorKind::invalid_input, "slice outside the time range of the path");
    if (count) *count = rec.crossings.size();
    for (size_t i = 0; signs && i < std::min(cap, rec.crossings.size()); ++i) signs[i] = rec.crossings[i].sign;
  });
}

bohm_status bohm_lattice_create(int modes, int n_max, double mass, double coupling, double box, bohm_lattice** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    bohm::qft::LatticeSpec s;
    s.modes = modes;
    s.n_max = n_max;
    s.mass = mass;
    s.coupling = coupling;
    s.box = box;
    *out = new bohm_lattice{bohm::qft::LatticeModel(s)};
  });
}

void bohm_lattice_free(bohm_lattice* l) { delete l; }

size_t bohm_lattice_basis_size(const bohm_lattice* l) { return l ? l->model.lattice().basis_size() : 0; }

bohm_status bohm_lattice_evolve(const bohm_lattice* l, const double* re, const double* im, double t, double* re_out,
                                double* im_out) {
  return guard([&] {
    need(l, "lattice");
    need(re, "re");
    need(re_out, "re_out");
    need(im_out, "im_out");
    const auto c = l->model.propagate(field_state(l, re, im).c, t);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      re_out[i] = c(i).real();
      im_out[i] = c(i).imag();
    }
  });
}

bohm_status bohm_lattice_wave_function(const bohm_lattice* l, const double* re, const double* im, double t, int n,
                                       const double* x, double* out_re, double* out_im) {
  return guard([&] {
    need(l, "lattice");
    need(re, "re");
    bohm::require(n >= 0, "n must be nonnegative");
    if (n > 0) need(x, "x");
    bohm::extract::Positions pos(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) pos[static_cast<size_t>(j)] = {x[j], 0.0, 0.0};
    const auto v = bohm::extract::equal_time_wf(l->model, field_state(l, re, im), pos, t);
    if (out_re) *out_re = v.real();
    if (out_im) *out_im = v.imag();
  });
}

bohm_status bohm_run_config(const char* config_json, const bohm_run_options* opts, bohm_run** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    need(config_json, "config");
    auto r = bohm::scenario::run(nlohmann::json::parse(config_json), options(opts));
    finish_run(std::move(r), out);
  });
}

bohm_status bohm_run_preset(const char* name, const bohm_run_options* opts, bohm_run** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    need(name, "name");
    const auto* p = bohm::scenario::find_preset(name);
    if (!p) bohm::fail(bohm::ErrorKind::invalid_input, std::string("unknown preset \"") + name + "\"");
    finish_run(bohm::scenario::run(p->config, options(opts)), out);
  });
}

void bohm_run_free(bohm_run* r) { delete r; }

int bohm_run_passed(const bohm_run* r) { return r && r->result.all_passed() ? 1 : 0; }

size_t bohm_run_check_count(const bohm_run* r) { return r ? r->result.checks.size() : 0; }

bohm_status bohm_run_check(const bohm_run* r, size_t i, const char** name, double* value, double* lo, double* hi,
                           int* passed) {
  return guard([&] {
    need(r, "run");
    bohm::require(i < r->result.checks.size(), "check index out of range");
    const auto& c = r->result.checks[i];
    if (name) *name = c.name.c_str();
    if (value) *value = c.value;
    if (lo) *lo = c.lo;
    if (hi) *hi = c.hi;
    if (passed) *passed = c.passed ? 1 : 0;
  });
}

const char* bohm_run_checks_table(const bohm_run* r) { return r ? r->checks.c_str() : ""; }

const char* bohm_run_summary(const bohm_run* r) { return r ? r->summary.c_str() : ""; }

size_t bohm_run_output_count(const bohm_run* r) { return r ? r->result.written.size() : 0; }

const char* bohm_run_output(const bohm_run* r, size_t i) {
  return r && i < r->result.written.size() ? r->result.written[i].c_str() : nullptr;
}

size_t bohm_preset_count(void) { return bohm::scenario::presets().size(); }

const char* bohm_preset_name(size_t i) {
  const auto& p = bohm::scenario::presets();
  return i < p.size() ? p[i].name.c_str() : nullptr;
}

const char* bohm_preset_description(size_t i) {
  const auto& p = bohm::scenario::presets();
  return i < p.size() ? p[i].description.c_str() : nullptr;
}

const char* bohm_preset_config(const char* name) {
  static thread_local std::string text;
  const auto* p = name ? bohm::scenario::find_preset(name) : nullptr;
  if (!p) return nullptr;
  text = p->config.dump(2);
  return text.c_str();
}

}  // extern "C"
