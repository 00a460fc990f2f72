// Acceptance suite: one PASS/FAIL line per criterion. Every criterion runs its
// preset(s) through the scenario layer and re-judges the reported values
// against the bounds pinned below, together with a wall-clock limit. The
// presets' own thresholds must pass as well.
//
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bohm/scenario.hpp"

namespace {

using bohm::scenario::RunResult;

struct Verdict {
  bool ok = true;
  std::ostringstream note;

  void need(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      note << " FAILED[" << what << "]";
    }
  }
};

double value(const RunResult& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return c.value;
  throw std::runtime_error("run reports no check named " + name);
}

RunResult run_preset(const std::string& name, Verdict& v) {
  const auto* p = bohm::scenario::find_preset(name);
  if (!p) throw std::runtime_error("missing preset " + name);
  auto r = bohm::scenario::run(p->config);
  v.need(r.all_passed(), name + " preset thresholds");
  return r;
}

struct Criterion {
  int id;
  const char* title;
  double limit_s;
  std::function<void(Verdict&)> body;
};

std::vector<Criterion> criteria() {
  return {
      {1, "fig1 crossing record and pair events", 10.0,
       [](Verdict& v) {
         const auto r = run_preset("fig1", v);
         const auto signs = r.summary.at("signs").get<std::vector<int>>();
         const double j0 = value(r, "event_j0");
         v.need(signs == std::vector<int>{1, -1, 1}, "signs (+1,-1,+1)");
         v.need(value(r, "crossing_count") == 3.0, "crossing count 3");
         v.need(value(r, "crossing_sum") == 1.0, "crossing sum 1");
         v.need(j0 <= 1e-8, "j0 at events <= 1e-8");
         v.note << " signs=(";
         for (size_t i = 0; i < signs.size(); ++i) v.note << (i ? "," : "") << std::showpos << signs[i] << std::noshowpos;
         v.note << ") event_j0=" << j0;
       }},
      {2, "particle-number conservation and N_phys >= |N|", 30.0,
       [](Verdict& v) {
         const auto r = run_preset("conservation", v);
         const double drift = value(r, "conservation"), slack = value(r, "nphys_bound"),
                      excess = value(r, "nphys_excess");
         v.need(drift <= 1e-8, "relative dN <= 1e-8");
         v.need(slack >= -1e-10, "N_phys - |N| >= 0");
         v.need(excess > 1e-6, "N_phys > N on the witness");
         v.note << " dN=" << drift << " min(N_phys-|N|)=" << slack << " excess=" << excess;
       }},
      {3, "Hamilton-Jacobi residual and equation-of-motion order", 60.0,
       [](Verdict& v) {
         const auto r = run_preset("hj-eom", v);
         const double hj = value(r, "hamilton_jacobi"), order = value(r, "eom_order");
         v.need(hj < 1e-7, "HJ residual < 1e-7");
         v.need(std::abs(order - 2.0) <= 0.3, "EOM order 2 +- 0.3");
         v.note << " hj=" << hj << " order=" << order;
       }},
      {4, "nonrelativistic limit order", 60.0,
       [](Verdict& v) {
         const auto r = run_preset("nonrel", v);
         const double order = value(r, "nonrel_order");
         v.need(std::abs(order - 2.0) <= 0.3, "order 2 +- 0.3");
         v.note << " order=" << order;
       }},
      {5, "free lattice field: constant moduli, exact phases", 10.0,
       [](Verdict& v) {
         const auto r = run_preset("qft-free", v);
         const double drift = value(r, "coefficient_drift"), phase = value(r, "phase_error");
         v.need(drift < 1e-10, "max d|c| < 1e-10");
         v.need(phase < 1e-8, "phase error < 1e-8");
         v.note << " d|c|=" << drift << " phase=" << phase;
       }},
      {6, "interacting lattice field: sector weights move, cutoff stable", 120.0,
       [](Verdict& v) {
         const auto r = run_preset("qft-interacting", v);
         const double change = value(r, "sector_change"), shift = value(r, "truncation_shift");
         v.need(change > 1e-3, "sector change > 1e-3");
         v.need(shift < 1e-4, "cutoff doubling shift < 1e-4");
         v.note << " change=" << change << " shift=" << shift;
       }},
      {7, "wave-function extraction: two routes, orthogonality, KG", 60.0,
       [](Verdict& v) {
         const auto r = run_preset("extract", v);
         const double routes = value(r, "ladder_vs_quadrature"), orth = value(r, "orthogonality"),
                      kg = value(r, "kg_residual");
         v.need(routes < 1e-8, "ladder vs quadrature < 1e-8");
         v.need(orth < 1e-10, "orthogonality < 1e-10");
         v.need(kg < 1e-5, "KG residual < 1e-5");
         v.note << " routes=" << routes << " orth=" << orth << " kg=" << kg;
       }},
      {8, "velocities independent of sector norms", 10.0,
       [](Verdict& v) {
         const auto r = run_preset("velocity-norm", v);
         const double change = value(r, "velocity_norm_change");
         v.need(change < 1e-10, "relative change < 1e-10");
         v.note << " change=" << change;
       }},
      {9, "Born rule: 4-sigma test at N=10^4 and N^-1/2 convergence", 120.0,
       [](Verdict& v) {
         const auto r = run_preset("born", v);
         const double z = value(r, "born_max_z"), slope = value(r, "convergence_slope");
         v.need(value(r, "ideal_pointer") == 1.0, "ideal pointer");
         v.need(value(r, "failures") == 0.0, "no failed samples");
         v.need(z < 4.0, "max |z| < 4");
         v.need(std::abs(slope + 0.5) <= 0.2, "slope -0.5 +- 0.2");
         v.note << " max|z|=" << z << " slope=" << slope;
       }},
      {10, "effectivity collapse under a number pointer", 300.0,
       [](Verdict& v) {
         const auto r = run_preset("collapse", v);
         const double open = value(r, "uncollapsed_runs"), z = value(r, "split_max_z");
         v.need(value(r, "ideal_pointer") == 1.0, "ideal pointer");
         v.need(open == 0.0, "every run has one e_n > 1 - 1e-6");
         v.need(z < 4.0, "50/50 split within 4 sigma");
         v.note << " uncollapsed=" << open << " split|z|=" << z;
       }},
  };
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(v);
    } catch (const std::exception& e) {
      v.ok = false;
      v.note << " error: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) {
      v.ok = false;
      v.note << " FAILED[runtime]";
    }
    std::printf("%s  %2d  %s:%s  (%.2f s, limit %.0f s)\n", v.ok ? "PASS" : "FAIL", c.id, c.title,
                v.note.str().c_str(), secs, c.limit_s);
    std::fflush(stdout);
    if (!v.ok) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
