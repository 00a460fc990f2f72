#include "bohm/scenario.hpp"

namespace bohm::scenario {

namespace {

Preset make(const char* name, const char* description, const char* config) {
  return {name, description, Json::parse(config)};
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> p{
      make("fig1", "two-mode wave with a negative-density band: one path, one created and one annihilated pair",
           R"({"kind": "fig1", "seed": 1, "params": {"amplitude": 1.2, "tau_span": 80.0, "tol": 1e-9}})"),
      make("conservation", "signed particle number of 20 random waves over 10 slices; |j0| integral of a witness",
           R"({"kind": "evolve", "seed": 7,
               "params": {
                 "waves": [{"mass": 1.0, "plane_waves": true,
                            "modes": [{"k": [1.0], "re": 1.0}, {"k": [0.0], "re": 1.2}]}],
                 "random": {"count": 20, "modes": 4, "kmax": 3},
                 "t_begin": 0.0, "t_end": 20.0, "slices": 10, "grid": 256},
               "checks": {"nphys_excess": [1e-6, 1e300]}})"),
      make("hj-eom", "Hamilton-Jacobi residual on the two-mode path and the order of the equation-of-motion check",
           R"({"kind": "trajectory", "seed": 1,
               "params": {
                 "wave": {"mass": 1.0, "plane_waves": true,
                          "modes": [{"k": [1.0], "re": 1.0}, {"k": [0.0], "re": 1.2}]},
                 "x0": [0.0, 0.0], "tau_span": 40.0, "eom_steps": [0.04, 0.02, 0.01]}})"),
      make("nonrel", "Klein-Gordon against Schroedinger guidance for k/m = 0.1, 0.05, 0.025",
           R"({"kind": "nonrel", "seed": 1, "params": {"epsilons": [0.1, 0.05, 0.025], "x0": 0.3}})"),
      make("qft-free", "free lattice field, two modes, n_max 5: constant moduli and single-mode phases",
           R"({"kind": "qft-evolve", "seed": 1,
               "params": {
                 "lattice": {"modes": 2, "n_max": 5, "coupling": 0.0},
                 "state": {"terms": [{"occ": [0, 0], "re": 1.0}, {"occ": [1, 0], "re": 0.5, "im": 0.3},
                                     {"occ": [2, 3], "re": -0.4}, {"occ": [5, 5], "im": 0.2}]},
                 "slices": 64}})"),
      make("qft-interacting", "quartic coupling 0.2: sector weights move; cutoff doubling leaves them in place",
           R"({"kind": "qft-evolve", "seed": 1,
               "params": {
                 "lattice": {"modes": 2, "n_max": 8, "coupling": 0.2},
                 "state": {"terms": [{"occ": [0, 0], "re": 1.0}, {"occ": [1, 1], "re": 0.5}]},
                 "t_end": 10.0, "slices": 40}})"),
      make("extract", "n-particle wave functions: ladder against quadrature, orthogonality, free Klein-Gordon",
           R"({"kind": "extract", "seed": 3,
               "params": {
                 "lattice": {"modes": 3, "n_max": 3, "coupling": 0.0},
                 "state": {"terms": [{"occ": [0, 0, 0], "re": 0.5}, {"occ": [0, 1, 0], "re": 0.6},
                                     {"occ": [0, 0, 1], "im": 0.6}, {"occ": [1, 0, 0], "re": 0.3},
                                     {"occ": [0, 1, 1], "re": 0.7}, {"occ": [2, 0, 0], "re": 0.2, "im": 0.1},
                                     {"occ": [0, 2, 1], "re": 0.3}]},
                 "compare_routes": {"n": 1, "points": 100},
                 "orthogonality": {"samples": 10},
                 "kg": {"n": 2, "samples": 5, "h": 1e-3}}})"),
      make("velocity-norm", "particle velocities of psi_1 and psi_2 under a 1e-6 rescaling of one sector",
           R"({"kind": "extract", "seed": 5,
               "params": {
                 "lattice": {"modes": 3, "n_max": 3, "coupling": 0.0},
                 "state": {"terms": [{"occ": [0, 0, 0], "re": 1.0}, {"occ": [0, 1, 0], "re": 0.5},
                                     {"occ": [0, 0, 1], "im": 0.8}, {"occ": [1, 0, 0], "re": 0.3, "im": 0.1},
                                     {"occ": [1, 1, 0], "re": 0.4}, {"occ": [0, 1, 1], "im": 0.3}]},
                 "norm_scale": {"sectors": [1, 2], "factor": 1e-6, "samples": 10}}})"),
      make("born", "momentum pointer on |c|^2 = (0.3, 0.7): 4-sigma test at N = 10^4 and N^-1/2 convergence",
           R"({"kind": "born", "seed": 42,
               "params": {
                 "system": {"box": 6.283185307179586, "mass": 1.0,
                            "waves": [{"n": 1, "re": 0.5477225575051661}, {"n": -1, "re": 0.8366600265340756}]},
                 "pointer": {"separation": 10.0, "duration": 1.0, "width": 1.0},
                 "samples": 10000, "tol": 1e-8,
                 "convergence": {"sizes": [100, 1000, 10000], "repetitions": 20}}})"),
      make("measure", "three-outcome momentum measurement with momentum histograms, empty channels and a repeat",
           R"({"kind": "measure", "seed": 9,
               "params": {
                 "system": {"waves": [{"n": -1, "re": 0.5}, {"n": 0, "im": 0.7}, {"n": 2, "re": 0.5099019513592785}]},
                 "pointer": {"separation": 10.0, "mass": 50.0},
                 "samples": 3000, "grid_x": 128, "grid_y": 128,
                 "momentum": {"points": 4096},
                 "empty_channel": {"samples": 5, "t_post": 2.0},
                 "remeasure": true}})"),
      make("collapse", "number pointer on (vacuum + two quanta)/sqrt 2: every run ends in one sector",
           R"({"kind": "collapse", "seed": 2024,
               "params": {
                 "lattice": {"modes": 1, "n_max": 4, "coupling": 0.0},
                 "state": {"terms": [{"occ": [0], "re": 1.0}, {"occ": [2], "re": 1.0}]},
                 "pointer": {"coupling": 1.0, "duration": 10.0, "width": 1.0},
                 "runs": 1000, "trace_points": 10}})"),
  };
  return p;
}

}  // namespace bohm::scenario
