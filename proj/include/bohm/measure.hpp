#pragma once

// Ideal (von Neumann) measurements with a pointer coordinate y, Bohmian
// ensembles over system + pointer, and the number-pointer collapse of the
// field effectivities.
//
// The pointer packet is chi(y) = (pi s^2)^{-1/4} exp(-y^2 / 2 s^2), s = width,
// so two packets displaced by D overlap as exp(-(D / 2s)^2).

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bohm/qft.hpp"
#include "bohm/relkin.hpp"

namespace bohm::measure {

using cplx = std::complex<double>;

/// Independent generator for (seed, stream, index): splitmix64 mixing feeds
/// a mt19937_64, so draws do not depend on the order samples are processed.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

enum Stream : std::uint64_t { kSampling = 1, kRepetition = 2, kCollapse = 3 };

struct PointerSpec {
  double mass = std::numeric_limits<double>::infinity();
  double coupling = 1.0;     // g
  double duration = 1.0;     // T
  double width = 1.0;        // s
  /// When positive, g is chosen so that g T (smallest eigenvalue gap) equals it.
  double separation = 0.0;
  double separation_factor = 5.0;  // ideal needs g T gap >= factor * width
  double overlap_threshold = 1e-6;
  double window = 5.0;  // membership: |y - center| <= window * width(t)
};

/// Free packet width at time t (grows only for a finite pointer mass).
double pointer_width(const PointerSpec& p, double t);

/// <chi(. - D)|chi> for the initial packet.
double pointer_overlap(const PointerSpec& p, double displacement);

/// One-dimensional nonrelativistic system on a periodic box: plane waves
/// exp(i k_j x) / sqrt(L), k_j = 2 pi n_j / L, energies k^2 / 2m.
struct SystemState {
  double box = 6.283185307179586;
  double mass = 1.0;
  std::vector<int> n;
  std::vector<cplx> c;

  double wave_number(size_t j) const;
  /// Rescaled to sum |c|^2 = 1; rejects repeated n and empty states.
  SystemState normalized() const;
};

/// A one-dimensional ModeSum read as a system state at time t (plane-wave
/// coefficients with their phases at t; the cell becomes the box).
SystemState system_from_mode_sum(const relkin::ModeSum& wave, double t);

/// A = slope * p + offset. Nondegenerate on plane waves iff slope != 0.
struct Observable {
  double slope = 1.0;
  double offset = 0.0;
  double eigenvalue(double k) const { return slope * k + offset; }
};

struct Channel {
  double eigenvalue = 0.0;
  double wave_number = 0.0;
  cplx coefficient{};  // after the coupling, including the system phase
  double center = 0.0;  // g T a
};

/// System + pointer after (and during) the impulsive coupling H = g A p_y.
class JointState {
 public:
  JointState(SystemState system, Observable obs, PointerSpec pointer);

  const SystemState& system() const { return system_; }
  const Observable& observable() const { return obs_; }
  const PointerSpec& pointer() const { return pointer_; }
  const std::vector<Channel>& channels() const { return channels_; }
  double coupling() const { return g_; }
  /// Pointer overlap matrix of the channel packets at the end of the coupling.
  const std::vector<std::vector<double>>& overlap() const { return overlap_; }
  double max_overlap() const { return max_overlap_; }
  bool ideal() const { return ideal_; }
  const std::string& diagnostic() const { return diagnostic_; }

  struct Sample {
    cplx psi{};
    cplx dx{};
    cplx dy{};
  };
  Sample evaluate(double x, double y, double t) const;

  /// Joint guidance velocity (x', y') at (x, y, t). Throws NodeError.
  std::array<double, 2> velocity(double x, double y, double t) const;

  /// Copy with channel `a` removed (its coefficient set to zero).
  JointState without_channel(size_t a) const;

  /// Nearest channel within the membership window at time t, or -1.
  int channel_of(double y, double t) const;

  double end_time() const { return pointer_.duration; }

 private:
  SystemState system_;
  Observable obs_;
  PointerSpec pointer_;
  double g_ = 0.0;
  std::vector<Channel> channels_;
  std::vector<cplx> initial_;  // normalized input coefficients
  std::vector<std::vector<double>> overlap_;
  double max_overlap_ = 0.0;
  bool ideal_ = false;
  std::string diagnostic_;
};

JointState entangle(const SystemState& system, const Observable& obs, const PointerSpec& pointer);

/// Sequential inverse-CDF sampler over a product grid of cells: the first
/// coordinate from its marginal, each next one conditional on those chosen,
/// uniform within the chosen cell.
class GridSampler {
 public:
  /// density holds prod(points) nonnegative cell masses, first axis slowest.
  GridSampler(std::vector<double> lo, std::vector<double> hi, std::vector<int> points,
              std::vector<double> density);

  std::vector<double> draw(std::mt19937_64& rng) const;
  int dims() const { return static_cast<int>(points_.size()); }

 private:
  std::vector<double> lo_, hi_;
  std::vector<int> points_;
  std::vector<std::vector<double>> partial_;  // partial_[l]: sums over axes > l
};

struct EnsembleSettings {
  size_t samples = 10000;
  std::uint64_t seed = 42;
  std::uint64_t stream = 0;  // repetition index within the seed
  int grid_x = 256;
  int grid_y = 256;
  double extent = 8.0;   // y grid covers +-extent * width
  double t_post = 0.0;   // free motion after the coupling
  double tol = 1e-9;
  int threads = 1;
  bool keep_samples = true;
};

struct SampleOutcome {
  size_t index = 0;
  std::uint64_t stream = 0;  // substream seed of the sample
  double x0 = 0.0, y0 = 0.0;
  double x = 0.0, y = 0.0;
  int channel = -1;  // -1 gap, -2 integration failure
  double guidance_deviation = 0.0;  // |x' joint - x' of its channel alone| at the end
};

struct EnsembleReport {
  size_t samples = 0;
  std::vector<long> hits;
  std::vector<double> frequency;
  std::vector<double> probability;  // |c_a|^2
  std::vector<double> z;            // (f - p) / sqrt(p (1 - p) / N)
  long gap_hits = 0;
  long failures = 0;
  double max_guidance_deviation = 0.0;
  double tv_distance = 0.0;
  bool ideal = false;
  bool passed = false;  // ideal, gap hits <= 0.1 %, no failures, all |z| < 4
  std::vector<SampleOutcome> outcomes;
};

EnsembleReport run_ensemble(const JointState& joint, const EnsembleSettings& settings);

/// Trajectory of one sample from (x0, y0) at t = 0 to the end time.
std::array<double, 2> transport(const JointState& joint, double x0, double y0, double t_end, double tol);

/// Continues a sample that sits in a channel at the end of the coupling with
/// the full state and with every other channel removed; returns the largest
/// coordinate difference over `t_post`.
double empty_channel_deviation(const JointState& joint, double x, double y, double t_post, double tol);

/// Outcome statistics of re-measuring each channel's conditional state with a
/// fresh pointer: fraction of repeat samples landing in the first outcome.
struct RepeatReport {
  std::vector<double> agreement;  // per first-measurement channel
  bool idempotent = false;
};
RepeatReport remeasure(const JointState& joint, const EnsembleSettings& settings);

struct ConvergencePoint {
  size_t samples = 0;
  double mean_tv = 0.0;
};
struct BornConvergence {
  std::vector<ConvergencePoint> points;
  double slope = 0.0;  // least squares of log tv against log N
};
BornConvergence born_convergence(const JointState& joint, std::span<const size_t> sizes, int repetitions,
                                 EnsembleSettings settings);

struct MomentumDistribution {
  std::vector<double> edges;
  std::vector<double> bohmian;   // |psi|^2-weighted histogram of dS/dx
  std::vector<double> spectral;  // |psi~(p)|^2 in the same bins
  double tv_distance = 0.0;
};

/// Bins given by increasing edges; dS/dx sampled on `points` cells of the box
/// (cells at nodes are dropped). Both histograms are normalized.
MomentumDistribution momentum_distribution(const SystemState& system, double t, std::span<const double> edges,
                                           int points = 4096);
MomentumDistribution momentum_distribution(const relkin::ModeSum& wave, double t, std::span<const double> edges,
                                           int points = 4096);

void write_ensemble(std::ostream& os, const EnsembleReport& report);
void write_ensemble_summary(std::ostream& os, const EnsembleReport& report);

// --- field theory: number pointer ---------------------------------------------

struct CollapseSpec {
  PointerSpec pointer;  // mass is ignored: the pointer does not spread
  size_t runs = 1000;
  std::uint64_t seed = 42;
  double t_end = 0.0;  // 0 means the end of the coupling
  double tol = 1e-8;
  int grid = 64;      // per field mode
  int grid_y = 128;
  double extent = 8.0;
  int threads = 1;
  int trace_points = 0;  // e_n samples kept per run (0: none)
};

/// Field + pointer under H_free + g N p_y for t < T. Requires a
/// number-conserving Hamiltonian (coupling lambda = 0).
class NumberPointer {
 public:
  NumberPointer(const qft::LatticeModel& model, qft::FunctionalState state, PointerSpec pointer);

  const qft::LatticeModel& model() const { return *model_; }
  const std::vector<double>& sector_probability() const { return prob_; }
  const std::vector<int>& occupied() const { return occupied_; }
  bool ideal() const { return ideal_; }
  double max_overlap() const { return max_overlap_; }
  const std::string& diagnostic() const { return diagnostic_; }

  /// Per-sector effectivity of the joint configuration (q, y) at time t.
  std::vector<double> effectivity(const qft::FieldConfig& q, double y, double t) const;

  /// (q'_1..q'_M, y') at (q, y, t). Throws NodeError.
  std::vector<double> velocity(std::span<const double> q, double y, double t) const;

  /// |Psi(q, y, t)|^2.
  double density(std::span<const double> q, double y, double t) const;

 private:
  struct SectorSample {
    cplx psi{};
    std::vector<cplx> grad;
  };
  std::vector<SectorSample> sectors(std::span<const double> q, double t) const;
  double center(int n, double t) const;

  const qft::LatticeModel* model_;
  qft::FunctionalState state_;
  PointerSpec pointer_;
  std::vector<Eigen::VectorXcd> projected_;  // c restricted to each sector
  Eigen::VectorXd energy_;                   // diagonal of the free Hamiltonian
  std::vector<double> prob_;
  std::vector<int> occupied_;
  bool ideal_ = false;
  double max_overlap_ = 0.0;
  std::string diagnostic_;
};

struct CollapseRun {
  size_t index = 0;
  std::vector<double> q0, q;
  double y0 = 0.0, y = 0.0;
  std::vector<double> e_initial, e_final;
  int sector = -1;  // the sector with e > 1 - 1e-6, or -1
  bool completed = true;
  std::vector<std::pair<double, std::vector<double>>> trace;
};

struct CollapseReport {
  std::vector<CollapseRun> runs;
  std::vector<double> probability;
  std::vector<long> hits;
  std::vector<double> z;
  long failures = 0;
  long uncollapsed = 0;
  bool ideal = false;
  bool passed = false;  // ideal, every run collapsed, all |z| < 4
};

CollapseReport effectivity_collapse(const qft::LatticeModel& model, const qft::FunctionalState& state,
                                    const CollapseSpec& spec);

void write_collapse(std::ostream& os, const CollapseReport& report);

}  // namespace bohm::measure
