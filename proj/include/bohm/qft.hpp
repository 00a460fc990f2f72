#pragma once

// Real scalar field on a periodic box, truncated to M real lattice modes and
// at most n_max quanta per mode. States are coefficient vectors over
// products of Hermite functions (the free Fock basis).

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "bohm/ode.hpp"

namespace bohm::qft {

using cplx = std::complex<double>;
using OccIndex = std::vector<int>;

/// One real mode function: 1/sqrt(V) for n = 0, otherwise sqrt(2/V) cos(k.x)
/// or sqrt(2/V) sin(k.x) with k = 2 pi n / L.
struct LatticeMode {
  std::array<int, 3> n{};
  bool sine = false;
};

struct LatticeSpec {
  int dim = 1;
  double box = 6.283185307179586;
  int modes = 1;
  double mass = 1.0;
  double coupling = 0.0;  // lambda in the potential lambda phi^4 / 4
  int n_max = 4;
  /// Explicit mode list; when empty the modes are n = 0, 1c, 1s, 2c, 2s, ...
  /// along the first axis.
  std::vector<LatticeMode> mode_list;
  size_t max_basis = 4096;
};

/// Resolved mode set, basis indexing and mode functions (no Hamiltonian).
class Lattice {
 public:
  explicit Lattice(LatticeSpec spec);

  const LatticeSpec& spec() const { return spec_; }
  int modes() const { return static_cast<int>(modes_.size()); }
  int n_max() const { return spec_.n_max; }
  size_t basis_size() const { return size_; }
  const LatticeMode& mode(int j) const { return modes_[static_cast<size_t>(j)]; }
  double omega(int j) const { return omega_[static_cast<size_t>(j)]; }
  double omega_max() const;
  double vacuum_energy() const;
  int max_particles() const { return modes() * spec_.n_max; }

  OccIndex occupation(size_t index) const;
  size_t index(const OccIndex& occ) const;
  int occupation(size_t index, int mode) const;
  int total_number(size_t index) const { return total_[index]; }

  /// f_j(x) and its gradient; x has dim components.
  double mode_function(int j, std::span<const double> x) const;
  std::array<double, 3> mode_gradient(int j, std::span<const double> x) const;

  /// Integral over the box of f_a f_b f_c f_d.
  double quartic_overlap(int a, int b, int c, int d) const;

  /// Same mode set with a different per-mode cutoff.
  Lattice with_cutoff(int n_max) const;

 private:
  LatticeSpec spec_;
  std::vector<LatticeMode> modes_;
  std::vector<double> omega_;
  std::vector<std::array<double, 3>> k_;
  std::vector<size_t> stride_;
  std::vector<int> total_;
  std::vector<double> overlap_;
  size_t size_ = 0;
};

/// Field amplitudes in mode coordinates.
struct FieldConfig {
  std::vector<double> q;
};

/// Field values at the M points x_i = i L / M (dim == 1).
std::vector<double> to_grid(const Lattice& lat, const FieldConfig& cfg);
FieldConfig from_grid(const Lattice& lat, std::span<const double> values);

struct FunctionalState {
  double t = 0.0;
  Eigen::VectorXcd c;
};

/// prod_j h_{n_j}(sqrt(w_j) q_j) w_j^{1/4}: orthonormal under prod dq_j.
double basis_value(const Lattice& lat, const OccIndex& idx, const FieldConfig& cfg);

/// Psi[q] = sum_I c_I basis_I(q), together with d/dq_j and d^2/dq_j^2.
struct FunctionalSample {
  cplx psi{};
  std::vector<cplx> grad;
  std::vector<cplx> hess_diag;
  std::vector<cplx> sector;  // Psi~_n[q] for n = 0..max_particles
  double incoherent = 0.0;   // sum_I |c_I basis_I(q)|^2
  bool at_node() const { return std::norm(psi) <= 1e-12 * incoherent; }
};

FunctionalSample sample_functional(const Lattice& lat, const Eigen::VectorXcd& c,
                                   const FieldConfig& cfg, bool derivatives = true);

/// Hamiltonian, its eigendecomposition and exact propagation.
class LatticeModel {
 public:
  explicit LatticeModel(LatticeSpec spec);

  const Lattice& lattice() const { return lat_; }
  const Eigen::MatrixXd& hamiltonian() const { return h_; }
  const Eigen::VectorXd& energies() const { return energies_; }
  const Eigen::MatrixXd& eigenvectors() const { return vectors_; }

  /// exp(-i H dt) c.
  Eigen::VectorXcd propagate(const Eigen::VectorXcd& c, double dt) const;

  /// Quartic interaction force J_j(q) = -lambda sum V_jbcd q_b q_c q_d.
  std::vector<double> interaction_force(const FieldConfig& cfg) const;

 private:
  Lattice lat_;
  Eigen::MatrixXd h_;
  Eigen::VectorXd energies_;
  Eigen::MatrixXd vectors_;
};

FunctionalState evolve(const LatticeModel& model, const FunctionalState& state, double dt);

/// Normalized coefficients for the given (occupation, amplitude) pairs.
FunctionalState make_state(const Lattice& lat, const std::vector<std::pair<OccIndex, cplx>>& terms,
                           double t = 0.0);

/// sum over indices with total number n of |c|^2, for n = 0..max_particles.
std::vector<double> sector_weights(const Lattice& lat, const Eigen::VectorXcd& c);

/// e_n = |Psi~_n|^2 / sum |Psi~_n'|^2. Throws bohm::Error(numerical) where
/// every sector vanishes.
std::vector<double> effectivity(const Lattice& lat, const FunctionalState& state, const FieldConfig& cfg);

/// dq_j/dt = dS/dq_j with S the phase of Psi[q, t]. Throws NodeError.
std::vector<double> field_velocity(const Lattice& lat, const FunctionalState& state, const FieldConfig& cfg);

struct FieldTrajectory {
  std::vector<double> t;
  std::vector<FieldConfig> q;
  std::vector<ode::Step> steps;
  bool completed = true;
  std::string message;

  FieldConfig at(double time) const;
};

/// First-order guided field trajectory; the functional is evolved exactly
/// alongside the configuration.
FieldTrajectory integrate_field(const LatticeModel& model, const FunctionalState& state0,
                                const FieldConfig& q0, double t_span, double tol = 1e-10);

/// Q = -(1 / 2|Psi|) sum_j d^2|Psi| / dq_j^2.
double quantum_potential(const Lattice& lat, const Eigen::VectorXcd& c, const FieldConfig& cfg);

struct SecondOrderResidual {
  double max_residual = 0.0;
  double fd_step = 0.0;
  std::vector<double> per_mode;
};

/// Residual of q'' + w^2 q - J(q) + dQ/dq along the trajectory (interior
/// points), with q'' and dQ/dq by central differences of the given step.
SecondOrderResidual second_order_check(const LatticeModel& model, const FunctionalState& state0,
                                       const FieldTrajectory& traj, double fd_step);

struct VacuumPhase {
  double r0 = 1.0;
  double phi0 = 0.0;
};

/// <Psi_0| U(t) |Psi_0> = r0 e^{i phi0}; phi0 is placed on the branch nearest
/// the prior. Throws bohm::Error(numerical) when r0 vanishes.
VacuumPhase vacuum_phase(const LatticeModel& model, double t,
                         const std::optional<VacuumPhase>& prior = std::nullopt);

/// Branch-tracked phase on an increasing time grid (refined internally).
std::vector<VacuumPhase> vacuum_phase_series(const LatticeModel& model, std::span<const double> times);

/// Largest relative change of the lowest `levels` eigenvalues when n_max is
/// doubled.
double truncation_shift(const LatticeSpec& spec, int levels);

}  // namespace bohm::qft
