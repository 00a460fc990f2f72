#pragma once

// n-particle wave functions read off a lattice wave functional:
//   psi_n(x_1..x_n, t) = e^{-i phi_0(t)} <Psi_0| phi(x_1) ... phi(x_n) |Psi(t)>
// with phi(x) = sum_j f_j(x) q_j. Matrix elements are taken with ladder
// operators; a Gauss-Hermite quadrature of the same integral is kept as an
// independent route.

#include <array>
#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

#include "bohm/qft.hpp"

namespace bohm::extract {

using cplx = std::complex<double>;
using Position = std::array<double, 3>;
using Positions = std::vector<Position>;

/// e^{-i phi_0(t)} = conj(A) / |A| with A = <Psi_0| U(t) |Psi_0>. Throws
/// bohm::Error(numerical) when A vanishes.
cplx vacuum_phase_factor(const qft::LatticeModel& model, double t);

/// phi(x) |v> on the given lattice (raising beyond the cutoff is dropped).
Eigen::VectorXcd apply_field(const qft::Lattice& lat, const Position& x, const Eigen::VectorXcd& v);

/// Equal-time psi_n by ladder operators in a space large enough to be exact.
cplx equal_time_wf(const qft::LatticeModel& model, const qft::FunctionalState& state,
                   const Positions& x, double t);

/// The same integral by a Gauss-Hermite product rule with `points` nodes per
/// mode (0 picks n_max + n + 1, the smallest exact order).
cplx quadrature_wf(const qft::LatticeModel& model, const qft::FunctionalState& state,
                   const Positions& x, double t, int points = 0);

/// psi_n at times t_1..t_n: Heisenberg fields U^dag(t_j) phi(x_j) U(t_j),
/// symmetrized over argument orderings. Requires n <= n_max.
cplx heisenberg_wf(const qft::LatticeModel& model, const qft::FunctionalState& state,
                   const Positions& x, std::span<const double> t);

/// equal_time_wf when all times coincide, heisenberg_wf otherwise.
cplx n_particle_wf(const qft::LatticeModel& model, const qft::FunctionalState& state,
                   const Positions& x, std::span<const double> t);

/// Callable view of psi_n for a fixed state.
class NParticleWF {
 public:
  NParticleWF(const qft::LatticeModel& model, qft::FunctionalState state, int n);

  int n() const { return n_; }
  bool symmetrized() const { return true; }
  cplx operator()(const Positions& x, std::span<const double> t) const;
  cplx operator()(const Positions& x, double t) const;

 private:
  const qft::LatticeModel* model_;
  qft::FunctionalState state_;
  int n_;
};

/// max |int Psi_0 phi(x_1)..phi(x_{n'}) Psi_I| over basis states I with n
/// quanta and the given position tuples, by quadrature of the given order
/// (which must be at least n_max + n' + 1).
double orthogonality_check(const qft::Lattice& lat, int n_prime, int n,
                           const std::vector<Positions>& samples, int points);

/// Analytic spatial gradient of psi_n with respect to each argument, equal time.
std::vector<std::array<cplx, 3>> wf_gradient(const qft::LatticeModel& model, const qft::FunctionalState& state,
                                             const Positions& x, double t);

/// Velocity of particle j: -Im(psi* grad_j psi) / Im(psi* d_{t_j} psi), the time
/// derivative by central differences of step 1e-4 / omega_max. Throws
/// bohm::Error(numerical) where the denominator vanishes.
Position particle_velocity(const qft::LatticeModel& model, const qft::FunctionalState& state, int j,
                           const Positions& x, double t);

/// max_j |(d_{t_j}^2 - lap_j + m^2) psi_n| / (m^2 |psi_n|) by central differences.
double kg_residual(const qft::LatticeModel& model, const qft::FunctionalState& state, const Positions& x,
                   std::span<const double> t, double h);

/// |sum_j (-lap_j / 2m) chi - i d_t chi| / (m |chi|) for chi = e^{i n m t} psi_n
/// at equal times, by central differences.
double nonrel_residual(const qft::LatticeModel& model, const qft::FunctionalState& state,
                       const Positions& x, double t, double h);

struct ParticleSet {
  double mass = 1.0;
  /// positions[n] holds the n positions of the n-particle configuration
  std::vector<Positions> positions;
  std::vector<double> effectivity;
};

struct MassPoint {
  Position x{};
  double weight = 0.0;
};

struct MassDensityField {
  std::vector<MassPoint> points;
  double total = 0.0;
};

/// Each particle of the n-configuration carries mass m e_n; e_n = 0 adds nothing.
MassDensityField mass_density(const ParticleSet& particles);

struct ParticlePath {
  std::vector<double> t;
  std::vector<Positions> x;
  bool completed = true;
  std::string message;
};

/// All n particles advanced together by their equal-time velocities.
ParticlePath integrate_particles(const qft::LatticeModel& model, const qft::FunctionalState& state,
                                 const Positions& x0, double t_span, double tol = 1e-9);

/// Delimited export, one row per particle and time: t, x..., n, j, e_n.
void write_particle_path(std::ostream& os, const ParticlePath& path, int n, double e_n, int dim);

}  // namespace bohm::extract
