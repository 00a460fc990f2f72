#pragma once

// Bohmian trajectories of the one-particle Klein-Gordon theory, parametrized
// by the affine parameter tau: dx^mu/dtau = j^mu / (2 m psi* psi).

#include <array>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "bohm/ode.hpp"
#include "bohm/relkin.hpp"

namespace bohm::traject {

using relkin::FourVector;
using relkin::ModeSum;

using SpatialVector = std::array<double, relkin::kMaxDim>;

/// Contravariant 4-velocity u^mu = j^mu / (2 m |psi|^2). Throws NodeError.
FourVector tau_velocity(const ModeSum& wave, const FourVector& x);

enum class VelocityClass { subluminal, luminal, superluminal };

struct CoordinateVelocity {
  SpatialVector v{};
  double speed = 0.0;
  VelocityClass kind = VelocityClass::subluminal;
};

/// dx/dt = j / j0. Throws bohm::Error(numerical) where j0 vanishes (the
/// 3-velocity is infinite there; use the tau parametrization instead).
CoordinateVelocity coordinate_velocity(const ModeSum& wave, double t, const SpatialVector& x);

struct TrajPoint {
  double tau = 0.0;
  FourVector x;
  FourVector u;
  int j0_sign = 0;
};

/// A point where j0 changes sign along the path (dt/dtau turns around).
struct ReversalEvent {
  double tau = 0.0;
  FourVector x;
  double j0 = 0.0;
  int sign_after = 0;  // sign of j0 just after the event, in integration order
};

enum class TrajStatus { completed, hit_node, left_domain, step_underflow };

const char* to_string(TrajStatus s);

/// Points are stored in integration order; tau is strictly monotone in the
/// direction of integration (increasing for positive spans).
struct Trajectory {
  int dim = 1;
  std::vector<TrajPoint> points;
  std::vector<ode::Step> segments;
  std::vector<ReversalEvent> reversals;
  TrajStatus status = TrajStatus::completed;
  std::string message;

  double tau_begin() const { return points.empty() ? 0.0 : points.front().tau; }
  double tau_end() const { return points.empty() ? 0.0 : points.back().tau; }
  /// Position on the dense output; tau must lie inside the integrated range.
  FourVector position(double tau) const;
  double t_min() const;
  double t_max() const;
};

struct IntegrateOptions {
  double tol = 1e-9;
  double event_tol = 1e-10;
  double max_coordinate = std::numeric_limits<double>::infinity();
  double h_max = std::numeric_limits<double>::infinity();
  int event_samples = 8;  // sign probes per step for reversal detection
  long max_steps = 2'000'000;
};

Trajectory integrate(const ModeSum& wave, const FourVector& x0, double tau_span,
                     const IntegrateOptions& opts = {});

struct Crossing {
  double tau = 0.0;
  FourVector x;
  int sign = 0;  // sign of j0 at the crossing
};

struct CrossingRecord {
  double t_slice = 0.0;
  bool out_of_range = false;
  std::vector<Crossing> crossings;

  /// Sum of signs: the conserved particle-number contribution.
  int signed_count() const;
  /// Number of crossings: the physical particle-number contribution.
  int count() const { return static_cast<int>(crossings.size()); }
};

/// All solutions of t(tau) = t_slice along the trajectory, ordered by tau.
CrossingRecord crossings(const Trajectory& traj, double t_slice, double tol = 1e-10);

/// max over interior points of |m d^2x^mu/dtau^2 - d^mu Q| using central
/// differences with the given step (in tau and in spacetime respectively).
double eom_residual(const ModeSum& wave, const Trajectory& traj, double fd_step);

/// max over points of |dS/dtau - u^mu d_mu S| with dS/dtau by central
/// differences of the unwrapped phase along the path.
double phase_identity_residual(const ModeSum& wave, const Trajectory& traj, double fd_step);

/// Largest |u^mu + d^mu S / m| over the stored points.
double guidance_consistency(const ModeSum& wave, const Trajectory& traj);

/// Largest Hamilton-Jacobi residual over the stored points.
double hamilton_jacobi_on_path(const ModeSum& wave, const Trajectory& traj);

struct NonrelComparison {
  double epsilon = 0.0;             // max |k| / m
  double max_deviation = 0.0;       // max_t |x_KG(t) - x_S(t)|
  double displacement = 0.0;        // max_t |x_S(t) - x0|
  double relative_deviation = 0.0;  // max_deviation / displacement
  double min_j0 = 0.0;              // smallest j0 met along the KG path
};

/// Compares the Klein-Gordon guidance dx/dt = j/j0 with free Schroedinger
/// guidance for chi = sqrt(2m) e^{imt} psi from the same start point. Requires
/// every |k| <= 0.1 m.
NonrelComparison nonrel_compare(const ModeSum& wave, const SpatialVector& x0, double t_span,
                                double tol = 1e-12, int samples = 400);

/// Delimited export: tau, t, x..., u0, ux..., j0, R, S, Q (one header line).
void write_trajectory(std::ostream& os, const ModeSum& wave, const Trajectory& traj);
void write_reversals(std::ostream& os, const Trajectory& traj);
void write_crossings(std::ostream& os, const CrossingRecord& rec);

}  // namespace bohm::traject
