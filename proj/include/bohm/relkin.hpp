#pragma once

// Positive-frequency Klein-Gordon wave functions built from finite sums of
// on-shell plane waves. Units hbar = c = 1, metric diag(+1, -1, ..., -1).

#include <array>
#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace bohm::relkin {

using cplx = std::complex<double>;

constexpr int kMaxDim = 3;

/// Spacetime vector in 1 + dim dimensions. Index position (upper or lower) is
/// a property of the quantity stored; functions below say which they return.
struct FourVector {
  int dim = 1;
  std::array<double, 4> c{};

  FourVector() = default;
  explicit FourVector(int d) : dim(d) {}
  FourVector(double t, double x) : dim(1), c{t, x, 0.0, 0.0} {}

  double& operator[](int mu) { return c[static_cast<size_t>(mu)]; }
  double operator[](int mu) const { return c[static_cast<size_t>(mu)]; }
  int size() const { return dim + 1; }
  double time() const { return c[0]; }

  /// Flips the sign of the spatial components (raise <-> lower).
  FourVector flipped() const;
};

FourVector operator+(const FourVector& a, const FourVector& b);
FourVector operator-(const FourVector& a, const FourVector& b);
FourVector operator*(double s, const FourVector& a);

/// a^mu b_mu for two vectors stored with the same index position.
double minkowski(const FourVector& a, const FourVector& b);

/// Largest absolute component difference.
double max_abs_diff(const FourVector& a, const FourVector& b);

struct Mode {
  std::array<double, kMaxDim> k{};  // spatial wave vector (contravariant)
  cplx amplitude{};
};

/// psi(x) = sum_k a_k exp(-i k.x) / sqrt((2 pi)^d 2 k0), k0 = +sqrt(|k|^2 + m^2).
///
/// The periodicity cell (edge length L in every direction) is either given or
/// inferred as 2 pi / gcd of the wave-vector components. Densities are
/// integrated over that cell, so the mode-form particle number is
/// (L / 2 pi)^d sum |a_k|^2.
class ModeSum {
 public:
  ModeSum(double mass, int dim, std::vector<Mode> modes,
          std::optional<double> cell_length = std::nullopt);

  /// Builds a ModeSum from coefficients b_k multiplying exp(-i k.x) directly.
  static ModeSum from_plane_waves(double mass, int dim, std::vector<Mode> waves,
                                  std::optional<double> cell_length = std::nullopt);

  double mass() const { return mass_; }
  int dim() const { return dim_; }
  double cell_length() const { return cell_; }
  std::span<const Mode> modes() const { return modes_; }
  size_t size() const { return modes_.size(); }

  double frequency(size_t i) const { return k0_[i]; }
  double mode_norm(size_t i) const { return norm_[i]; }
  /// Coefficient of exp(-i k.x) for mode i.
  cplx plane_wave_coefficient(size_t i) const { return modes_[i].amplitude * norm_[i]; }

  /// |psi|^2 below this value counts as a node.
  double node_floor() const { return node_floor_; }

  /// Largest |k_i - k'_i| over mode pairs and components.
  double max_beat() const;

  ModeSum scaled(cplx factor) const;
  /// Rescaled so that particle_number() == 1.
  ModeSum normalized() const;

 private:
  double mass_;
  int dim_;
  double cell_;
  std::vector<Mode> modes_;
  std::vector<double> k0_;
  std::vector<double> norm_;
  double node_floor_ = 0.0;
};

/// psi and its exact first and second derivatives at one spacetime point.
/// d1[mu] = d_mu psi and d2[mu][nu] = d_mu d_nu psi (covariant indices).
struct WaveSample {
  int dim = 1;
  cplx psi{};
  std::array<cplx, 4> d1{};
  std::array<std::array<cplx, 4>, 4> d2{};
  double node_floor = 0.0;
  bool has_second = false;

  double density() const { return std::norm(psi); }
  bool at_node() const { return std::norm(psi) < node_floor; }
};

enum class Derivatives { first, second };

/// x holds contravariant coordinates (t, x^1..x^d).
WaveSample evaluate(const ModeSum& wave, const FourVector& x,
                    Derivatives order = Derivatives::second);

/// (d0^2 - lap + m^2) psi, from the closed-form second derivatives.
cplx klein_gordon_residual(const WaveSample& s, double mass);

/// Covariant current j_mu = i (psi* d_mu psi - psi d_mu psi*).
FourVector current(const WaveSample& s);

/// d^mu j_mu from closed-form derivatives (zero for exact solutions).
double current_divergence(const WaveSample& s);

struct PolarForm {
  double R = 0.0;
  double S = 0.0;   // unwrapped phase
  FourVector dS;    // covariant d_mu S
};

/// psi = R e^{iS}. With a prior, S is placed on the branch nearest prior->S;
/// a jump larger than pi/2 from the prior is rejected as under-resolved.
/// Throws NodeError at nodes.
PolarForm polar(const WaveSample& s, const std::optional<PolarForm>& prior = std::nullopt);

/// Q = (1/2m) (d^mu d_mu R) / R. Throws NodeError at nodes.
double quantum_potential(const ModeSum& wave, const FourVector& x);
double quantum_potential(const WaveSample& s, double mass);

/// -(dS)^2 / 2m + m/2 + Q.
double hamilton_jacobi_residual(const WaveSample& s, double mass);

/// Uniform grid of points^dim nodes over [origin, origin + length)^dim.
struct SpatialGrid {
  double origin = 0.0;
  double length = 0.0;
  int points = 0;
};

/// One periodicity cell sampled with the given number of points per axis.
SpatialGrid cell_grid(const ModeSum& wave, int points);

/// Signed particle number from the mode amplitudes.
double particle_number(const ModeSum& wave);

/// Trapezoid quadrature of j0 over the grid at time t. Rejects grids that do
/// not cover whole periodicity cells or that undersample the highest beat.
double particle_number_grid(const ModeSum& wave, double t, const SpatialGrid& grid);

/// Trapezoid quadrature of |j0|; same grid contract.
double physical_particle_number(const ModeSum& wave, double t, const SpatialGrid& grid);

/// Boost along x^1 (dim == 1) by the given rapidity; psi'(Lambda x) = psi(x).
ModeSum boost(const ModeSum& wave, double rapidity);
FourVector boost(const FourVector& x, double rapidity);

}  // namespace bohm::relkin
