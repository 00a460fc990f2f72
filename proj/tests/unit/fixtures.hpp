#pragma once

#include <cmath>
#include <vector>

#include "bohm/relkin.hpp"

namespace fixtures {

/// d = 1, m = 1: e^{-i(sqrt2 t - x)} + a e^{-it}. For a = 1.2 the density j0
/// dips below zero in a narrow band once per spatial period.
inline bohm::relkin::ModeSum two_mode(double a = 1.2) {
  std::vector<bohm::relkin::Mode> w(2);
  w[0].k = {1.0, 0.0, 0.0};
  w[0].amplitude = 1.0;
  w[1].k = {0.0, 0.0, 0.0};
  w[1].amplitude = a;
  return bohm::relkin::ModeSum::from_plane_waves(1.0, 1, w);
}

/// Closed-form j0(x, t) of two_mode(a).
inline double two_mode_j0(double a, double t, double x) {
  const double w1 = std::sqrt(2.0), w2 = 1.0;
  return 2.0 * w1 + 2.0 * a * a * w2 + 2.0 * a * (w1 + w2) * std::cos(x - (w1 - w2) * t);
}

inline bohm::relkin::ModeSum plane_wave(double mass, double k, std::complex<double> b = 1.0) {
  std::vector<bohm::relkin::Mode> w(1);
  w[0].k = {k, 0.0, 0.0};
  w[0].amplitude = b;
  return bohm::relkin::ModeSum::from_plane_waves(mass, 1, w);
}

}  // namespace fixtures
