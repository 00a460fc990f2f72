#pragma once

// Small random generators for property tests. Seeds are fixed per test so
// failures reproduce.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "bohm/relkin.hpp"

namespace gen {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::complex<double> amplitude(std::mt19937_64& rng) {
  return {uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
}

/// Modes on the integer lattice k = n (cell 2 pi), distinct by construction.
inline bohm::relkin::ModeSum mode_sum(std::mt19937_64& rng, int dim = 1, int max_modes = 4,
                                      int max_n = 3) {
  const double mass = uniform(rng, 0.5, 2.0);
  const int count = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_modes));
  std::vector<bohm::relkin::Mode> modes;
  while (static_cast<int>(modes.size()) < count) {
    bohm::relkin::Mode m;
    for (int d = 0; d < dim; ++d)
      m.k[static_cast<size_t>(d)] = static_cast<double>(static_cast<int>(rng() % (2 * max_n + 1)) - max_n);
    bool dup = false;
    for (const auto& o : modes) dup = dup || o.k == m.k;
    if (dup) continue;
    m.amplitude = amplitude(rng);
    modes.push_back(m);
  }
  return bohm::relkin::ModeSum(mass, dim, modes, 2.0 * 3.141592653589793);
}

inline bohm::relkin::FourVector point(std::mt19937_64& rng, int dim, double extent = 10.0) {
  bohm::relkin::FourVector x(dim);
  for (int mu = 0; mu <= dim; ++mu) x[mu] = uniform(rng, -extent, extent);
  return x;
}

}  // namespace gen
