#pragma once

#include <span>
#include <vector>

namespace bohm::hermite {

/// Normalized Hermite functions h_n(x) = (sqrt(pi) 2^n n!)^{-1/2} e^{-x^2/2} H_n(x)
/// for n = 0..out.size()-1, by the stable three-term recurrence.
void functions(double x, std::span<double> out);

/// Values, first and second derivatives of h_0..h_{n-1}.
void functions_with_derivatives(double x, std::span<double> h, std::span<double> dh,
                                std::span<double> d2h);

/// h_n(x) e^{x^2/2}: polynomial part, for use with Gauss-Hermite weights.
void polynomial_parts(double x, std::span<double> out);

double function(int n, double x);

/// Gauss-Hermite rule for the weight e^{-x^2} (Golub-Welsch).
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

Rule gauss_hermite(int points);

}  // namespace bohm::hermite
