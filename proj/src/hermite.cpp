#include "bohm/hermite.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "bohm/error.hpp"

namespace bohm::hermite {

namespace {

void recurrence(double x, double h0, std::span<double> out) {
  if (out.empty()) return;
  out[0] = h0;
  if (out.size() > 1) out[1] = std::sqrt(2.0) * x * h0;
  for (size_t n = 1; n + 1 < out.size(); ++n) {
    const double dn = static_cast<double>(n);
    out[n + 1] = std::sqrt(2.0 / (dn + 1.0)) * x * out[n] - std::sqrt(dn / (dn + 1.0)) * out[n - 1];
  }
}

}  // namespace

void functions(double x, std::span<double> out) {
  recurrence(x, std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x), out);
}

void polynomial_parts(double x, std::span<double> out) {
  recurrence(x, std::pow(std::numbers::pi, -0.25), out);
}

void functions_with_derivatives(double x, std::span<double> h, std::span<double> dh,
                                std::span<double> d2h) {
  const size_t n = h.size();
  // one extra order for h_n' = sqrt(n/2) h_{n-1} - sqrt((n+1)/2) h_{n+1}
  std::vector<double> ext(n + 1);
  functions(x, ext);
  for (size_t i = 0; i < n; ++i) {
    const double di = static_cast<double>(i);
    h[i] = ext[i];
    dh[i] = (i > 0 ? std::sqrt(di / 2.0) * ext[i - 1] : 0.0) - std::sqrt((di + 1.0) / 2.0) * ext[i + 1];
    d2h[i] = (x * x - 2.0 * di - 1.0) * ext[i];
  }
}

double function(int n, double x) {
  std::vector<double> v(static_cast<size_t>(n) + 1);
  functions(x, v);
  return v.back();
}

Rule gauss_hermite(int points) {
  require(points >= 1, "Gauss-Hermite rule needs at least one point");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
  for (int i = 1; i < points; ++i) {
    jacobi(i, i - 1) = std::sqrt(i / 2.0);
    jacobi(i - 1, i) = jacobi(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  Rule r;
  std::vector<double> p(static_cast<size_t>(points) + 1);
  for (int i = 0; i < points; ++i) {
    // Newton polish on the polynomial part of h_points, then Christoffel weights.
    double x = es.eigenvalues()(i);
    for (int it = 0; it < 3; ++it) {
      polynomial_parts(x, p);
      const double f = p[static_cast<size_t>(points)];
      const double df = std::sqrt(2.0 * points) * p[static_cast<size_t>(points) - 1];
      if (df == 0.0) break;
      x -= f / df;
    }
    polynomial_parts(x, p);
    double s = 0.0;
    for (int k = 0; k < points; ++k) s += p[static_cast<size_t>(k)] * p[static_cast<size_t>(k)];
    r.nodes.push_back(x);
    r.weights.push_back(1.0 / s);
  }
  return r;
}

}  // namespace bohm::hermite
