#pragma once

#include <cstddef>
#include <vector>

namespace wassdoe {

/// Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree 2n-1.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  /// Integral of f over [a, b].
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * f(mid + half * nodes[k]);
    return half * acc;
  }
};

/// Cached rule with n points (computed once by Newton iteration on P_n).
const GaussLegendre& gauss_legendre(std::size_t n);

}  // namespace wassdoe
