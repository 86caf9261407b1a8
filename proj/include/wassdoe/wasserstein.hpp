#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <vector>

#include "wassdoe/measure.hpp"

namespace wassdoe {

/// Orders (q, p) of W_{q,p}: cost ||.||_p^q on the ground space.
struct WassersteinOrder {
  double q = 2.0;
  double p = 2.0;

  WassersteinOrder() = default;
  /// Throws ConfigError unless q >= 1 and p >= 1.
  WassersteinOrder(double q_order, double p_order);

  bool is_l1() const { return q == 1.0 && p == 1.0; }
  bool is_l2() const { return q == 2.0 && p == 2.0; }
  bool operator==(const WassersteinOrder&) const = default;
};

/// A design-space element delta_x x mu with x in [0, 1]^d.
struct MixedPoint {
  std::vector<double> x;
  DiscretizedMeasure mu;

  /// Throws ValidationError for coordinates outside [0, 1].
  MixedPoint(std::vector<double> coords, DiscretizedMeasure measure);
  std::size_t dim() const { return x.size(); }
};

/// W_{p,p} between two measures on the same support, from their quantile
/// functions. p = 1 and p = 2 are integrated in closed form over merged
/// breakpoints; other p use adaptive Gauss-Kronrod per piece.
double w_pp(const DiscretizedMeasure& mu, const DiscretizedMeasure& nu, double p);

/// One-dimensional W_{q,p}: the ground norm is |.| for every p, so this is
/// W_{q,q}.
inline double measure_distance(const DiscretizedMeasure& mu, const DiscretizedMeasure& nu,
                               const WassersteinOrder& order) {
  return w_pp(mu, nu, order.q);
}

/// l_p distance between two points; equals W_{q,p} of the point masses.
double dirac_distance(std::span<const double> x, std::span<const double> y, double p);

/// W_{q,p}(delta_x x mu, delta_y x nu). Uses the closed forms
/// ||x-y||_1 + W_11 and sqrt(||x-y||_2^2 + W_22^2) for (1,1) and (2,2), and
/// product_distance_quadrature otherwise.
double product_distance(const MixedPoint& a, const MixedPoint& b, const WassersteinOrder& order);

/// Direct evaluation of
///   { int_0^1 (||x-y||_p^p + |F^{-1}(t) - G^{-1}(t)|^p)^{q/p} dt }^{1/q}
/// with 32-point Gauss-Legendre on every piece between merged quantile
/// breakpoints and sign changes.
double product_distance_quadrature(const MixedPoint& a, const MixedPoint& b, const WassersteinOrder& order);

/// Combines a Euclidean l_p distance and a measure distance into the product
/// distance for the closed-form orders (1,1) and (2,2).
double combine_closed_form(double euclidean, double measure, const WassersteinOrder& order);

/// Symmetric matrix of pairwise distances, stored row-major n x n.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

DistanceMatrix pairwise_measure_distances(std::span<const DiscretizedMeasure> measures,
                                          const WassersteinOrder& order);

/// Content-addressed store of pairwise distance matrices. Lookups take a
/// shared lock, inserts an exclusive one.
class DistanceCache {
 public:
  static DistanceCache& global();

  std::shared_ptr<const DistanceMatrix> measures(std::span<const DiscretizedMeasure> measures,
                                                 const WassersteinOrder& order);
  std::size_t size() const;
  void clear();

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::uint64_t, std::shared_ptr<const DistanceMatrix>> entries_;
};

/// FNV-1a hash over the exact bit patterns of the inputs.
std::uint64_t content_hash(std::span<const DiscretizedMeasure> measures, const WassersteinOrder& order);

}  // namespace wassdoe
