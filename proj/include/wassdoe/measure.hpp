#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "wassdoe/rng.hpp"

namespace wassdoe {

/// Affine map from the canonical interval [0, 1] onto the native support
/// [lo, hi]. hi == lo is allowed and turns any measure into a point mass.
struct SupportMap {
  double lo = 0.0;
  double hi = 1.0;

  double scale() const { return hi - lo; }
  double to_native(double u) const { return lo + (hi - lo) * u; }
  bool operator==(const SupportMap&) const = default;
};

/// Tolerance for sum-to-one and cap checks on stored increments.
inline constexpr double kIncrementTolerance = 1e-12;

/// Box-constrained simplex {0 <= x_i <= cap, sum x_i = 1} of dimension dim.
class CappedSimplex {
 public:
  /// Throws ConfigError when dim * cap < 1 (empty set) or cap <= 0.
  CappedSimplex(std::size_t dim, double cap);

  /// The set E_{m-1}(tau) of increment vectors for an m-point grid.
  static CappedSimplex for_grid(std::size_t m, double tau);

  std::size_t dim() const { return dim_; }
  double cap() const { return cap_; }

  bool contains(std::span<const double> v, double tol = kIncrementTolerance) const;

 private:
  std::size_t dim_;
  double cap_;
};

/// Euclidean projection of v onto the capped simplex.
///
/// Bisection on the dual shift lambda of x_i = clamp(v_i - lambda, 0, cap),
/// followed by an exact solve for lambda on the final active set so that the
/// result sums to one up to rounding.
std::vector<double> project_capped_simplex(std::span<const double> v, const CappedSimplex& simplex);

/// Piecewise-affine representation of the generalized inverse
/// F^{-1}(t) = inf{u : F(u) >= t} on the canonical interval.
///
/// Segment k covers levels (breakpoints[k], breakpoints[k+1]] and returns
/// intercepts[k] + slopes[k] * t there. Flat CDF cells produce no segment, so
/// consecutive segments may jump.
struct QuantileSegments {
  std::vector<double> breakpoints;
  std::vector<double> intercepts;
  std::vector<double> slopes;

  std::size_t size() const { return slopes.size(); }
  double operator()(double t) const;
  /// Index of the segment whose level interval (b_k, b_{k+1}] contains t.
  std::size_t segment_of(double t) const;
};

/// Probability measure on [0, 1] with piecewise-linear CDF on the uniform
/// grid {0, 1/(m-1), ..., 1}, parameterized by its CDF increments, plus the
/// affine map to its native support.
///
/// The Lipschitz cap tau is expressed in canonical units: every increment is
/// at most tau / (m - 1).
class DiscretizedMeasure {
 public:
  /// Validates nonnegativity, sum-to-one (within kIncrementTolerance) and the
  /// cap; throws ValidationError otherwise.
  DiscretizedMeasure(std::vector<double> increments, double tau, SupportMap support = {});

  /// Like the constructor but first renormalizes increments whose sum is
  /// within 1e-9 of one and clips tiny negative rounding residue.
  static DiscretizedMeasure normalized(std::vector<double> increments, double tau, SupportMap support = {});

  static DiscretizedMeasure uniform(std::size_t m, double tau = 1.0, SupportMap support = {});

  std::size_t grid_points() const { return increments_.size() + 1; }
  std::size_t cells() const { return increments_.size(); }
  std::span<const double> increments() const { return increments_; }
  /// Cumulative CDF values at the grid points: s_0 = 0, ..., s_{m-1} = 1.
  std::span<const double> cumulative() const { return cumulative_; }
  double tau() const { return tau_; }
  double cap() const { return tau_ / static_cast<double>(cells()); }
  const SupportMap& support() const { return support_; }

  /// F(x) for canonical x in [0, 1]; DomainError outside.
  double cdf(double x) const;
  /// F at a native-support point; 0 below lo, 1 at or above hi.
  double cdf_native(double t) const;

  /// Exact generalized inverse on the canonical interval.
  const QuantileSegments& quantile() const { return quantile_; }
  /// Native-support quantile.
  double quantile_native(double t) const { return support_.to_native(quantile_(t)); }

  /// Each increment split evenly in two; the CDF is unchanged as a function.
  DiscretizedMeasure refine() const;

  DiscretizedMeasure with_support(SupportMap support) const;

  /// Mean of the measure in canonical coordinates.
  double mean() const;

  bool operator==(const DiscretizedMeasure& other) const {
    return increments_ == other.increments_ && tau_ == other.tau_ && support_ == other.support_;
  }

 private:
  std::vector<double> increments_;
  std::vector<double> cumulative_;
  double tau_;
  SupportMap support_;
  QuantileSegments quantile_;
};

/// Integral of f against dF on the canonical interval, evaluated cell by cell
/// as t_k * (m-1) * int_{cell k} f(u) du with a 16-point Gauss-Legendre rule.
double integrate(const DiscretizedMeasure& mu, const std::function<double(double)>& f);

/// Vector of integrals of each basis function against dF.
std::vector<double> integrate_basis(const DiscretizedMeasure& mu,
                                    std::span<const std::function<double(double)>> basis);

/// i.i.d. native-support draws by inverse-CDF sampling.
std::vector<double> sample(const DiscretizedMeasure& mu, Rng& rng, std::size_t n);

/// Increments drawn from a symmetric Dirichlet(1), rejected until they satisfy
/// the cap. Throws ConfigError when the simplex is empty.
std::vector<double> random_capped_increments(Rng& rng, std::size_t m, double tau);

}  // namespace wassdoe
