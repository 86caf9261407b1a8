#include "wassdoe/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wassdoe/errors.hpp"
#include "wassdoe/quadrature.hpp"

namespace wassdoe {
namespace {

constexpr double kRenormalizeTolerance = 1e-9;
constexpr std::size_t kCellQuadraturePoints = 16;

QuantileSegments build_quantile(std::span<const double> increments, std::span<const double> cumulative) {
  QuantileSegments q;
  const double h = 1.0 / static_cast<double>(increments.size());
  q.breakpoints.push_back(0.0);
  for (std::size_t i = 0; i < increments.size(); ++i) {
    const double t = increments[i];
    if (t <= 0.0) continue;
    // On levels (s_i, s_{i+1}] the inverse is u_i + (level - s_i) * h / t_i.
    const double slope = h / t;
    q.slopes.push_back(slope);
    q.intercepts.push_back(static_cast<double>(i) * h - cumulative[i] * slope);
    q.breakpoints.push_back(cumulative[i + 1]);
  }
  q.breakpoints.back() = 1.0;
  return q;
}

}  // namespace

// ---------------------------------------------------------------------------
// CappedSimplex

CappedSimplex::CappedSimplex(std::size_t dim, double cap) : dim_(dim), cap_(cap) {
  if (dim == 0 || !(cap > 0.0) || !std::isfinite(cap))
    throw ConfigError("capped simplex needs dim >= 1 and a positive finite cap");
  if (cap * static_cast<double>(dim) < 1.0 - kIncrementTolerance)
    throw ConfigError("capped simplex is empty: dim * cap = " + std::to_string(cap * static_cast<double>(dim)) +
                      " < 1");
}

CappedSimplex CappedSimplex::for_grid(std::size_t m, double tau) {
  if (m < 2) throw ConfigError("measure grid needs m >= 2 points");
  return CappedSimplex(m - 1, tau / static_cast<double>(m - 1));
}

bool CappedSimplex::contains(std::span<const double> v, double tol) const {
  if (v.size() != dim_) return false;
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= -tol) || x > cap_ * (1.0 + tol) + tol) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol * std::max<double>(1.0, static_cast<double>(dim_) * 0.01);
}

std::vector<double> project_capped_simplex(std::span<const double> v, const CappedSimplex& simplex) {
  if (v.size() != simplex.dim()) throw DomainError("projection: vector length does not match simplex dimension");
  for (double x : v)
    if (!std::isfinite(x)) throw DomainError("projection: non-finite input");
  const double cap = simplex.cap();
  const std::size_t n = v.size();

  auto clipped_sum = [&](double lambda) {
    double s = 0.0;
    for (double x : v) s += std::clamp(x - lambda, 0.0, cap);
    return s;
  };

  // clipped_sum is nonincreasing in lambda: every coordinate sits at the cap
  // for lambda <= min(v) - cap and at zero for lambda >= max(v).
  const auto [vmin, vmax] = std::minmax_element(v.begin(), v.end());
  double lo = *vmin - cap;
  double hi = *vmax;
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (clipped_sum(mid) >= 1.0)
      lo = mid;
    else
      hi = mid;
  }
  double lambda = 0.5 * (lo + hi);

  // Exact lambda for the identified active set.
  double free_sum = 0.0;
  std::size_t free_count = 0, upper = 0;
  for (double x : v) {
    const double y = x - lambda;
    if (y >= cap)
      ++upper;
    else if (y > 0.0) {
      free_sum += x;
      ++free_count;
    }
  }
  if (free_count > 0) {
    const double exact = (free_sum + cap * static_cast<double>(upper) - 1.0) / static_cast<double>(free_count);
    if (std::abs(exact - lambda) <= 1e-9 * std::max(1.0, std::abs(lambda))) lambda = exact;
  }

  std::vector<double> out(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(v[i] - lambda, 0.0, cap);
    sum += out[i];
  }
  // Absorb residual rounding into free coordinates (never pushes past bounds).
  double residual = 1.0 - sum;
  for (std::size_t i = 0; i < n && residual != 0.0; ++i) {
    if (out[i] > 0.0 && out[i] < cap) {
      const double adjusted = std::clamp(out[i] + residual, 0.0, cap);
      residual -= adjusted - out[i];
      out[i] = adjusted;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// QuantileSegments

std::size_t QuantileSegments::segment_of(double t) const {
  // First breakpoint >= t closes the segment (b_{k}, b_{k+1}].
  auto it = std::lower_bound(breakpoints.begin() + 1, breakpoints.end(), t);
  if (it == breakpoints.end()) --it;
  return static_cast<std::size_t>(it - breakpoints.begin()) - 1;
}

double QuantileSegments::operator()(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  if (t <= 0.0) return 0.0;
  const std::size_t k = segment_of(t);
  return std::clamp(intercepts[k] + slopes[k] * t, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// DiscretizedMeasure

DiscretizedMeasure::DiscretizedMeasure(std::vector<double> increments, double tau, SupportMap support)
    : increments_(std::move(increments)), tau_(tau), support_(support) {
  if (increments_.empty()) throw ValidationError("measure needs at least one grid cell (m >= 2)");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("measure tau must be positive and finite");
  if (!std::isfinite(support.lo) || !std::isfinite(support.hi) || support.hi < support.lo)
    throw ValidationError("measure support must satisfy lo <= hi");
  const double cap = tau_ / static_cast<double>(increments_.size());
  double sum = 0.0;
  for (double t : increments_) {
    if (!std::isfinite(t) || t < 0.0) throw ValidationError("measure increments must be nonnegative");
    if (t > cap * (1.0 + kIncrementTolerance))
      throw ValidationError("measure increment " + std::to_string(t) + " exceeds the Lipschitz cap " +
                            std::to_string(cap));
    sum += t;
  }
  if (std::abs(sum - 1.0) > kIncrementTolerance)
    throw ValidationError("measure increments must sum to one (got " + std::to_string(sum) + ")");

  cumulative_.resize(increments_.size() + 1);
  cumulative_[0] = 0.0;
  std::partial_sum(increments_.begin(), increments_.end(), cumulative_.begin() + 1);
  cumulative_.back() = 1.0;
  quantile_ = build_quantile(increments_, cumulative_);
}

DiscretizedMeasure DiscretizedMeasure::normalized(std::vector<double> increments, double tau, SupportMap support) {
  double sum = 0.0;
  for (double& t : increments) {
    if (t < 0.0 && t > -kRenormalizeTolerance) t = 0.0;
    sum += t;
  }
  if (std::abs(sum - 1.0) >= kRenormalizeTolerance)
    throw ValidationError("increments drifted from sum one by " + std::to_string(sum - 1.0));
  const double cap = tau / static_cast<double>(increments.size());
  for (double& t : increments) t = std::min(t / sum, cap);
  return DiscretizedMeasure(std::move(increments), tau, support);
}

DiscretizedMeasure DiscretizedMeasure::uniform(std::size_t m, double tau, SupportMap support) {
  if (m < 2) throw ValidationError("measure grid needs m >= 2 points");
  return DiscretizedMeasure(std::vector<double>(m - 1, 1.0 / static_cast<double>(m - 1)), tau, support);
}

double DiscretizedMeasure::cdf(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("cdf argument outside [0, 1]");
  if (x == 1.0) return 1.0;
  const double scaled = x * static_cast<double>(cells());
  const std::size_t i = std::min(static_cast<std::size_t>(scaled), cells() - 1);
  if (scaled == static_cast<double>(i)) return cumulative_[i];
  return std::min(1.0, cumulative_[i] + (scaled - static_cast<double>(i)) * increments_[i]);
}

double DiscretizedMeasure::cdf_native(double t) const {
  if (t < support_.lo) return 0.0;
  if (t >= support_.hi) return 1.0;
  return cdf((t - support_.lo) / support_.scale());
}

DiscretizedMeasure DiscretizedMeasure::refine() const {
  std::vector<double> fine;
  fine.reserve(2 * increments_.size());
  for (double t : increments_) {
    fine.push_back(0.5 * t);
    fine.push_back(0.5 * t);
  }
  return DiscretizedMeasure::normalized(std::move(fine), tau_, support_);
}

DiscretizedMeasure DiscretizedMeasure::with_support(SupportMap support) const {
  return DiscretizedMeasure(increments_, tau_, support);
}

double DiscretizedMeasure::mean() const {
  const double h = 1.0 / static_cast<double>(cells());
  double acc = 0.0;
  for (std::size_t i = 0; i < cells(); ++i) acc += increments_[i] * (static_cast<double>(i) + 0.5) * h;
  return acc;
}

// ---------------------------------------------------------------------------

double integrate(const DiscretizedMeasure& mu, const std::function<double(double)>& f) {
  const auto& rule = gauss_legendre(kCellQuadraturePoints);
  const auto t = mu.increments();
  const double h = 1.0 / static_cast<double>(t.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] == 0.0) continue;
    const double a = static_cast<double>(k) * h;
    acc += t[k] * rule.integrate(f, a, a + h) / h;
  }
  return acc;
}

std::vector<double> integrate_basis(const DiscretizedMeasure& mu,
                                    std::span<const std::function<double(double)>> basis) {
  const auto& rule = gauss_legendre(kCellQuadraturePoints);
  const auto t = mu.increments();
  const double h = 1.0 / static_cast<double>(t.size());
  std::vector<double> out(basis.size(), 0.0);
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] == 0.0) continue;
    const double mid = (static_cast<double>(k) + 0.5) * h;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double u = mid + 0.5 * h * rule.nodes[q];
      // (m-1) * t_k * (h/2) * w_q = t_k * w_q / 2
      const double w = 0.5 * t[k] * rule.weights[q];
      for (std::size_t j = 0; j < basis.size(); ++j) out[j] += w * basis[j](u);
    }
  }
  return out;
}

std::vector<double> sample(const DiscretizedMeasure& mu, Rng& rng, std::size_t n) {
  if (n == 0) throw DomainError("sample count must be at least 1");
  std::vector<double> out(n);
  for (auto& v : out) v = mu.quantile_native(rng.uniform_open_closed());
  return out;
}

std::vector<double> random_capped_increments(Rng& rng, std::size_t m, double tau) {
  const CappedSimplex simplex = CappedSimplex::for_grid(m, tau);
  const std::size_t dim = simplex.dim();
  if (simplex.cap() * static_cast<double>(dim) <= 1.0 + kIncrementTolerance)
    return std::vector<double>(dim, 1.0 / static_cast<double>(dim));

  std::vector<double> draw(dim);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    double sum = 0.0;
    for (auto& v : draw) {
      v = rng.exponential();
      sum += v;
    }
    bool ok = true;
    for (auto& v : draw) {
      v /= sum;
      if (v > simplex.cap()) ok = false;
    }
    if (ok) {
      const auto measure = DiscretizedMeasure::normalized(draw, tau);
      return {measure.increments().begin(), measure.increments().end()};
    }
  }
  // Rejection too slow for very tight caps: project the last draw instead.
  return project_capped_simplex(draw, simplex);
}

}  // namespace wassdoe
