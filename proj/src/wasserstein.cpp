#include "wassdoe/wasserstein.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "wassdoe/errors.hpp"
#include "wassdoe/quadrature.hpp"

namespace wassdoe {
namespace {

constexpr std::size_t kProductQuadraturePoints = 32;
constexpr double kAdaptiveRelTol = 1e-10;

/// Difference of two quantile functions, affine on [a, b].
struct Piece {
  double a, b;
  double ga, gb;  // difference at the endpoints
};

/// Walks the merged breakpoints of two quantile functions and calls
/// visit(piece) for every interval of positive length, with the difference
/// already scaled to native units.
template <class Visit>
void for_each_piece(const DiscretizedMeasure& mu, const DiscretizedMeasure& nu, Visit&& visit) {
  if (!(mu.support() == nu.support())) throw DomainError("Wasserstein distance needs measures on the same support");
  const auto& qa = mu.quantile();
  const auto& qb = nu.quantile();
  const double scale = mu.support().scale();
  std::size_t i = 0, j = 0;
  double lo = 0.0;
  while (i < qa.size() && j < qb.size()) {
    const double hi = std::min(qa.breakpoints[i + 1], qb.breakpoints[j + 1]);
    if (hi > lo) {
      const double ia = qa.intercepts[i], sa = qa.slopes[i];
      const double ib = qb.intercepts[j], sb = qb.slopes[j];
      visit(Piece{lo, hi, scale * ((ia + sa * lo) - (ib + sb * lo)), scale * ((ia + sa * hi) - (ib + sb * hi))});
      lo = hi;
    }
    if (qa.breakpoints[i + 1] <= hi) ++i;
    if (qb.breakpoints[j + 1] <= hi) ++j;
  }
}

/// Splits a piece at the zero of its affine difference, if it changes sign.
template <class Visit>
void split_at_sign_change(const Piece& piece, Visit&& visit) {
  if ((piece.ga < 0.0 && piece.gb > 0.0) || (piece.ga > 0.0 && piece.gb < 0.0)) {
    const double frac = piece.ga / (piece.ga - piece.gb);
    const double root = piece.a + frac * (piece.b - piece.a);
    visit(Piece{piece.a, root, piece.ga, 0.0});
    visit(Piece{root, piece.b, 0.0, piece.gb});
  } else {
    visit(piece);
  }
}

double abs_integral(const Piece& s) {
  const double aa = std::abs(s.ga), ab = std::abs(s.gb);
  if (s.ga * s.gb >= 0.0) return 0.5 * (s.b - s.a) * (aa + ab);
  return 0.5 * (s.b - s.a) * (s.ga * s.ga + s.gb * s.gb) / (aa + ab);
}

double square_integral(const Piece& s) { return (s.b - s.a) * (s.ga * s.ga + s.ga * s.gb + s.gb * s.gb) / 3.0; }

double power_integral(const Piece& s, double p) {
  double total = 0.0;
  split_at_sign_change(s, [&](const Piece& part) {
    const double width = part.b - part.a;
    if (width <= 0.0) return;
    auto f = [&](double u) {
      const double g = part.ga + (part.gb - part.ga) * u;
      return std::pow(std::abs(g), p);
    };
    total += width * boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, 1.0, 15, kAdaptiveRelTol);
  });
  return total;
}

void mix_bytes(std::uint64_t& h, std::uint64_t word) {
  for (int b = 0; b < 8; ++b) {
    h ^= (word >> (8 * b)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
}

void mix_double(std::uint64_t& h, double v) { mix_bytes(h, std::bit_cast<std::uint64_t>(v)); }

}  // namespace

WassersteinOrder::WassersteinOrder(double q_order, double p_order) : q(q_order), p(p_order) {
  if (!(q >= 1.0) || !(p >= 1.0) || !std::isfinite(q) || !std::isfinite(p))
    throw ConfigError("Wasserstein orders need q >= 1 and p >= 1");
}

MixedPoint::MixedPoint(std::vector<double> coords, DiscretizedMeasure measure)
    : x(std::move(coords)), mu(std::move(measure)) {
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("mixed point coordinates must lie in [0, 1]");
}

double w_pp(const DiscretizedMeasure& mu, const DiscretizedMeasure& nu, double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("w_pp needs a finite order p >= 1");
  double total = 0.0;
  if (p == 1.0) {
    for_each_piece(mu, nu, [&](const Piece& s) { total += abs_integral(s); });
    return total;
  }
  if (p == 2.0) {
    for_each_piece(mu, nu, [&](const Piece& s) { total += square_integral(s); });
    return std::sqrt(std::max(total, 0.0));
  }
  for_each_piece(mu, nu, [&](const Piece& s) { total += power_integral(s, p); });
  return std::pow(std::max(total, 0.0), 1.0 / p);
}

double dirac_distance(std::span<const double> x, std::span<const double> y, double p) {
  if (x.size() != y.size()) throw DomainError("dirac_distance: dimension mismatch");
  if (!(p >= 1.0)) throw DomainError("dirac_distance needs p >= 1");
  double acc = 0.0;
  if (p == 1.0) {
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
    return acc;
  }
  if (p == 2.0) {
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc);
  }
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i] - y[i]), p);
  return std::pow(acc, 1.0 / p);
}

double combine_closed_form(double euclidean, double measure, const WassersteinOrder& order) {
  if (order.is_l1()) return euclidean + measure;
  if (order.is_l2()) return std::sqrt(euclidean * euclidean + measure * measure);
  throw ConfigError("closed-form product distance exists only for (q,p) = (1,1) and (2,2)");
}

double product_distance(const MixedPoint& a, const MixedPoint& b, const WassersteinOrder& order) {
  if (a.dim() != b.dim()) throw DomainError("product_distance: dimension mismatch");
  if (order.is_l1() || order.is_l2())
    return combine_closed_form(dirac_distance(a.x, b.x, order.p), w_pp(a.mu, b.mu, order.p), order);
  return product_distance_quadrature(a, b, order);
}

double product_distance_quadrature(const MixedPoint& a, const MixedPoint& b, const WassersteinOrder& order) {
  if (a.dim() != b.dim()) throw DomainError("product_distance: dimension mismatch");
  const double p = order.p, q = order.q;
  double c = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) c += std::pow(std::abs(a.x[i] - b.x[i]), p);
  const auto& rule = gauss_legendre(kProductQuadraturePoints);
  double total = 0.0;
  for_each_piece(a.mu, b.mu, [&](const Piece& piece) {
    split_at_sign_change(piece, [&](const Piece& s) {
      if (s.b <= s.a) return;
      auto integrand = [&](double u) {
        const double g = s.ga + (s.gb - s.ga) * u;
        return std::pow(c + std::pow(std::abs(g), p), q / p);
      };
      total += (s.b - s.a) * rule.integrate(integrand, 0.0, 1.0);
    });
  });
  return std::pow(std::max(total, 0.0), 1.0 / q);
}

DistanceMatrix pairwise_measure_distances(std::span<const DiscretizedMeasure> measures,
                                          const WassersteinOrder& order) {
  DistanceMatrix d;
  d.n = measures.size();
  d.values.assign(d.n * d.n, 0.0);
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = i + 1; j < d.n; ++j) d(i, j) = d(j, i) = measure_distance(measures[i], measures[j], order);
  return d;
}

std::uint64_t content_hash(std::span<const DiscretizedMeasure> measures, const WassersteinOrder& order) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  mix_double(h, order.q);
  mix_double(h, order.p);
  mix_bytes(h, measures.size());
  for (const auto& mu : measures) {
    mix_double(h, mu.tau());
    mix_double(h, mu.support().lo);
    mix_double(h, mu.support().hi);
    mix_bytes(h, mu.cells());
    for (double t : mu.increments()) mix_double(h, t);
  }
  return h;
}

DistanceCache& DistanceCache::global() {
  static DistanceCache cache;
  return cache;
}

std::shared_ptr<const DistanceMatrix> DistanceCache::measures(std::span<const DiscretizedMeasure> measures,
                                                              const WassersteinOrder& order) {
  const std::uint64_t key = content_hash(measures, order);
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  auto computed = std::make_shared<const DistanceMatrix>(pairwise_measure_distances(measures, order));
  std::unique_lock lock(mutex_);
  return entries_.try_emplace(key, std::move(computed)).first->second;
}

std::size_t DistanceCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void DistanceCache::clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
}

}  // namespace wassdoe
