#include "wassdoe/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>

#include "wassdoe/errors.hpp"
#include "wassdoe/parallel.hpp"

namespace wassdoe {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_runs(std::size_t n) {
  if (n < 2) throw DomainError("design criteria need at least two runs");
}

template <class Distance>
double min_pairwise(std::size_t n, Distance&& dist) {
  require_runs(n);
  double best = kInf;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) best = std::min(best, dist(i, j));
  return best;
}

template <class Distance>
double morris_mitchell(std::size_t n, double exponent, Distance&& dist) {
  require_runs(n);
  if (!(exponent >= 1.0)) throw DomainError("phi_p exponent must be >= 1");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dist(i, j);
      if (d <= 0.0) return kInf;
      acc += std::pow(d, -exponent);
    }
  return std::pow(acc, 1.0 / exponent);
}

/// Nearest distance and soft-min of the distances from a candidate to the
/// fixed runs.
struct Score {
  double nearest = 0.0;
  double soft = 0.0;
};

class RunObjective {
 public:
  RunObjective(std::span<const DiscretizedMeasure> runs, std::size_t index, const WassersteinOrder& order)
      : runs_(runs), index_(index), order_(order), tau_(runs[index].tau()), support_(runs[index].support()) {}

  std::optional<Score> operator()(const std::vector<double>& increments, double temperature) {
    ++evaluations;
    std::optional<DiscretizedMeasure> candidate;
    try {
      candidate.emplace(DiscretizedMeasure::normalized(increments, tau_, support_));
    } catch (const ValidationError&) {
      return std::nullopt;
    }
    distances_.clear();
    for (std::size_t j = 0; j < runs_.size(); ++j)
      if (j != index_) distances_.push_back(measure_distance(*candidate, runs_[j], order_));
    Score s;
    s.nearest = *std::min_element(distances_.begin(), distances_.end());
    double acc = 0.0;
    for (double d : distances_) acc += std::exp(-(d - s.nearest) / temperature);
    s.soft = s.nearest - temperature * std::log(acc);
    return s;
  }

  std::size_t evaluations = 0;

 private:
  std::span<const DiscretizedMeasure> runs_;
  std::size_t index_;
  WassersteinOrder order_;
  double tau_;
  SupportMap support_;
  std::vector<double> distances_;
};

std::vector<double> random_direction(Rng& rng, std::size_t dim) {
  std::vector<double> d(dim);
  double mean = 0.0;
  for (auto& v : d) {
    v = rng.normal();
    mean += v;
  }
  mean /= static_cast<double>(dim);
  double norm = 0.0;
  for (auto& v : d) {
    v -= mean;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (auto& v : d) v /= norm;
  return d;
}

std::vector<double> step_from(const std::vector<double>& base, const std::vector<double>& dir, double step,
                              const CappedSimplex& simplex) {
  std::vector<double> moved(base.size());
  for (std::size_t k = 0; k < base.size(); ++k) moved[k] = base[k] + step * dir[k];
  return project_capped_simplex(moved, simplex);
}

DiscretizedMeasure make_run(const std::vector<double>& increments, const DiscretizedMeasure& like) {
  return DiscretizedMeasure::normalized(increments, like.tau(), like.support());
}

}  // namespace

// ---------------------------------------------------------------------------

void OptimizerConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("optimizer epsilon must be positive");
  if (restarts == 0 || later_restarts == 0) throw ConfigError("optimizer needs at least one restart");
  if (max_sweeps == 0) throw ConfigError("optimizer needs at least one sweep");
  if (refine_schedule.empty()) throw ConfigError("refinement schedule is empty");
  if (refine_schedule.front() < 2) throw ConfigError("refinement schedule must start at m >= 2");
  for (std::size_t k = 1; k < refine_schedule.size(); ++k)
    if (refine_schedule[k] != 2 * (refine_schedule[k - 1] - 1) + 1)
      throw ConfigError("refinement schedule must satisfy m_{k+1} = 2 (m_k - 1) + 1");
  if (inner.starts == 0 || inner.directions == 0 || !(inner.shrink > 0.0 && inner.shrink < 1.0) ||
      !(inner.min_step > 0.0) || !(inner.temperature > 0.0))
    throw ConfigError("invalid inner solver settings");
}

std::vector<MixedPoint> MixedDesign::runs() const {
  std::vector<MixedPoint> out;
  out.reserve(base_euclidean.size());
  for (std::size_t i = 0; i < base_euclidean.size(); ++i)
    out.emplace_back(base_euclidean[i], base_measures.runs[permutation[i]]);
  return out;
}

double mdc(std::span<const DiscretizedMeasure> runs, const WassersteinOrder& order) {
  return min_pairwise(runs.size(), [&](std::size_t i, std::size_t j) { return measure_distance(runs[i], runs[j], order); });
}

double mdc(std::span<const MixedPoint> runs, const WassersteinOrder& order) {
  return min_pairwise(runs.size(), [&](std::size_t i, std::size_t j) { return product_distance(runs[i], runs[j], order); });
}

double mdc(const MeasureDesign& design) { return mdc(std::span<const DiscretizedMeasure>(design.runs), design.order); }

double mdc(const MixedDesign& design) {
  const auto runs = design.runs();
  return mdc(std::span<const MixedPoint>(runs), design.order);
}

double phi_p(std::span<const DiscretizedMeasure> runs, const WassersteinOrder& order, double exponent) {
  return morris_mitchell(runs.size(), exponent,
                         [&](std::size_t i, std::size_t j) { return measure_distance(runs[i], runs[j], order); });
}

double phi_p(std::span<const MixedPoint> runs, const WassersteinOrder& order, double exponent) {
  return morris_mitchell(runs.size(), exponent,
                         [&](std::size_t i, std::size_t j) { return product_distance(runs[i], runs[j], order); });
}

double nearest_distance(std::span<const DiscretizedMeasure> runs, std::size_t i, const WassersteinOrder& order) {
  require_runs(runs.size());
  double best = kInf;
  for (std::size_t j = 0; j < runs.size(); ++j)
    if (j != i) best = std::min(best, measure_distance(runs[i], runs[j], order));
  return best;
}

// ---------------------------------------------------------------------------
// Inner solver

std::vector<double> inner_solve(std::span<const DiscretizedMeasure> runs, std::size_t i,
                                const WassersteinOrder& order, const InnerSolverConfig& config, Rng& rng) {
  require_runs(runs.size());
  const auto& incumbent_measure = runs[i];
  const std::vector<double> incumbent(incumbent_measure.increments().begin(), incumbent_measure.increments().end());
  const CappedSimplex simplex = CappedSimplex::for_grid(incumbent_measure.grid_points(), incumbent_measure.tau());
  const double unit = 1.0 / std::sqrt(static_cast<double>(simplex.dim()));
  const double incumbent_nearest = nearest_distance(runs, i, order);

  RunObjective objective(runs, i, order);
  std::vector<double> best = incumbent;
  double best_nearest = incumbent_nearest;

  double temperature = config.temperature;
  for (std::size_t start = 0; start < config.starts; ++start, temperature *= config.anneal) {
    std::vector<double> current = incumbent;
    if (start > 0) current = step_from(incumbent, random_direction(rng, simplex.dim()), config.initial_step * unit, simplex);
    auto current_score = objective(current, temperature);
    if (!current_score) continue;
    const std::size_t budget_end = objective.evaluations + config.max_evaluations;

    double step = config.initial_step * unit;
    while (step >= config.min_step * unit && objective.evaluations < budget_end) {
      bool moved = false;
      for (std::size_t k = 0; k < config.directions && objective.evaluations < budget_end; ++k) {
        const auto dir = random_direction(rng, simplex.dim());
        auto candidate = step_from(current, dir, step, simplex);
        const auto score = objective(candidate, temperature);
        if (!score) continue;
        if (score->soft > current_score->soft && score->nearest >= current_score->nearest) {
          current = std::move(candidate);
          current_score = score;
          moved = true;
          break;
        }
      }
      if (!moved) step *= config.shrink;
    }
    if (current_score->nearest > best_nearest) {
      best_nearest = current_score->nearest;
      best = current;
    }
  }
  return best_nearest > incumbent_nearest ? best : incumbent;
}

// ---------------------------------------------------------------------------
// Block coordinate ascent

void block_coordinate_ascent(MeasureDesign& design, std::size_t stage, const OptimizerConfig& config, Rng& rng) {
  const std::size_t m = design.runs.front().grid_points();
  double xi = mdc(design);
  design.trace.push_back({stage, m, 0, xi});
  design.iteration_limit = true;
  for (std::size_t sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    for (std::size_t i = 0; i < design.runs.size(); ++i) {
      const auto updated = inner_solve(design.runs, i, design.order, config.inner, rng);
      design.runs[i] = make_run(updated, design.runs[i]);
    }
    const double next = mdc(design);
    design.trace.push_back({stage, m, sweep, next});
    const double gain = next - xi;
    xi = next;
    if (gain < config.epsilon) {
      design.iteration_limit = false;
      break;
    }
  }
  design.criterion = xi;
}

MeasureDesign maximin_measure_design(std::size_t n, const OptimizerConfig& config, const WassersteinOrder& order,
                                     double tau, SupportMap support) {
  config.validate();
  if (n < 2) throw DomainError("maximin design needs n >= 2 runs");
  const std::size_t m0 = config.refine_schedule.front();
  if (!(tau >= 1.0)) throw ConfigError("Lipschitz cap tau must be at least 1 for a nonempty measure space");
  (void)CappedSimplex::for_grid(m0, tau);

  const Rng root(config.seed);
  std::vector<MeasureDesign> candidates(config.restarts);
  parallel_for(config.restarts, [&](std::size_t r) {
    Rng rng = root.fork(r);
    MeasureDesign design;
    design.order = order;
    design.tau = tau;
    for (std::size_t i = 0; i < n; ++i)
      design.runs.push_back(DiscretizedMeasure::normalized(random_capped_increments(rng, m0, tau), tau, support));
    block_coordinate_ascent(design, 0, config, rng);
    candidates[r] = std::move(design);
  });
  std::size_t winner = 0;
  for (std::size_t r = 1; r < candidates.size(); ++r)
    if (candidates[r].criterion > candidates[winner].criterion) winner = r;
  MeasureDesign best = std::move(candidates[winner]);

  for (std::size_t stage = 1; stage < config.refine_schedule.size(); ++stage) {
    MeasureDesign start = best;
    for (auto& run : start.runs) run = run.refine();
    std::vector<MeasureDesign> stage_candidates(config.later_restarts, start);
    parallel_for(config.later_restarts, [&](std::size_t r) {
      Rng rng = root.fork(1000 * stage + r);
      block_coordinate_ascent(stage_candidates[r], stage, config, rng);
    });
    std::size_t pick = 0;
    for (std::size_t r = 1; r < stage_candidates.size(); ++r)
      if (stage_candidates[r].criterion > stage_candidates[pick].criterion) pick = r;
    best = std::move(stage_candidates[pick]);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Euclidean base designs

double euclidean_mdc(const std::vector<std::vector<double>>& points) {
  return min_pairwise(points.size(), [&](std::size_t i, std::size_t j) { return dirac_distance(points[i], points[j], 2.0); });
}

namespace {

/// (minimum squared distance, number of pairs attaining it)
std::pair<double, std::size_t> maximin_score(const std::vector<std::vector<double>>& pts) {
  double best = kInf;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < pts[i].size(); ++k) d += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
      if (d < best - 1e-14) {
        best = d;
        count = 1;
      } else if (std::abs(d - best) <= 1e-14) {
        ++count;
      }
    }
  return {best, count};
}

bool better(const std::pair<double, std::size_t>& a, const std::pair<double, std::size_t>& b) {
  if (a.first > b.first + 1e-14) return true;
  return std::abs(a.first - b.first) <= 1e-14 && a.second < b.second;
}

}  // namespace

std::vector<std::vector<double>> euclidean_base_design(std::size_t n, std::size_t d, std::uint64_t seed,
                                                       std::size_t iterations, std::size_t restarts) {
  if (n < 2 || d < 1) throw DomainError("base design needs n >= 2 and d >= 1");
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  if (d == 1) {
    std::vector<std::vector<double>> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {grid[i]};
    return pts;
  }

  const Rng root(seed);
  std::vector<std::vector<double>> best;
  std::pair<double, std::size_t> best_score{-1.0, 0};
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Rng rng = root.fork(r);
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    for (std::size_t k = 0; k < d; ++k) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
      for (std::size_t i = 0; i < n; ++i) pts[i][k] = grid[perm[i]];
    }
    auto score = maximin_score(pts);
    for (std::size_t it = 0; it < iterations; ++it) {
      const std::size_t col = rng.below(d);
      const std::size_t a = rng.below(n);
      std::size_t b = rng.below(n - 1);
      if (b >= a) ++b;
      std::swap(pts[a][col], pts[b][col]);
      const auto trial = maximin_score(pts);
      if (better(trial, score))
        score = trial;
      else
        std::swap(pts[a][col], pts[b][col]);
    }
    if (best.empty() || better(score, best_score)) {
      best = pts;
      best_score = score;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// LH-type pairing

namespace {

class PairingTable {
 public:
  PairingTable(const std::vector<std::vector<double>>& x, std::span<const DiscretizedMeasure> measures,
               const WassersteinOrder& order)
      : x_(x), measures_(measures), order_(order), n_(x.size()) {
    closed_form_ = order.is_l1() || order.is_l2();
    dx_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) dx_[i * n_ + j] = dx_[j * n_ + i] = dirac_distance(x[i], x[j], order.p);
    if (closed_form_) measure_ = DistanceCache::global().measures(measures, order);
  }

  double operator()(std::size_t i, std::size_t j, std::size_t a, std::size_t b) {
    if (closed_form_) return combine_closed_form(dx_[i * n_ + j], (*measure_)(a, b), order_);
    if (i > j) std::swap(i, j), std::swap(a, b);
    const std::uint64_t key = ((i * n_ + j) * n_ + a) * n_ + b;
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const double v = product_distance_quadrature(MixedPoint(x_[i], measures_[a]), MixedPoint(x_[j], measures_[b]), order_);
    memo_.emplace(key, v);
    return v;
  }

  double criterion(std::span<const std::size_t> perm) {
    double best = kInf;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) best = std::min(best, (*this)(i, j, perm[i], perm[j]));
    return best;
  }

 private:
  const std::vector<std::vector<double>>& x_;
  std::span<const DiscretizedMeasure> measures_;
  WassersteinOrder order_;
  std::size_t n_;
  bool closed_form_ = false;
  std::vector<double> dx_;
  std::shared_ptr<const DistanceMatrix> measure_;
  std::unordered_map<std::uint64_t, double> memo_;
};

void validate_pairing_inputs(const std::vector<std::vector<double>>& base_x, std::size_t measure_count) {
  if (base_x.size() != measure_count) throw ValidationError("base designs must have the same number of runs");
  require_runs(base_x.size());
  for (const auto& row : base_x) {
    if (row.size() != base_x.front().size()) throw ValidationError("Euclidean base design rows differ in dimension");
    for (double v : row)
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("Euclidean base design must lie in [0, 1]^d");
  }
}

}  // namespace

double pairing_criterion(const std::vector<std::vector<double>>& base_x, std::span<const DiscretizedMeasure> measures,
                         std::span<const std::size_t> permutation, const WassersteinOrder& order) {
  validate_pairing_inputs(base_x, measures.size());
  PairingTable table(base_x, measures, order);
  return table.criterion(permutation);
}

MixedDesign lh_type_design(std::vector<std::vector<double>> base_x, MeasureDesign base_measures,
                           const WassersteinOrder& order, std::size_t n_perms, std::uint64_t seed) {
  validate_pairing_inputs(base_x, base_measures.runs.size());
  if (n_perms == 0) throw ConfigError("permutation search needs n_perms >= 1");
  const std::size_t n = base_x.size();
  PairingTable table(base_x, base_measures.runs, order);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_value = table.criterion(perm);

  if (n <= 8) {
    while (std::next_permutation(perm.begin(), perm.end())) {
      const double v = table.criterion(perm);
      if (v > best_value) {
        best_value = v;
        best = perm;
      }
    }
  } else {
    Rng rng(seed);
    for (std::size_t k = 0; k < n_perms; ++k) {
      for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
      const double v = table.criterion(perm);
      if (v > best_value) {
        best_value = v;
        best = perm;
      }
    }
  }

  MixedDesign design;
  design.base_euclidean = std::move(base_x);
  design.base_measures = std::move(base_measures);
  design.order = order;
  design.permutation = std::move(best);
  design.criterion = best_value;
  return design;
}

}  // namespace wassdoe
