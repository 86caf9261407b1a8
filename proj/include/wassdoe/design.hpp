#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "wassdoe/measure.hpp"
#include "wassdoe/rng.hpp"
#include "wassdoe/wasserstein.hpp"

namespace wassdoe {

/// Projected pattern search used for a single run update.
struct InnerSolverConfig {
  std::size_t starts = 3;         // incumbent plus perturbed restarts
  std::size_t directions = 20;    // random directions per step
  double initial_step = 0.5;      // in units of 1/sqrt(dim), the norm of a uniform increment vector
  double shrink = 0.5;
  double min_step = 1e-7;
  double temperature = 1e-2;      // soft-min temperature of the first start
  double anneal = 0.5;            // temperature factor per further start
  std::size_t max_evaluations = 3000;  // per start
};

struct OptimizerConfig {
  double epsilon = 1e-6;
  std::size_t restarts = 20;       // at the coarsest grid
  std::size_t later_restarts = 1;  // refined stages are warm-started
  std::size_t max_sweeps = 200;    // per stage
  std::uint64_t seed = 0;
  std::vector<std::size_t> refine_schedule{11, 21, 41};
  InnerSolverConfig inner;

  /// Throws ConfigError for epsilon <= 0, zero restarts, or a schedule that
  /// is not m_{k+1} = 2 (m_k - 1) + 1 starting from m >= 2.
  void validate() const;
};

/// One logged value of the running criterion xi.
struct TraceEntry {
  std::size_t stage = 0;
  std::size_t m = 0;
  std::size_t sweep = 0;  // 0 is the stage's starting design
  double xi = 0.0;
};

struct MeasureDesign {
  std::vector<DiscretizedMeasure> runs;
  WassersteinOrder order;
  double tau = 0.0;
  double criterion = 0.0;  // mdc of runs
  std::vector<TraceEntry> trace;
  bool iteration_limit = false;
};

/// Pairing of a Euclidean base design with a measure base design:
/// run i is (base_euclidean[i], base_measures.runs[permutation[i]]).
/// The permutation is zero-based.
struct MixedDesign {
  std::vector<std::vector<double>> base_euclidean;
  MeasureDesign base_measures;
  std::vector<std::size_t> permutation;
  WassersteinOrder order;
  double criterion = 0.0;

  std::vector<MixedPoint> runs() const;
};

/// Minimum pairwise distance. Throws DomainError for fewer than two runs.
double mdc(std::span<const DiscretizedMeasure> runs, const WassersteinOrder& order);
double mdc(std::span<const MixedPoint> runs, const WassersteinOrder& order);
double mdc(const MeasureDesign& design);
double mdc(const MixedDesign& design);

/// Morris-Mitchell criterion (sum_{i<j} d_ij^{-k})^{1/k}; +infinity when two
/// runs coincide.
double phi_p(std::span<const DiscretizedMeasure> runs, const WassersteinOrder& order, double exponent);
double phi_p(std::span<const MixedPoint> runs, const WassersteinOrder& order, double exponent);

/// Distance from run i to its nearest other run.
double nearest_distance(std::span<const DiscretizedMeasure> runs, std::size_t i, const WassersteinOrder& order);

/// Improves run i with the others fixed. Returns increments whose nearest
/// distance to the other runs is at least the incumbent's; the incumbent
/// itself is returned when no strict improvement is found.
std::vector<double> inner_solve(std::span<const DiscretizedMeasure> runs, std::size_t i,
                                const WassersteinOrder& order, const InnerSolverConfig& config, Rng& rng);

/// Block coordinate ascent on mdc from a given start at a fixed grid size:
/// sweeps over the runs until a sweep raises xi by less than epsilon or the
/// sweep cap is hit. Appends to design.trace.
void block_coordinate_ascent(MeasureDesign& design, std::size_t stage, const OptimizerConfig& config, Rng& rng);

/// Maximin W_{q,p} design of n measures with Lipschitz cap tau, optimized at
/// each grid size in the refinement schedule.
MeasureDesign maximin_measure_design(std::size_t n, const OptimizerConfig& config, const WassersteinOrder& order,
                                     double tau, SupportMap support = {});

/// Maximin l2 Latin hypercube on the grid {0, 1/(n-1), ..., 1}, improved by
/// random within-column exchanges. For d = 1 the grid itself is returned.
std::vector<std::vector<double>> euclidean_base_design(std::size_t n, std::size_t d, std::uint64_t seed,
                                                       std::size_t iterations = 4000, std::size_t restarts = 5);

/// Minimum l2 distance of a point set.
double euclidean_mdc(const std::vector<std::vector<double>>& points);

inline constexpr std::size_t kDefaultPermutations = 100000;

/// Best pairing under the mixed mdc. Exhaustive for n <= 8; otherwise the
/// identity plus n_perms random permutations. Ties keep the first found.
MixedDesign lh_type_design(std::vector<std::vector<double>> base_x, MeasureDesign base_measures,
                           const WassersteinOrder& order, std::size_t n_perms = kDefaultPermutations,
                           std::uint64_t seed = 0);

/// Mixed mdc of a pairing, using the same distance tables as lh_type_design.
double pairing_criterion(const std::vector<std::vector<double>>& base_x, std::span<const DiscretizedMeasure> measures,
                         std::span<const std::size_t> permutation, const WassersteinOrder& order);

}  // namespace wassdoe
