#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wassdoe/design.hpp"
#include "wassdoe/gp.hpp"

namespace wassdoe::bench {

enum class FunctionId { I, II, III };

const char* to_string(FunctionId id);
FunctionId function_from_string(const std::string& name);

/// Test functions on [0,1]^d x P([0,1]):
///   I    c + x^(1+c) + int t dmu            (c = c1)
///   II   int cos(3t + c1) dmu + exp(x) + c2 F_mu(x)
///   III  (x1 + int t dmu + c1)^2 - c2 log(1 + x2)
struct TestFunction {
  FunctionId id = FunctionId::I;
  double c1 = 0.0;
  double c2 = 0.0;

  std::size_t d() const { return id == FunctionId::III ? 2 : 1; }
  /// Constants drawn uniformly on [0, 1].
  static TestFunction draw(FunctionId id, Rng& rng);
};

/// DomainError on a dimension mismatch.
double eval_test_function(const TestFunction& tf, const MixedPoint& at);

/// Mean squared prediction error over the test points. DomainError if empty.
double mspe(const GpModel& model, const TestFunction& tf, std::span<const MixedPoint> test_points);

/// x uniform on [0,1]^d, measure increments Dirichlet(1) conditioned on the
/// cap tau / (m - 1).
MixedPoint random_mixed_point(Rng& rng, std::size_t d, double tau = 3.0, std::size_t m = 41);

/// Order-independent hash of a point set (used to confirm paired cells).
std::uint64_t point_set_hash(std::span<const MixedPoint> points);

struct DesignSpec {
  std::string name;  // e.g. "D1"
  WassersteinOrder order;
};

struct ExperimentGrid {
  std::vector<FunctionId> functions{FunctionId::I, FunctionId::II, FunctionId::III};
  std::vector<DesignSpec> designs{{"D1", {1, 1}}, {"D2", {2, 2}}};
  std::vector<std::size_t> n_values{20, 40};
  std::vector<KrigingMode> models{KrigingMode::simple, KrigingMode::universal};
  std::size_t replicates = 20;
  std::size_t n_test = 500;
  std::uint64_t seed = 1;
  double tau = 3.0;
  std::size_t test_grid_points = 41;
  std::size_t basis_l = 10;
  OptimizerConfig design_config = default_design_config();
  std::size_t permutations = kDefaultPermutations;
  FitOptions fit;

  /// Scale of the published experiment: 100 replicates, 1000 test points.
  ExperimentGrid& full_scale();
  void validate() const;
  static OptimizerConfig default_design_config();
};

struct ResultRow {
  FunctionId function = FunctionId::I;
  std::string design;
  std::size_t n = 0;
  KrigingMode model = KrigingMode::simple;
  std::size_t replicate = 0;
  double mspe = 0.0;  // NaN when the fit failed
  std::string error;  // empty on success
  std::uint64_t test_hash = 0;

  bool ok() const { return error.empty(); }
};

struct CellSummary {
  FunctionId function = FunctionId::I;
  std::string design;
  std::size_t n = 0;
  KrigingMode model = KrigingMode::simple;
  std::size_t count = 0;
  std::size_t failures = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double whisker_lo = 0.0, whisker_hi = 0.0;  // Tukey, 1.5 IQR
};

struct GridResult {
  std::vector<ResultRow> rows;  // function, design, n, model, replicate order
  std::vector<CellSummary> summaries;
  std::vector<MixedDesign> designs;  // one per (design, n, d) actually used

  std::string csv() const;
  const CellSummary& summary(FunctionId f, const std::string& design, std::size_t n, KrigingMode model) const;
};

/// Linear-interpolation quantile of sorted data (0 <= prob <= 1).
double sorted_quantile(std::span<const double> sorted, double prob);

CellSummary summarize(std::span<const double> values);

/// Builds one LH-type design per (design, n, dimension) and reuses it for all
/// replicates; constants and test points are drawn per (function, replicate)
/// and shared by every cell.
GridResult run_grid(const ExperimentGrid& grid);

}  // namespace wassdoe::bench
