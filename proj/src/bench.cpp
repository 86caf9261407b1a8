#include "wassdoe/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "wassdoe/errors.hpp"
#include "wassdoe/parallel.hpp"

namespace wassdoe::bench {
namespace {

std::uint64_t fnv(std::uint64_t h, double v) {
  std::uint64_t bits;
  static_assert(sizeof bits == sizeof v);
  std::memcpy(&bits, &v, sizeof v);
  for (int k = 0; k < 8; ++k) {
    h ^= (bits >> (8 * k)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t point_hash(const MixedPoint& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : p.x) h = fnv(h, v);
  for (double v : p.mu.increments()) h = fnv(h, v);
  return h;
}

// Stream ids keep constants and test points independent of which cells run.
std::uint64_t replicate_stream(FunctionId f, std::size_t replicate) {
  return 1000003ULL * (static_cast<std::uint64_t>(f) + 1) + replicate;
}

bool interpolates(const GpModel& model) {
  for (std::size_t k = 0; k < model.inputs().size(); ++k) {
    const double yk = model.y()[static_cast<Eigen::Index>(k)];
    if (!(std::abs(model.predict(model.inputs()[k]) - yk) / (1.0 + std::abs(yk)) < 1e-6)) return false;
  }
  return true;
}

}  // namespace

const char* to_string(FunctionId id) {
  switch (id) {
    case FunctionId::I: return "I";
    case FunctionId::II: return "II";
    case FunctionId::III: return "III";
  }
  return "?";
}

FunctionId function_from_string(const std::string& name) {
  if (name == "I") return FunctionId::I;
  if (name == "II") return FunctionId::II;
  if (name == "III") return FunctionId::III;
  throw ConfigError("unknown test function '" + name + "'");
}

TestFunction TestFunction::draw(FunctionId id, Rng& rng) {
  TestFunction tf;
  tf.id = id;
  tf.c1 = rng.uniform();
  tf.c2 = rng.uniform();
  return tf;
}

double eval_test_function(const TestFunction& tf, const MixedPoint& at) {
  if (at.dim() != tf.d()) throw DomainError(std::string("test function ") + to_string(tf.id) + " expects d = " + std::to_string(tf.d()));
  const double mean = at.mu.mean();
  switch (tf.id) {
    case FunctionId::I: return tf.c1 + std::pow(at.x[0], 1.0 + tf.c1) + mean;
    case FunctionId::II: {
      const double c1 = tf.c1;
      return integrate(at.mu, [c1](double t) { return std::cos(3.0 * t + c1); }) + std::exp(at.x[0]) +
             tf.c2 * at.mu.cdf(at.x[0]);
    }
    case FunctionId::III: {
      const double s = at.x[0] + mean + tf.c1;
      return s * s - tf.c2 * std::log1p(at.x[1]);
    }
  }
  throw DomainError("unknown test function");
}

double mspe(const GpModel& model, const TestFunction& tf, std::span<const MixedPoint> test_points) {
  if (test_points.empty()) throw DomainError("mspe needs at least one test point");
  double s = 0.0;
  for (const auto& p : test_points) {
    const double e = model.predict(p) - eval_test_function(tf, p);
    s += e * e;
  }
  return s / static_cast<double>(test_points.size());
}

MixedPoint random_mixed_point(Rng& rng, std::size_t d, double tau, std::size_t m) {
  if (!(tau >= 1.0)) throw DomainError("tau must be at least 1");
  std::vector<double> x(d);
  for (auto& v : x) v = rng.uniform();
  return {std::move(x), DiscretizedMeasure::normalized(random_capped_increments(rng, m, tau), tau)};
}

std::uint64_t point_set_hash(std::span<const MixedPoint> points) {
  std::vector<std::uint64_t> hashes;
  for (const auto& p : points) hashes.push_back(point_hash(p));
  std::sort(hashes.begin(), hashes.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto v : hashes) h = fnv(h, static_cast<double>(v >> 11));
  return h;
}

OptimizerConfig ExperimentGrid::default_design_config() {
  OptimizerConfig c;
  c.restarts = 4;
  c.refine_schedule = {11, 21, 41};
  return c;
}

ExperimentGrid& ExperimentGrid::full_scale() {
  replicates = 100;
  n_test = 1000;
  return *this;
}

void ExperimentGrid::validate() const {
  if (functions.empty() || designs.empty() || n_values.empty() || models.empty())
    throw ConfigError("experiment grid has an empty axis");
  if (replicates == 0) throw ConfigError("replicates must be at least 1");
  if (n_test == 0) throw ConfigError("n_test must be at least 1");
  if (!(tau >= 1.0)) throw ConfigError("tau must be at least 1");
  if (test_grid_points < 2) throw ConfigError("test measures need at least two grid points");
  for (std::size_t n : n_values)
    if (n < 2) throw ConfigError("design size must be at least 2");
  design_config.validate();
}

double sorted_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CellSummary summarize(std::span<const double> values) {
  CellSummary s;
  std::vector<double> v;
  for (double x : values) {
    if (std::isnan(x))
      ++s.failures;
    else
      v.push_back(x);
  }
  s.count = v.size();
  if (v.empty()) {
    s.min = s.q1 = s.median = s.q3 = s.max = s.whisker_lo = s.whisker_hi = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q1 = sorted_quantile(v, 0.25);
  s.median = sorted_quantile(v, 0.5);
  s.q3 = sorted_quantile(v, 0.75);
  const double iqr = s.q3 - s.q1;
  s.whisker_lo = *std::find_if(v.begin(), v.end(), [&](double x) { return x >= s.q1 - 1.5 * iqr; });
  s.whisker_hi = *std::find_if(v.rbegin(), v.rend(), [&](double x) { return x <= s.q3 + 1.5 * iqr; });
  return s;
}

std::string GridResult::csv() const {
  std::ostringstream os;
  os << "function,design,n,model,replicate,mspe,error\n";
  char buf[40];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.mspe);
    os << to_string(r.function) << ',' << r.design << ',' << r.n << ',' << (r.model == KrigingMode::simple ? "SK" : "UK")
       << ',' << r.replicate << ',' << (r.ok() ? buf : "") << ',' << r.error << '\n';
  }
  return os.str();
}

const CellSummary& GridResult::summary(FunctionId f, const std::string& design, std::size_t n, KrigingMode model) const {
  for (const auto& s : summaries)
    if (s.function == f && s.design == design && s.n == n && s.model == model) return s;
  throw DomainError("no such cell in the grid result");
}

GridResult run_grid(const ExperimentGrid& grid) {
  grid.validate();
  GridResult result;
  const Rng root(grid.seed);

  // Measure designs per (design, n); mixed designs per (design, n, d).
  std::map<std::pair<std::size_t, std::size_t>, MeasureDesign> measure_designs;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> mixed_index;
  for (std::size_t di = 0; di < grid.designs.size(); ++di)
    for (std::size_t n : grid.n_values) {
      OptimizerConfig cfg = grid.design_config;
      cfg.seed = root.fork(10000 + 100 * di + n).next_u64();
      measure_designs.emplace(std::pair{di, n}, maximin_measure_design(n, cfg, grid.designs[di].order, grid.tau));
    }
  std::vector<std::size_t> dims;
  for (FunctionId f : grid.functions) dims.push_back(TestFunction{f}.d());
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  for (std::size_t di = 0; di < grid.designs.size(); ++di)
    for (std::size_t n : grid.n_values)
      for (std::size_t d : dims) {
        const std::uint64_t s = root.fork(20000 + 1000 * d + n).next_u64();
        auto base = euclidean_base_design(n, d, s);
        mixed_index[{di, n, d}] = result.designs.size();
        result.designs.push_back(lh_type_design(std::move(base), measure_designs.at({di, n}), grid.designs[di].order,
                                                grid.permutations, s + di));
      }

  struct Task {
    std::size_t fi, di, ni, mi, rep;
  };
  std::vector<Task> tasks;
  for (std::size_t fi = 0; fi < grid.functions.size(); ++fi)
    for (std::size_t di = 0; di < grid.designs.size(); ++di)
      for (std::size_t ni = 0; ni < grid.n_values.size(); ++ni)
        for (std::size_t mi = 0; mi < grid.models.size(); ++mi)
          for (std::size_t rep = 0; rep < grid.replicates; ++rep) tasks.push_back({fi, di, ni, mi, rep});

  // Constants and test points per (function, replicate).
  std::vector<TestFunction> constants(grid.functions.size() * grid.replicates);
  std::vector<std::vector<MixedPoint>> tests(constants.size());
  parallel_for(constants.size(), [&](std::size_t k) {
    const std::size_t fi = k / grid.replicates, rep = k % grid.replicates;
    Rng rng = root.fork(replicate_stream(grid.functions[fi], rep));
    constants[k] = TestFunction::draw(grid.functions[fi], rng);
    for (std::size_t j = 0; j < grid.n_test; ++j)
      tests[k].push_back(random_mixed_point(rng, constants[k].d(), grid.tau, grid.test_grid_points));
  });
  std::vector<std::uint64_t> test_hashes(tests.size());
  for (std::size_t k = 0; k < tests.size(); ++k) test_hashes[k] = point_set_hash(tests[k]);

  result.rows.resize(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto& task = tasks[t];
    const std::size_t k = task.fi * grid.replicates + task.rep;
    const TestFunction& tf = constants[k];
    const std::size_t n = grid.n_values[task.ni];
    const auto& design = result.designs[mixed_index.at({task.di, n, tf.d()})];
    auto& row = result.rows[t];
    row.function = tf.id;
    row.design = grid.designs[task.di].name;
    row.n = n;
    row.model = grid.models[task.mi];
    row.replicate = task.rep;
    row.test_hash = test_hashes[k];
    try {
      const auto inputs = design.runs();
      Eigen::VectorXd y(static_cast<Eigen::Index>(inputs.size()));
      for (std::size_t i = 0; i < inputs.size(); ++i) y[static_cast<Eigen::Index>(i)] = eval_test_function(tf, inputs[i]);
      FitOptions opt = grid.fit;
      opt.seed = root.fork(30000 + t).next_u64();
      const auto model = GpModel::fit(inputs, y, {row.model, grid.basis_l}, opt);
      if (!interpolates(model)) throw NumericalError("fitted model does not interpolate its training data");
      row.mspe = mspe(model, tf, tests[k]);
    } catch (const std::exception& e) {
      row.mspe = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
      if (row.error.empty()) row.error = "fit failed";
    }
  });

  for (std::size_t fi = 0; fi < grid.functions.size(); ++fi)
    for (std::size_t di = 0; di < grid.designs.size(); ++di)
      for (std::size_t ni = 0; ni < grid.n_values.size(); ++ni)
        for (std::size_t mi = 0; mi < grid.models.size(); ++mi) {
          std::vector<double> values;
          for (const auto& r : result.rows)
            if (r.function == grid.functions[fi] && r.design == grid.designs[di].name && r.n == grid.n_values[ni] &&
                r.model == grid.models[mi])
              values.push_back(r.mspe);
          auto s = summarize(values);
          s.function = grid.functions[fi];
          s.design = grid.designs[di].name;
          s.n = grid.n_values[ni];
          s.model = grid.models[mi];
          result.summaries.push_back(s);
        }
  return result;
}

}  // namespace wassdoe::bench
