#include "wassdoe/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "wassdoe/bench.hpp"
#include "wassdoe/errors.hpp"
#include "wassdoe/io.hpp"
#include "wassdoe/parallel.hpp"

namespace wassdoe::cli {
namespace {

using io::json;

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Everything a subcommand needs besides its own flags.
struct Context {
  std::ostream& out;
  std::ostream& err;
  std::uint64_t seed = 0;
  std::vector<std::string> argv;
  CLI::App* command = nullptr;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  json config() const {
    json c = json::object();
    for (const auto* opt : command->get_options()) {
      if (opt->get_name() == "--help" || opt->count() == 0) continue;
      const auto& r = opt->results();
      c[opt->get_name()] = r.size() == 1 ? json(r.front()) : json(r);
    }
    return c;
  }

  /// Writes an output and its run manifest, both atomically.
  void emit(const std::string& path, const std::string& content) const {
    io::write_atomic(path, content);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const json manifest = io::document("manifest", {{"command", command->get_name()},
                                                    {"argv", argv},
                                                    {"seed", seed},
                                                    {"threads", max_threads()},
                                                    {"config", config()},
                                                    {"output", path},
                                                    {"version", kVersion},
                                                    {"wall_time_s", wall}});
    io::write_atomic(path + ".manifest.json", io::dump(manifest));
  }
};

std::vector<MixedPoint> points_from_document(const json& doc) {
  const auto kind = doc.value("kind", std::string());
  std::vector<MixedPoint> pts;
  if (kind == "mixed-design") {
    io::check_document(doc, kind);
    return io::mixed_design_from_json(doc).runs();
  }
  if (kind == "points" || kind == "training-data") {
    io::check_document(doc, kind);
    const auto& list = doc.at(kind == "points" ? "points" : "inputs");
    for (const auto& p : list) pts.push_back(io::point_from_json(p));
    return pts;
  }
  throw ValidationError("expected a points, training-data or mixed-design document");
}

void check_order(double q, double p) {
  if (!(q >= 1.0 && p >= 1.0)) throw ConfigError("q and p must be at least 1");
}

// ---------------------------------------------------------------------------

struct DesignFlags {
  std::size_t n = 0;
  std::size_t d = 1;
  double tau = 3.0;
  double q = 2.0, p = 2.0;
  std::size_t restarts = 20;
  std::vector<std::size_t> schedule{11, 21, 41};
  double epsilon = 1e-6;
  std::size_t permutations = kDefaultPermutations;
  std::string out, cdf_table;
};

OptimizerConfig optimizer(const DesignFlags& f, std::uint64_t seed) {
  OptimizerConfig c;
  c.seed = seed;
  c.restarts = f.restarts;
  c.refine_schedule = f.schedule;
  c.epsilon = f.epsilon;
  return c;
}

std::string cdf_table(const std::vector<DiscretizedMeasure>& runs) {
  std::ostringstream os;
  os << "run,x,F\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto cum = runs[r].cumulative();
    for (std::size_t k = 0; k < cum.size(); ++k)
      os << r << ',' << number(runs[r].support().to_native(static_cast<double>(k) / static_cast<double>(cum.size() - 1)))
         << ',' << number(cum[k]) << '\n';
  }
  return os.str();
}

void design_measure(const Context& ctx, const DesignFlags& f) {
  check_order(f.q, f.p);
  const auto design = maximin_measure_design(f.n, optimizer(f, ctx.seed), {f.q, f.p}, f.tau);
  ctx.emit(f.out, io::dump(io::document("measure-design", io::to_json(design))));
  if (!f.cdf_table.empty()) ctx.emit(f.cdf_table, cdf_table(design.runs));
  ctx.out << "mdc " << number(design.criterion) << '\n';
}

void design_mixed(const Context& ctx, const DesignFlags& f) {
  check_order(f.q, f.p);
  const Rng root(ctx.seed);
  const auto measures = maximin_measure_design(f.n, optimizer(f, root.fork(1).next_u64()), {f.q, f.p}, f.tau);
  auto base = euclidean_base_design(f.n, f.d, root.fork(2).next_u64());
  const auto design = lh_type_design(std::move(base), measures, {f.q, f.p}, f.permutations, root.fork(3).next_u64());
  ctx.emit(f.out, io::dump(io::document("mixed-design", io::to_json(design))));
  if (!f.cdf_table.empty()) ctx.emit(f.cdf_table, cdf_table(measures.runs));
  ctx.out << "mdc " << number(design.criterion) << '\n';
}

struct GpFlags {
  std::string data, model, at, out;
  std::string mode = "universal";
  std::size_t l = 10;
  std::size_t starts = 10;
  double kappa = 0.1;
};

void gp_fit(const Context& ctx, const GpFlags& f) {
  const auto doc = io::read_json(f.data);
  io::check_document(doc, "training-data");
  const auto inputs = points_from_document(doc);
  const auto y = doc.at("y").get<std::vector<double>>();
  FitOptions opt;
  opt.seed = ctx.seed;
  opt.starts = f.starts;
  const auto model = GpModel::fit(inputs, Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
                                  {kriging_mode_from_string(f.mode), f.l}, opt);
  const double loo = model.loo_mspe();
  auto body = io::to_json(model);
  body["diagnostics"] = {{"loo_mspe", loo}, {"degrees_of_freedom", model.degrees_of_freedom()}};
  ctx.emit(f.out, io::dump(io::document("gp-model", body)));
  ctx.out << "profile_objective " << number(model.profile_objective()) << "\nloo_mspe " << number(loo) << '\n';
}

GpModel load_model(const std::string& path) {
  const auto doc = io::read_json(path);
  io::check_document(doc, "gp-model");
  return io::model_from_json(doc);
}

void gp_predict(const Context& ctx, const GpFlags& f, bool interval) {
  const auto model = load_model(f.model);
  const auto points = points_from_document(io::read_json(f.at));
  json rows = json::array();
  for (const auto& p : points) {
    const double c = model.predict(p);
    if (interval) {
      const auto [lo, hi] = model.predict_interval(p, f.kappa);
      ctx.out << number(lo) << ',' << number(c) << ',' << number(hi) << '\n';
      rows.push_back({{"lo", lo}, {"prediction", c}, {"hi", hi}});
    } else {
      ctx.out << number(c) << '\n';
      rows.push_back(c);
    }
  }
  if (!f.out.empty()) {
    json body = {{"predictions", rows}};
    if (interval) body["kappa"] = f.kappa;
    ctx.emit(f.out, io::dump(io::document(interval ? "gp-intervals" : "gp-predictions", body)));
  }
}

struct BenchFlags {
  std::size_t replicates = 20, n_test = 500, restarts = 4;
  std::vector<std::size_t> n_values{20, 40};
  std::vector<std::string> functions{"I", "II", "III"};
  bool full_scale = false;
  std::string out, summary;
};

void bench_grid(const Context& ctx, const BenchFlags& f) {
  bench::ExperimentGrid g;
  g.seed = ctx.seed;
  g.replicates = f.replicates;
  g.n_test = f.n_test;
  if (f.full_scale) g.full_scale();
  g.n_values = f.n_values;
  g.functions.clear();
  for (const auto& name : f.functions) g.functions.push_back(bench::function_from_string(name));
  g.design_config.restarts = f.restarts;
  const auto result = bench::run_grid(g);
  ctx.emit(f.out, result.csv());
  if (!f.summary.empty()) ctx.emit(f.summary, io::dump(io::document("bench-summary", io::summary_to_json(result))));
  for (const auto& s : result.summaries)
    ctx.out << bench::to_string(s.function) << ' ' << s.design << " n=" << s.n << ' '
            << (s.model == KrigingMode::simple ? "SK" : "UK") << " median " << number(s.median) << " failures "
            << s.failures << '\n';
}

struct MetroFlags {
  std::string scenario, design, points, measure, out, trace;
  double x = -1.0;
  std::size_t replicates = 200;
  std::vector<double> access_support{60.0, 120.0};
};

void metro_response(const Context& ctx, const MetroFlags& f) {
  const auto scenario = f.scenario.empty() ? metro::synthetic_scenario() : io::scenario_from_json(io::read_json(f.scenario));
  if (f.access_support.size() != 2 || !(f.access_support[0] <= f.access_support[1]))
    throw ConfigError("--access-support takes lo,hi with lo <= hi");
  const SupportMap native{f.access_support[0], f.access_support[1]};

  std::vector<MixedPoint> points;
  if (!f.design.empty() || !f.points.empty()) {
    if (!f.measure.empty() || f.x >= 0.0) throw ConfigError("give either a point set or --x with --measure, not both");
    points = points_from_document(io::read_json(f.design.empty() ? f.points : f.design));
  } else {
    if (f.measure.empty() || f.x < 0.0) throw ConfigError("metro-response needs --design, --points or --x with --measure");
    auto mdoc = io::read_json(f.measure);
    io::check_document(mdoc, "measure");
    points.emplace_back(std::vector<double>{f.x}, io::measure_from_json(mdoc));
  }

  json inputs = json::array(), ys = json::array(), details = json::array();
  const Rng root(ctx.seed);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    if (p.dim() != 1) throw ValidationError("metro inputs have one Euclidean coordinate (x)");
    const auto access = p.mu.support() == SupportMap{} ? p.mu.with_support(native) : p.mu;
    const auto r = metro::response(scenario, p.x[0], access, f.replicates, root.fork(k).next_u64());
    inputs.push_back(io::to_json(p));
    ys.push_back(r.mean_travel_time);
    details.push_back({{"mean_travel_time", r.mean_travel_time},
                       {"standard_error", r.standard_error},
                       {"served", r.served},
                       {"unserved", r.unserved},
                       {"replicates", r.replicates}});
    ctx.out << number(r.mean_travel_time) << '\n';
    if (k == 0 && !f.trace.empty()) {
      auto sc = scenario;
      sc.boarding_x[0] = p.x[0];
      sc.access_measure[0] = access;
      ctx.emit(f.trace, metro::trace_csv(metro::simulate(sc, root.fork(k).next_u64())));
    }
  }
  ctx.emit(f.out, io::dump(io::document("training-data", {{"inputs", inputs},
                                                          {"y", ys},
                                                          {"responses", details},
                                                          {"units", "minutes"}})));
}

struct DistanceFlags {
  std::string a, b;
  double q = 2.0, p = 2.0;
};

void distance(const Context& ctx, const DistanceFlags& f) {
  check_order(f.q, f.p);
  auto load = [](const std::string& path) {
    const auto doc = io::read_json(path);
    io::check_document(doc, "measure");
    return io::measure_from_json(doc);
  };
  ctx.out << number(measure_distance(load(f.a), load(f.b), {f.q, f.p})) << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Space-filling designs and Gaussian-process surrogates with distribution inputs", "wassdoe"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--threads", threads, "Worker cap (default: WASSDOE_THREADS or all cores)");

  DesignFlags dm, dx;
  auto add_design = [](CLI::App* c, DesignFlags& f) {
    c->add_option("--n", f.n, "Number of runs")->required()->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
    c->add_option("--tau", f.tau, "Lipschitz cap of the CDFs")->capture_default_str()->check(CLI::Range(1.0, 1e9));
    c->add_option("--q", f.q, "Ground-cost exponent")->capture_default_str();
    c->add_option("--p", f.p, "Norm order")->capture_default_str();
    c->add_option("--restarts", f.restarts, "Random starts at the first grid size")->capture_default_str();
    c->add_option("--schedule", f.schedule, "Grid sizes m, each 2(previous) - 1")->delimiter(',')->capture_default_str();
    c->add_option("--epsilon", f.epsilon, "Sweep stopping tolerance")->capture_default_str();
    c->add_option("--out", f.out, "Output JSON")->required();
    c->add_option("--cdf-table", f.cdf_table, "Optional CSV of run CDFs at the grid points");
  };
  auto* c_dm = app.add_subcommand("design-measure", "Maximin design of distribution inputs");
  add_design(c_dm, dm);
  auto* c_dx = app.add_subcommand("design-mixed", "LH-type design of Euclidean and distribution inputs");
  add_design(c_dx, dx);
  c_dx->add_option("--d", dx.d, "Euclidean dimension")->capture_default_str()->check(CLI::Range(std::size_t{1}, std::size_t{1000}));
  c_dx->add_option("--permutations", dx.permutations, "Random pairings tried when n > 8")->capture_default_str();

  GpFlags gf, gpred, gint;
  auto* c_fit = app.add_subcommand("gp-fit", "Fit a Gaussian-process model");
  c_fit->add_option("--data", gf.data, "Training-data JSON")->required();
  c_fit->add_option("--mode", gf.mode, "simple or universal")->capture_default_str();
  c_fit->add_option("--l", gf.l, "Number of Chebyshev knots")->capture_default_str();
  c_fit->add_option("--starts", gf.starts, "Nelder-Mead starts")->capture_default_str();
  c_fit->add_option("--out", gf.out, "Model JSON")->required();
  auto* c_pred = app.add_subcommand("gp-predict", "Predict with a fitted model");
  c_pred->add_option("--model", gpred.model, "Model JSON")->required();
  c_pred->add_option("--at", gpred.at, "Points, training-data or mixed-design JSON")->required();
  c_pred->add_option("--out", gpred.out, "Optional predictions JSON");
  auto* c_int = app.add_subcommand("gp-interval", "Prediction intervals");
  c_int->add_option("--model", gint.model, "Model JSON")->required();
  c_int->add_option("--at", gint.at, "Points, training-data or mixed-design JSON")->required();
  c_int->add_option("--kappa", gint.kappa, "Intervals have level 1 - kappa")->capture_default_str();
  c_int->add_option("--out", gint.out, "Optional intervals JSON");

  BenchFlags bf;
  auto* c_bench = app.add_subcommand("bench", "Test-function benchmark grid");
  c_bench->add_option("--replicates", bf.replicates)->capture_default_str();
  c_bench->add_option("--n-test", bf.n_test, "Test points per replicate")->capture_default_str();
  c_bench->add_option("--n", bf.n_values, "Design sizes")->delimiter(',')->capture_default_str();
  c_bench->add_option("--functions", bf.functions, "Subset of I,II,III")->delimiter(',')->capture_default_str();
  c_bench->add_option("--design-restarts", bf.restarts)->capture_default_str();
  c_bench->add_flag("--full-scale", bf.full_scale, "100 replicates and 1000 test points");
  c_bench->add_option("--out", bf.out, "Result CSV")->required();
  c_bench->add_option("--summary", bf.summary, "Box-plot summary JSON");

  MetroFlags mf;
  auto* c_metro = app.add_subcommand("metro-response", "Simulated mean travel time at design points");
  c_metro->add_option("--scenario", mf.scenario, "Scenario JSON (default: synthetic line)");
  c_metro->add_option("--design", mf.design, "Mixed-design JSON with d = 1");
  c_metro->add_option("--points", mf.points, "Points or training-data JSON");
  c_metro->add_option("--x", mf.x, "Boarding parameter for a single point")->check(CLI::Range(0.0, 1.0));
  c_metro->add_option("--measure", mf.measure, "Access-time measure JSON for a single point");
  c_metro->add_option("--replicates", mf.replicates)->capture_default_str()->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
  c_metro->add_option("--access-support", mf.access_support, "Seconds that canonical measures map to")->delimiter(',')->capture_default_str();
  c_metro->add_option("--trace", mf.trace, "Per-passenger CSV of one run at the first point");
  c_metro->add_option("--out", mf.out, "Training-data JSON")->required();

  DistanceFlags df;
  auto* c_dist = app.add_subcommand("distance", "Wasserstein distance between two measures");
  c_dist->add_option("--a", df.a)->required();
  c_dist->add_option("--b", df.b)->required();
  c_dist->add_option("--q", df.q)->capture_default_str();
  c_dist->add_option("--p", df.p)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context ctx{out, err, seed, std::vector<std::string>(argv, argv + argc), app.get_subcommands().front()};
  const auto name = ctx.command->get_name();
  try {
    if (app.count("--threads")) set_max_threads(threads);
    if (name == "design-measure") design_measure(ctx, dm);
    else if (name == "design-mixed") design_mixed(ctx, dx);
    else if (name == "gp-fit") gp_fit(ctx, gf);
    else if (name == "gp-predict") gp_predict(ctx, gpred, false);
    else if (name == "gp-interval") gp_predict(ctx, gint, true);
    else if (name == "bench") bench_grid(ctx, bf);
    else if (name == "metro-response") metro_response(ctx, mf);
    else if (name == "distance") distance(ctx, df);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const io::json::exception& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace wassdoe::cli
