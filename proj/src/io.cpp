#include "wassdoe/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "wassdoe/errors.hpp"

namespace wassdoe::io {
namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd eigen_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> seconds(const std::vector<metro::Millis>& t) {
  std::vector<double> out;
  for (auto v : t) out.push_back(metro::millis_to_seconds(v));
  return out;
}

std::vector<metro::Millis> millis(const std::vector<double>& s) {
  std::vector<metro::Millis> out;
  for (double v : s) {
    if (!std::isfinite(v)) throw ValidationError("non-finite time in scenario");
    out.push_back(metro::seconds_to_millis(v));
  }
  return out;
}

}  // namespace

json document(const std::string& kind, json body) {
  body["schema"] = kSchemaVersion;
  body["kind"] = kind;
  return body;
}

void check_document(const json& j, const std::string& kind) {
  if (get<int>(j, "schema") != kSchemaVersion) throw ValidationError("unsupported schema version");
  const auto found = get<std::string>(j, "kind");
  if (found != kind) throw ValidationError("expected a '" + kind + "' document, found '" + found + "'");
}

json to_json(const DiscretizedMeasure& mu) {
  return {{"m", mu.grid_points()},
          {"tau", mu.tau()},
          {"increments", std::vector<double>(mu.increments().begin(), mu.increments().end())},
          {"support", {mu.support().lo, mu.support().hi}}};
}

DiscretizedMeasure measure_from_json(const json& j) {
  auto inc = get<std::vector<double>>(j, "increments");
  if (j.contains("m") && get<std::size_t>(j, "m") != inc.size() + 1)
    throw ValidationError("measure 'm' does not match the increment count");
  SupportMap support;
  if (j.contains("support")) {
    const auto s = get<std::vector<double>>(j, "support");
    if (s.size() != 2) throw ValidationError("measure support must be [lo, hi]");
    if (!(s[0] <= s[1])) throw ValidationError("measure support must satisfy lo <= hi");
    support = {s[0], s[1]};
  }
  return DiscretizedMeasure(std::move(inc), get<double>(j, "tau"), support);
}

json to_json(const MixedPoint& p) { return {{"x", p.x}, {"measure", to_json(p.mu)}}; }

MixedPoint point_from_json(const json& j) {
  return {get<std::vector<double>>(j, "x"), measure_from_json(field(j, "measure"))};
}

json to_json(const WassersteinOrder& order) { return {{"q", order.q}, {"p", order.p}}; }

WassersteinOrder order_from_json(const json& j) { return {get<double>(j, "q"), get<double>(j, "p")}; }

json to_json(const MeasureDesign& design) {
  json runs = json::array(), trace = json::array();
  for (const auto& mu : design.runs) runs.push_back(to_json(mu));
  for (const auto& t : design.trace) trace.push_back({{"stage", t.stage}, {"m", t.m}, {"sweep", t.sweep}, {"xi", t.xi}});
  return {{"order", to_json(design.order)}, {"tau", design.tau},     {"runs", runs},
          {"criterion", design.criterion},  {"trace", trace},        {"iteration_limit", design.iteration_limit}};
}

MeasureDesign measure_design_from_json(const json& j) {
  MeasureDesign d{{}, order_from_json(field(j, "order")), get<double>(j, "tau"), 0.0, {}, false};
  for (const auto& r : field(j, "runs")) d.runs.push_back(measure_from_json(r));
  d.criterion = get<double>(j, "criterion");
  if (j.contains("trace"))
    for (const auto& t : j.at("trace"))
      d.trace.push_back({get<std::size_t>(t, "stage"), get<std::size_t>(t, "m"), get<std::size_t>(t, "sweep"),
                         get<double>(t, "xi")});
  d.iteration_limit = get_or<bool>(j, "iteration_limit", false);
  return d;
}

json to_json(const MixedDesign& design) {
  json runs = json::array();
  for (const auto& p : design.runs()) runs.push_back(to_json(p));
  return {{"order", to_json(design.order)},
          {"tau", design.base_measures.tau},
          {"runs", runs},
          {"permutation", design.permutation},
          {"criterion", design.criterion},
          {"base_euclidean", design.base_euclidean},
          {"base_measures", to_json(design.base_measures)}};
}

MixedDesign mixed_design_from_json(const json& j) {
  MixedDesign d{get<std::vector<std::vector<double>>>(j, "base_euclidean"),
                measure_design_from_json(field(j, "base_measures")),
                get<std::vector<std::size_t>>(j, "permutation"),
                order_from_json(field(j, "order"))};
  d.criterion = get<double>(j, "criterion");
  const std::size_t n = d.base_euclidean.size();
  if (d.permutation.size() != n || d.base_measures.runs.size() != n)
    throw ValidationError("mixed design parts have different run counts");
  std::vector<bool> seen(n, false);
  for (auto k : d.permutation) {
    if (k >= n || seen[k]) throw ValidationError("permutation is not a permutation of 0..n-1");
    seen[k] = true;
  }
  return d;
}

json to_json(const GpModel& model) {
  json inputs = json::array();
  for (const auto& p : model.inputs()) inputs.push_back(to_json(p));
  return {{"mode", to_string(model.basis().mode)},
          {"d", model.d()},
          {"l", model.basis().l},
          {"knots", model.basis().knots()},
          {"theta", model.kernel().theta},
          {"psi", vec(model.psi())},
          {"sigma2", model.sigma2()},
          {"nugget", model.nugget()},
          {"profile_objective", model.profile_objective()},
          {"training", {{"inputs", inputs}, {"y", vec(model.y())}}}};
}

GpModel model_from_json(const json& j) {
  BasisConfig basis{kriging_mode_from_string(get<std::string>(j, "mode")), get<std::size_t>(j, "l")};
  if (j.contains("knots")) {
    const auto knots = get<std::vector<double>>(j, "knots");
    const auto expected = basis.knots();
    if (knots.size() != expected.size()) throw ValidationError("knot count does not match l");
    for (std::size_t k = 0; k < knots.size(); ++k)
      if (std::abs(knots[k] - expected[k]) > 1e-12) throw ValidationError("knots are not the Chebyshev nodes for l");
  }
  const auto& training = field(j, "training");
  std::vector<MixedPoint> inputs;
  for (const auto& p : field(training, "inputs")) inputs.push_back(point_from_json(p));
  const auto y = get<std::vector<double>>(training, "y");
  KernelConfig kernel{get<std::vector<double>>(j, "theta")};
  if (j.contains("d") && get<std::size_t>(j, "d") != kernel.d()) throw ValidationError("'d' does not match theta");
  try {
    kernel.validate();
  } catch (const ConfigError& e) {
    throw ValidationError(e.what());
  }
  return GpModel::from_parts(std::move(inputs), eigen_vec(y), basis, kernel, eigen_vec(get<std::vector<double>>(j, "psi")),
                             get<double>(j, "sigma2"), get<double>(j, "nugget"));
}

json to_json(const metro::MetroScenario& sc) {
  json trains = json::array(), demand = json::array(), access = json::array(), egress = json::array();
  for (const auto& t : sc.trains) trains.push_back({{"arrival", seconds(t.arrival)}, {"departure", seconds(t.departure)}});
  for (const auto& d : sc.demand)
    demand.push_back({{"origin", d.origin}, {"destination", d.destination}, {"tap_in", metro::millis_to_seconds(d.tap_in)}});
  for (const auto& m : sc.access_measure) access.push_back(to_json(m));
  for (const auto& m : sc.egress_measure) egress.push_back(to_json(m));
  json j = {{"stations", sc.stations},         {"trains", trains},          {"demand", demand},
            {"boarding_x", sc.boarding_x},     {"access_measures", access}, {"egress_measures", egress}};
  j["capacity"] = sc.capacity >= metro::kUnlimitedCapacity ? json(nullptr) : json(sc.capacity);
  return j;
}

metro::SyntheticOptions synthetic_options_from_json(const json& j) {
  metro::SyntheticOptions o;
  o.stations = get_or(j, "stations", o.stations);
  o.trains = get_or(j, "trains", o.trains);
  o.passengers = get_or(j, "passengers", o.passengers);
  o.headway_s = get_or(j, "headway_s", o.headway_s);
  o.run_time_s = get_or(j, "run_time_s", o.run_time_s);
  o.dwell_s = get_or(j, "dwell_s", o.dwell_s);
  o.capacity = get_or(j, "capacity", o.capacity);
  o.first_station_share = get_or(j, "first_station_share", o.first_station_share);
  o.peak_fraction = get_or(j, "peak_fraction", o.peak_fraction);
  o.peak_width_fraction = get_or(j, "peak_width_fraction", o.peak_width_fraction);
  o.peak_ratio = get_or(j, "peak_ratio", o.peak_ratio);
  o.x = get_or(j, "x", o.x);
  o.seed = get_or(j, "seed", o.seed);
  return o;
}

metro::MetroScenario scenario_from_json(const json& j) {
  if (j.contains("synthetic")) {
    try {
      return metro::synthetic_scenario(synthetic_options_from_json(j.at("synthetic")));
    } catch (const ConfigError& e) {
      throw ValidationError(e.what());
    }
  }
  metro::MetroScenario sc;
  sc.stations = get<std::vector<std::string>>(j, "stations");
  for (const auto& t : field(j, "trains"))
    sc.trains.push_back({millis(get<std::vector<double>>(t, "arrival")), millis(get<std::vector<double>>(t, "departure"))});
  for (const auto& d : field(j, "demand")) {
    const auto tap = get<double>(d, "tap_in");
    if (!std::isfinite(tap)) throw ValidationError("non-finite tap-in time");
    sc.demand.push_back({get<std::size_t>(d, "origin"), get<std::size_t>(d, "destination"), metro::seconds_to_millis(tap)});
  }
  sc.boarding_x = get<std::vector<double>>(j, "boarding_x");
  for (const auto& m : field(j, "access_measures")) sc.access_measure.push_back(measure_from_json(m));
  for (const auto& m : field(j, "egress_measures")) sc.egress_measure.push_back(measure_from_json(m));
  const auto& cap = field(j, "capacity");
  sc.capacity = cap.is_null() ? metro::kUnlimitedCapacity : get<std::int64_t>(j, "capacity");
  sc.validate();
  return sc;
}

json to_json(const bench::CellSummary& s) {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return {{"function", bench::to_string(s.function)},
          {"design", s.design},
          {"n", s.n},
          {"model", s.model == KrigingMode::simple ? "SK" : "UK"},
          {"count", s.count},
          {"failures", s.failures},
          {"min", num(s.min)},
          {"q1", num(s.q1)},
          {"median", num(s.median)},
          {"q3", num(s.q3)},
          {"max", num(s.max)},
          {"whisker_lo", num(s.whisker_lo)},
          {"whisker_hi", num(s.whisker_hi)}};
}

json summary_to_json(const bench::GridResult& result) {
  json cells = json::array();
  for (const auto& s : result.summaries) cells.push_back(to_json(s));
  return {{"cells", cells}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move output into place at '" + path.string() + "': " + ec.message());
  }
}

}  // namespace wassdoe::io
