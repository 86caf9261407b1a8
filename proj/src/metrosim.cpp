#include "wassdoe/metrosim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "wassdoe/errors.hpp"
#include "wassdoe/parallel.hpp"
#include "wassdoe/rng.hpp"

namespace wassdoe::metro {
namespace {

constexpr double kMillisPerMinute = 60000.0;

enum Stream : std::uint64_t { kAccessStream = 1, kEgressStream = 2, kBoardingStream = 3 };

Millis draw_millis(const DiscretizedMeasure& mu, Rng& rng) {
  return seconds_to_millis(mu.quantile_native(rng.uniform_open_closed()));
}

std::string seconds_text(Millis t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(t / 1000), static_cast<long long>(std::llabs(t % 1000)));
  if (t < 0 && t > -1000) return "-" + std::string(buf);
  return buf;
}

}  // namespace

void MetroScenario::validate() const {
  const std::size_t s = station_count();
  if (s < 2) throw ValidationError("a line needs at least two stations");
  if (capacity < 0) throw ValidationError("train capacity must be nonnegative");
  if (boarding_x.size() != s || access_measure.size() != s || egress_measure.size() != s)
    throw ValidationError("boarding_x, access and egress measures are needed for every station");
  for (double x : boarding_x)
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("boarding parameter x must lie in [0, 1]");
  for (std::size_t t = 0; t < trains.size(); ++t) {
    const auto& tr = trains[t];
    if (tr.arrival.size() != s || tr.departure.size() != s)
      throw ValidationError("train " + std::to_string(t) + " must list every station");
    for (std::size_t k = 0; k < s; ++k) {
      if (tr.departure[k] < tr.arrival[k]) throw ValidationError("train departs before it arrives");
      if (k + 1 < s && tr.arrival[k + 1] < tr.departure[k]) throw ValidationError("schedule is not monotone along the line");
      if (t > 0 && tr.departure[k] < trains[t - 1].departure[k])
        throw ValidationError("trains overtake each other; list them in service order");
    }
  }
  for (const auto& trip : demand)
    if (!(trip.origin < trip.destination && trip.destination < s))
      throw ValidationError("every trip needs origin < destination on the line");
}

double boarding_probability(double rho, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("boarding parameter x must lie in [0, 1]");
  if (!(rho >= 0.0)) throw DomainError("boarding ratio rho must be nonnegative");
  if (x == 0.0) return rho >= 1.0 ? 1.0 : 0.0;
  if (rho < 1.0 - x / 2.0) return 0.0;
  if (rho > 1.0 + x / 2.0) return 1.0;
  return (rho - 1.0 + x / 2.0) / x;
}

SimulationResult simulate(const MetroScenario& scenario, std::uint64_t seed) {
  scenario.validate();
  const std::size_t s_count = scenario.station_count();
  const Rng root(seed);
  Rng access_rng = root.fork(kAccessStream), egress_rng = root.fork(kEgressStream),
      boarding_rng = root.fork(kBoardingStream);

  SimulationResult out;
  out.passengers.resize(scenario.demand.size());
  std::vector<std::vector<std::size_t>> arrivals(s_count);
  for (std::size_t id = 0; id < scenario.demand.size(); ++id) {
    const auto& trip = scenario.demand[id];
    auto& rec = out.passengers[id];
    rec.id = id;
    rec.origin = trip.origin;
    rec.destination = trip.destination;
    rec.tap_in = trip.tap_in;
    rec.access = draw_millis(scenario.access_measure[trip.origin], access_rng);
    rec.egress = draw_millis(scenario.egress_measure[trip.destination], egress_rng);
    rec.platform_arrival = rec.tap_in + rec.access;
    arrivals[trip.origin].push_back(id);
  }
  for (auto& list : arrivals)
    std::stable_sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      return out.passengers[a].platform_arrival < out.passengers[b].platform_arrival;
    });

  std::vector<std::size_t> next_arrival(s_count, 0);
  std::vector<std::vector<std::size_t>> waiting(s_count);
  out.boarded.assign(scenario.trains.size(), std::vector<std::size_t>(s_count * s_count, 0));
  out.alighted.assign(scenario.trains.size(), std::vector<std::size_t>(s_count * s_count, 0));

  for (std::size_t t = 0; t < scenario.trains.size(); ++t) {
    const auto& train = scenario.trains[t];
    std::vector<std::vector<std::size_t>> riders(s_count);
    std::int64_t load = 0;
    for (std::size_t st = 0; st < s_count; ++st) {
      for (std::size_t id : riders[st]) {
        auto& rec = out.passengers[id];
        rec.on_board = train.arrival[st] - train.departure[rec.origin];
        rec.tap_out = train.arrival[st] + rec.egress;
        ++out.alighted[t][rec.origin * s_count + st];
        --load;
      }
      riders[st].clear();

      const Millis departs = train.departure[st];
      auto& queue = waiting[st];
      const auto& order = arrivals[st];
      while (next_arrival[st] < order.size() && out.passengers[order[next_arrival[st]]].platform_arrival <= departs)
        queue.push_back(order[next_arrival[st]++]);

      std::vector<std::size_t> left_behind;
      std::size_t ahead = 0;
      for (std::size_t id : queue) {
        const std::int64_t room = scenario.capacity - load;
        double p = 0.0;
        if (room >= 1) p = ahead == 0 ? 1.0 : boarding_probability(static_cast<double>(room) / static_cast<double>(ahead), scenario.boarding_x[st]);
        const bool boards = p >= 1.0 || (p > 0.0 && boarding_rng.uniform() < p);
        ++ahead;
        if (!boards) {
          left_behind.push_back(id);
          continue;
        }
        auto& rec = out.passengers[id];
        rec.boarding_train = t;
        rec.wait = departs - rec.platform_arrival;
        riders[rec.destination].push_back(id);
        ++out.boarded[t][st * s_count + rec.destination];
        ++load;
        if (load > scenario.capacity) throw NumericalError("train load exceeded capacity");
        out.peak_load = std::max(out.peak_load, load);
      }
      queue = std::move(left_behind);
    }
  }
  out.unserved = static_cast<std::size_t>(
      std::count_if(out.passengers.begin(), out.passengers.end(), [](const PassengerRecord& r) { return !r.served(); }));
  return out;
}

ResponseResult response(MetroScenario scenario, double x, const DiscretizedMeasure& mu, std::size_t replicates,
                        std::uint64_t seed) {
  if (replicates == 0) throw DomainError("response needs at least one replicate");
  if (scenario.station_count() < 2) throw ValidationError("a line needs at least two stations");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("boarding parameter x must lie in [0, 1]");
  scenario.boarding_x.at(0) = x;
  scenario.access_measure.at(0) = mu;
  scenario.validate();
  if (std::none_of(scenario.demand.begin(), scenario.demand.end(), [](const Trip& t) { return t.origin == 0; }))
    throw DomainError("no passenger taps in at the first station");

  std::vector<double> sums(replicates, 0.0);
  std::vector<std::size_t> served(replicates, 0), unserved(replicates, 0);
  const Rng root(seed);
  parallel_for(replicates, [&](std::size_t r) {
    const auto sim = simulate(scenario, root.fork(r).next_u64());
    Millis total = 0;
    for (const auto& rec : sim.passengers) {
      if (rec.origin != 0) continue;
      if (!rec.served()) {
        ++unserved[r];
        continue;
      }
      total += rec.travel_time();
      ++served[r];
    }
    sums[r] = static_cast<double>(total) / kMillisPerMinute;
  });

  ResponseResult res;
  res.replicates = replicates;
  res.served = std::accumulate(served.begin(), served.end(), std::size_t{0});
  res.unserved = std::accumulate(unserved.begin(), unserved.end(), std::size_t{0});
  if (res.served == 0) throw DomainError("no first-station passenger was served");
  res.mean_travel_time = std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(res.served);
  if (replicates > 1) {
    std::vector<double> means(replicates);
    for (std::size_t r = 0; r < replicates; ++r) means[r] = served[r] ? sums[r] / static_cast<double>(served[r]) : 0.0;
    const double avg = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(replicates);
    double ss = 0.0;
    for (double m : means) ss += (m - avg) * (m - avg);
    res.standard_error = std::sqrt(ss / static_cast<double>(replicates - 1) / static_cast<double>(replicates));
  }
  return res;
}

DiscretizedMeasure default_access_measure(std::size_t m, double tau) {
  return DiscretizedMeasure::uniform(m, tau, {60.0, 120.0});
}

MetroScenario synthetic_scenario(const SyntheticOptions& o) {
  if (o.stations < 2) throw ConfigError("synthetic line needs at least two stations");
  if (o.trains == 0) throw ConfigError("synthetic line needs at least one train");
  if (!(o.first_station_share >= 0.0 && o.first_station_share <= 1.0))
    throw ConfigError("first_station_share must lie in [0, 1]");
  if (!(o.headway_s > 0.0 && o.run_time_s > 0.0 && o.dwell_s >= 0.0)) throw ConfigError("invalid timetable spacing");
  if (!(o.peak_ratio >= 1.0 && o.peak_width_fraction > 0.0)) throw ConfigError("invalid demand peak");

  MetroScenario sc;
  sc.capacity = o.capacity;
  for (std::size_t k = 0; k < o.stations; ++k) sc.stations.push_back("S" + std::to_string(k + 1));
  const Millis first_departure = seconds_to_millis(o.headway_s * 2.0);
  for (std::size_t t = 0; t < o.trains; ++t) {
    Train tr;
    Millis clock = first_departure + seconds_to_millis(o.headway_s * static_cast<double>(t)) - seconds_to_millis(o.dwell_s);
    for (std::size_t k = 0; k < o.stations; ++k) {
      tr.arrival.push_back(clock);
      clock += seconds_to_millis(o.dwell_s);
      tr.departure.push_back(clock);
      clock += seconds_to_millis(o.run_time_s);
    }
    sc.trains.push_back(std::move(tr));
  }
  sc.boarding_x.assign(o.stations, o.x);
  sc.access_measure.assign(o.stations, default_access_measure());
  sc.egress_measure.assign(o.stations, DiscretizedMeasure::uniform(41, 3.0, {30.0, 90.0}));

  // Tap-ins over the span the timetable can absorb, thinned against a
  // Gaussian bump on a flat base.
  Rng rng(o.seed);
  const double span = o.headway_s * static_cast<double>(o.trains);
  const double peak = o.peak_fraction * span, width = o.peak_width_fraction * span;
  while (sc.demand.size() < o.passengers) {
    const double t = rng.uniform(0.0, span);
    const double z = (t - peak) / width;
    const double intensity = (1.0 + (o.peak_ratio - 1.0) * std::exp(-0.5 * z * z)) / o.peak_ratio;
    if (rng.uniform() >= intensity) continue;
    Trip trip;
    trip.tap_in = seconds_to_millis(t);
    trip.origin = rng.uniform() < o.first_station_share ? 0 : 1 + rng.below(o.stations - 2);
    trip.destination = trip.origin + 1 + rng.below(o.stations - 1 - trip.origin);
    sc.demand.push_back(trip);
  }
  std::stable_sort(sc.demand.begin(), sc.demand.end(), [](const Trip& a, const Trip& b) { return a.tap_in < b.tap_in; });
  sc.validate();
  return sc;
}

std::string trace_csv(const SimulationResult& result) {
  std::ostringstream os;
  os << "id,origin,destination,tap_in,platform_arrival,boarding_train,tap_out,access,wait,on_board,egress,served\n";
  for (const auto& r : result.passengers) {
    os << r.id << ',' << r.origin << ',' << r.destination << ',' << seconds_text(r.tap_in) << ','
       << seconds_text(r.platform_arrival) << ',';
    if (r.served())
      os << r.boarding_train << ',' << seconds_text(r.tap_out) << ',' << seconds_text(r.access) << ','
         << seconds_text(r.wait) << ',' << seconds_text(r.on_board) << ',' << seconds_text(r.egress) << ",1\n";
    else
      os << ",," << seconds_text(r.access) << ",,,,0\n";
  }
  return os.str();
}

}  // namespace wassdoe::metro
