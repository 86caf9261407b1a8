#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wassdoe/errors.hpp"
#include "wassdoe/metrosim.hpp"
#include "wassdoe/rng.hpp"

using namespace wassdoe;
using namespace wassdoe::metro;

namespace {

DiscretizedMeasure point_mass(double seconds) { return DiscretizedMeasure({1.0}, 1.0, {seconds, seconds}); }

MetroScenario two_station_line() {
  MetroScenario sc;
  sc.stations = {"A", "B"};
  sc.trains.push_back({{100000, 300000}, {130000, 330000}});
  sc.boarding_x = {0.0, 0.0};
  sc.access_measure = {point_mass(90.0), point_mass(90.0)};
  sc.egress_measure = {point_mass(45.0), point_mass(45.0)};
  return sc;
}

void check_invariants(const MetroScenario& sc, const SimulationResult& sim) {
  REQUIRE(sim.passengers.size() == sc.demand.size());
  CHECK(sim.peak_load <= sc.capacity);
  std::size_t unserved = 0;
  for (const auto& r : sim.passengers) {
    if (!r.served()) {
      ++unserved;
      continue;
    }
    const auto& train = sc.trains[r.boarding_train];
    CHECK(r.tap_out == r.tap_in + r.access + r.wait + r.on_board + r.egress);
    CHECK(r.wait >= 0);
    CHECK(train.departure[r.origin] >= r.platform_arrival);
    CHECK(r.wait == train.departure[r.origin] - r.platform_arrival);
    CHECK(r.on_board == train.arrival[r.destination] - train.departure[r.origin]);
    CHECK(r.tap_out - r.egress == train.arrival[r.destination]);
  }
  CHECK(unserved == sim.unserved);
  for (std::size_t t = 0; t < sc.trains.size(); ++t) CHECK(sim.boarded[t] == sim.alighted[t]);
}

}  // namespace

TEST_CASE("boarding probability branches") {
  for (double x : {0.1, 0.4, 1.0}) CHECK(boarding_probability(1.0, x) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(boarding_probability(0.5, 0.4) == 0.0);
  CHECK(boarding_probability(1.1, 0.4) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(boarding_probability(1.3, 0.4) == 1.0);
  CHECK(boarding_probability(5.0, 1.0) == 1.0);
  CHECK(boarding_probability(0.0, 0.7) == 0.0);
  CHECK(boarding_probability(0.999, 0.0) == 0.0);
  CHECK(boarding_probability(1.0, 0.0) == 1.0);
  CHECK_THROWS_AS(boarding_probability(1.0, -0.1), DomainError);
  CHECK_THROWS_AS(boarding_probability(1.0, 1.5), DomainError);
  CHECK_THROWS_AS(boarding_probability(-1.0, 0.5), DomainError);
}

TEST_CASE("single passenger hand trace") {
  auto sc = two_station_line();
  sc.demand.push_back({0, 1, 0});
  const auto sim = simulate(sc, 1);
  const auto& r = sim.passengers.at(0);
  CHECK(r.platform_arrival == 90000);
  CHECK(r.boarding_train == 0);
  CHECK(r.wait == 40000);
  CHECK(r.on_board == 170000);
  CHECK(r.tap_out == 345000);
  CHECK(r.travel_time() == 90000 + 40000 + 170000 + 45000);

  // Reaching the platform after departure leaves the passenger unserved.
  sc.demand[0].tap_in = 50000;
  const auto late = simulate(sc, 1);
  CHECK(!late.passengers[0].served());
  CHECK(late.unserved == 1);

  const auto csv = trace_csv(sim);
  CHECK(csv.find("0,0,1,0.000,90.000,0,345.000,90.000,40.000,170.000,45.000,1") != std::string::npos);
}

TEST_CASE("deterministic limit matches the timetable") {
  SyntheticOptions o;
  o.x = 0.0;
  o.capacity = kUnlimitedCapacity;
  auto sc = synthetic_scenario(o);
  for (std::size_t k = 0; k < sc.station_count(); ++k) {
    sc.access_measure[k] = point_mass(75.0 + 5.0 * static_cast<double>(k));
    sc.egress_measure[k] = point_mass(40.0 + static_cast<double>(k));
  }
  const auto a = simulate(sc, 1), b = simulate(sc, 999);
  check_invariants(sc, a);
  double total = 0.0;
  std::size_t count = 0, reachable = 0;
  for (std::size_t id = 0; id < sc.demand.size(); ++id) {
    const auto& trip = sc.demand[id];
    const Millis platform = trip.tap_in + seconds_to_millis(75.0 + 5.0 * static_cast<double>(trip.origin));
    // First train leaving the origin at or after the platform arrival.
    std::size_t first = kNoTrain;
    for (std::size_t t = 0; t < sc.trains.size() && first == kNoTrain; ++t)
      if (sc.trains[t].departure[trip.origin] >= platform) first = t;
    const auto& r = a.passengers[id];
    CHECK(r.boarding_train == first);
    CHECK(b.passengers[id].tap_out == r.tap_out);
    if (first == kNoTrain) continue;
    ++reachable;
    const Millis expected = sc.trains[first].arrival[trip.destination] +
                            seconds_to_millis(40.0 + static_cast<double>(trip.destination)) - trip.tap_in;
    CHECK(r.travel_time() == expected);
    if (trip.origin == 0) {
      total += static_cast<double>(expected) / 60000.0;
      ++count;
    }
  }
  CHECK(reachable > 0);
  const auto res = response(sc, 0.0, point_mass(75.0), 3, 17);
  CHECK(res.mean_travel_time == doctest::Approx(total / static_cast<double>(count)).epsilon(1e-12));
  CHECK(res.standard_error == 0.0);
}

TEST_CASE("phase sums, capacity and conservation across seeded scenarios") {
  Rng rng(12);
  for (int k = 0; k < 50; ++k) {
    SyntheticOptions o;
    o.seed = 300 + static_cast<std::uint64_t>(k);
    o.capacity = 20 + static_cast<std::int64_t>(rng.below(150));
    o.x = rng.uniform();
    o.passengers = 1500;
    o.trains = 30;
    const auto sc = synthetic_scenario(o);
    check_invariants(sc, simulate(sc, static_cast<std::uint64_t>(k)));
  }
  // Zero capacity: nobody boards.
  SyntheticOptions o;
  o.capacity = 0;
  o.passengers = 200;
  const auto empty = simulate(synthetic_scenario(o), 3);
  CHECK(empty.unserved == 200);
}

TEST_CASE("determinism and seed sensitivity") {
  const auto sc = synthetic_scenario();
  const auto a = simulate(sc, 42), b = simulate(sc, 42), c = simulate(sc, 43);
  CHECK(trace_csv(a) == trace_csv(b));
  CHECK(trace_csv(a) != trace_csv(c));
  const auto r1 = response(sc, 0.3, default_access_measure(), 20, 5);
  const auto r2 = response(sc, 0.3, default_access_measure(), 20, 5);
  CHECK(r1.mean_travel_time == r2.mean_travel_time);
  CHECK(r1.standard_error == r2.standard_error);
}

TEST_CASE("standard error shrinks with the replicate count") {
  const auto sc = synthetic_scenario();
  const auto few = response(sc, 0.5, default_access_measure(), 10, 8);
  const auto many = response(sc, 0.5, default_access_measure(), 1000, 8);
  const double ratio = few.standard_error / many.standard_error;
  MESSAGE("se ratio " << ratio);
  CHECK(ratio > 5.0);
  CHECK(ratio < 20.0);
  CHECK(std::abs(few.mean_travel_time - many.mean_travel_time) < 5.0 * few.standard_error);
}

TEST_CASE("response and scenario validation") {
  auto sc = two_station_line();
  sc.demand.push_back({0, 1, 0});
  CHECK_THROWS_AS(response(sc, 0.5, point_mass(90.0), 0, 1), DomainError);
  CHECK_THROWS_AS(response(sc, 1.5, point_mass(90.0), 1, 1), DomainError);
  auto downstream = two_station_line();
  downstream.stations.push_back("C");
  for (auto& t : downstream.trains) {
    t.arrival.push_back(500000);
    t.departure.push_back(510000);
  }
  downstream.boarding_x.push_back(0.0);
  downstream.access_measure.push_back(point_mass(1.0));
  downstream.egress_measure.push_back(point_mass(1.0));
  downstream.demand.push_back({1, 2, 0});
  CHECK_THROWS_AS(response(downstream, 0.5, point_mass(90.0), 1, 1), DomainError);

  auto bad = sc;
  bad.demand.push_back({1, 0, 0});
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = sc;
  bad.trains[0].departure[0] = 400000;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = sc;
  bad.boarding_x[1] = 2.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = sc;
  bad.capacity = -1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = sc;
  bad.trains.push_back({{50000, 250000}, {60000, 260000}});
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
