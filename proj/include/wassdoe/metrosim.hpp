#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "wassdoe/measure.hpp"

namespace wassdoe::metro {

/// Times are integer milliseconds from the start of service.
using Millis = std::int64_t;

inline Millis seconds_to_millis(double s) { return static_cast<Millis>(std::llround(s * 1000.0)); }
inline double millis_to_seconds(Millis t) { return static_cast<double>(t) / 1000.0; }

struct Train {
  std::vector<Millis> arrival;    // per station
  std::vector<Millis> departure;  // per station
};

struct Trip {
  std::size_t origin = 0;
  std::size_t destination = 0;
  Millis tap_in = 0;
};

inline constexpr std::int64_t kUnlimitedCapacity = std::numeric_limits<std::int32_t>::max();

/// A single line. Access and egress measures have native supports in seconds.
struct MetroScenario {
  std::vector<std::string> stations;
  std::vector<Train> trains;  // in service order
  std::int64_t capacity = kUnlimitedCapacity;
  std::vector<Trip> demand;
  std::vector<double> boarding_x;                   // per station, in [0, 1]
  std::vector<DiscretizedMeasure> access_measure;   // per station
  std::vector<DiscretizedMeasure> egress_measure;   // per station

  std::size_t station_count() const { return stations.size(); }
  /// Throws ValidationError on any broken invariant: schedule monotone along
  /// the line and in service order at every station, origin < destination,
  /// x in [0, 1], capacity >= 0, per-station vectors of the right length.
  void validate() const;
};

/// Ramp boarding probability in rho = (L - N0) / N with width x; x = 0 is the
/// step 1{rho >= 1}. DomainError unless x in [0, 1] and rho >= 0.
double boarding_probability(double rho, double x);

inline constexpr std::size_t kNoTrain = std::numeric_limits<std::size_t>::max();

struct PassengerRecord {
  std::size_t id = 0;  // index into the scenario demand
  std::size_t origin = 0;
  std::size_t destination = 0;
  Millis tap_in = 0;
  Millis platform_arrival = 0;
  std::size_t boarding_train = kNoTrain;
  Millis tap_out = 0;
  Millis access = 0;
  Millis wait = 0;
  Millis on_board = 0;
  Millis egress = 0;

  bool served() const { return boarding_train != kNoTrain; }
  Millis travel_time() const { return tap_out - tap_in; }
};

struct SimulationResult {
  std::vector<PassengerRecord> passengers;  // in demand order
  std::size_t unserved = 0;
  /// Largest on-board load observed on any train after any boarding step.
  std::int64_t peak_load = 0;
  /// boarded[t][o * S + d] and alighted[t][o * S + d] per train t.
  std::vector<std::vector<std::size_t>> boarded;
  std::vector<std::vector<std::size_t>> alighted;
};

/// One replicate. Trains are processed in service order and stations along
/// the line; at each stop riders for that station alight, then the platform
/// queue (in platform-arrival order) flips one boarding coin each against
/// rho = (L - N0) / N, N being the number of queued passengers who reached the
/// platform earlier. A passenger who loses the coin flip waits for the next
/// train. Passengers no train can carry are left unserved.
SimulationResult simulate(const MetroScenario& scenario, std::uint64_t seed);

struct ResponseResult {
  double mean_travel_time = 0.0;  // minutes, station-1 tap-ins, served only
  double standard_error = 0.0;    // of the per-replicate means
  std::size_t served = 0;
  std::size_t unserved = 0;
  std::size_t replicates = 0;
};

/// Mean travel time of passengers tapping in at the first station, pooled
/// over `replicates` seeded runs with the first station's x and access
/// measure replaced. DomainError if no passenger starts at the first station
/// or replicates == 0.
ResponseResult response(MetroScenario scenario, double x, const DiscretizedMeasure& mu, std::size_t replicates,
                        std::uint64_t seed);

struct SyntheticOptions {
  std::size_t stations = 6;
  std::size_t trains = 40;
  std::size_t passengers = 3000;
  double headway_s = 180.0;
  double run_time_s = 120.0;
  double dwell_s = 30.0;
  std::int64_t capacity = 120;
  double first_station_share = 0.4;
  double peak_fraction = 0.45;  // peak time as a fraction of the service span
  double peak_width_fraction = 0.12;
  double peak_ratio = 4.0;  // peak intensity over base intensity
  double x = 0.5;
  std::uint64_t seed = 2024;
};

/// Desk-scale line with a peaked demand profile: tap-in times by thinning a
/// Poisson stream, destinations uniform downstream.
MetroScenario synthetic_scenario(const SyntheticOptions& options = {});

/// Default first-station access measure: uniform on [60, 120] seconds.
DiscretizedMeasure default_access_measure(std::size_t m = 41, double tau = 3.0);

/// Per-passenger CSV trace with times in seconds.
std::string trace_csv(const SimulationResult& result);

}  // namespace wassdoe::metro
