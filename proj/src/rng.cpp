#include "wassdoe/rng.hpp"

#include <cmath>
#include <numbers>

namespace wassdoe {

double Rng::normal() {
  const double u1 = uniform_open_closed();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::exponential() { return -std::log(uniform_open_closed()); }

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire-free rejection: unbiased and portable.
  const std::uint64_t limit = max() - (max() % n);
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

}  // namespace wassdoe
