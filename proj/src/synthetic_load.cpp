#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dersizer/io.hpp"

namespace dersizer {

LoadProfile synthetic_load(std::size_t steps, double interval_s, double peak_kw, std::uint64_t seed,
                           TimePoint start) {
  if (steps < 1) throw std::invalid_argument("synthetic load needs at least one step");
  if (!(interval_s >= 1.0) || interval_s != std::floor(interval_s)) {
    throw std::invalid_argument("interval must be a whole number of seconds");
  }
  if (!(peak_kw > 0.0)) throw std::invalid_argument("peak demand must be positive");

  std::mt19937_64 rng(seed);
  LoadProfile load;
  load.times.reserve(steps);
  load.durations_s.assign(steps, interval_s);
  load.demand_kw.reserve(steps);
  const auto interval = std::chrono::seconds{static_cast<long long>(interval_s)};
  for (std::size_t t = 0; t < steps; ++t) {
    const TimePoint at = start + interval * static_cast<long long>(t);
    const auto day = std::chrono::floor<std::chrono::days>(at);
    const double hour = std::chrono::duration<double, std::ratio<3600>>(at - day).count();
    const std::chrono::weekday weekday{day};

    // Overnight base, a working-day hump, and an evening shoulder.
    double shape = 0.45;
    shape += 0.40 * std::max(0.0, std::sin(std::numbers::pi * (hour - 7.0) / 12.0));
    shape += 0.12 * std::exp(-0.5 * std::pow((hour - 19.5) / 1.5, 2.0));
    if (weekday == std::chrono::Saturday || weekday == std::chrono::Sunday) shape *= 0.85;
    const double noise = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
    shape *= 0.97 + 0.06 * noise;
    load.times.push_back(at);
    load.demand_kw.push_back(shape);
  }
  const auto peak = std::max_element(load.demand_kw.begin(), load.demand_kw.end());
  const double scale = peak_kw / *peak;
  for (double& d : load.demand_kw) d *= scale;
  *peak = peak_kw;
  return load;
}

}  // namespace dersizer
