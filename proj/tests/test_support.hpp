#pragma once

#include <chrono>

#include "dersizer/core.hpp"
#include "dersizer/io.hpp"

namespace dersizer::testing {

// 2024-01-01 00:00 plus `hours`.
inline TimePoint at_hour(double hours) {
  return TimePoint{std::chrono::days{19723}} + std::chrono::seconds{static_cast<long long>(hours * 3600.0)};
}

// One synthetic day split into `steps` equal intervals, peaking at 120 kW.
inline LoadProfile daily_load(std::size_t steps, double peak_kw = 120.0) {
  return synthetic_load(steps, 86400.0 / static_cast<double>(steps), peak_kw);
}

inline DerSpec make_der(std::string name, DerKind kind, double upper) {
  DerSpec s{std::move(name), kind, 0.0, upper, {}, {}};
  if (kind == DerKind::BatteryStorage) {
    s.charge_ratio = 2.0;
    s.discharge_ratio = 2.0;
  }
  return s;
}

// Diesel, PV and battery with peak multipliers 1, 3 and 5.
inline DesignSpace three_der_space(double peak_kw) {
  return DesignSpace({make_der("diesel", DerKind::DieselGenerator, round_up_to_precision(peak_kw, 5.0)),
                      make_der("pv", DerKind::Photovoltaic, round_up_to_precision(3 * peak_kw, 5.0)),
                      make_der("bess", DerKind::BatteryStorage, round_up_to_precision(5 * peak_kw, 5.0))});
}

inline DesignSpace four_der_space(double peak_kw) {
  return DesignSpace({make_der("diesel", DerKind::DieselGenerator, round_up_to_precision(peak_kw, 5.0)),
                      make_der("pv", DerKind::Photovoltaic, round_up_to_precision(3 * peak_kw, 5.0)),
                      make_der("wind", DerKind::WindTurbine, round_up_to_precision(peak_kw, 5.0)),
                      make_der("bess", DerKind::BatteryStorage, round_up_to_precision(5 * peak_kw, 5.0))});
}

}  // namespace dersizer::testing
