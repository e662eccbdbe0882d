#include "dersizer/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace dersizer {

std::string_view to_string(DerKind kind) {
  switch (kind) {
    case DerKind::DieselGenerator: return "diesel";
    case DerKind::Photovoltaic: return "photovoltaic";
    case DerKind::WindTurbine: return "wind";
    case DerKind::BatteryStorage: return "battery";
  }
  return "unknown";
}

DerKind parse_der_kind(std::string_view text) {
  if (text == "diesel" || text == "diesel_generator") return DerKind::DieselGenerator;
  if (text == "photovoltaic" || text == "pv" || text == "solar") return DerKind::Photovoltaic;
  if (text == "wind" || text == "wind_turbine") return DerKind::WindTurbine;
  if (text == "battery" || text == "bess" || text == "battery_storage") return DerKind::BatteryStorage;
  throw std::invalid_argument("unknown DER kind '" + std::string(text) + "'");
}

std::string_view capacity_unit(DerKind kind) {
  return kind == DerKind::BatteryStorage ? "kwh" : "kw";
}

void DerSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("DER name must not be empty");
  if (!(lower_bound >= 0.0)) throw std::invalid_argument(name + ": lower bound must be >= 0");
  if (!(lower_bound <= upper_bound)) {
    throw std::invalid_argument(name + ": lower bound exceeds upper bound");
  }
  const bool storage = kind == DerKind::BatteryStorage;
  if (storage != charge_ratio.has_value() || storage != discharge_ratio.has_value()) {
    throw std::invalid_argument(name + ": charge/discharge ratios are required for storage only");
  }
  if (storage && (!(*charge_ratio > 0.0) || !(*discharge_ratio > 0.0))) {
    throw std::invalid_argument(name + ": charge/discharge ratios must be positive");
  }
}

DesignSpace::DesignSpace(std::vector<DerSpec> ders) : ders_(std::move(ders)) {
  if (ders_.empty()) throw std::invalid_argument("design space needs at least one DER");
  std::set<std::string> names;
  for (const auto& d : ders_) {
    d.validate();
    if (!names.insert(d.name).second) {
      throw std::invalid_argument("duplicate DER name '" + d.name + "'");
    }
  }
}

std::optional<std::size_t> DesignSpace::index_of(DerKind kind) const {
  for (std::size_t i = 0; i < ders_.size(); ++i) {
    if (ders_[i].kind == kind) return i;
  }
  return std::nullopt;
}

double LoadProfile::total_duration_s() const {
  return std::accumulate(durations_s.begin(), durations_s.end(), 0.0);
}

double LoadProfile::peak_kw() const {
  return demand_kw.empty() ? 0.0 : *std::max_element(demand_kw.begin(), demand_kw.end());
}

void LoadProfile::validate() const {
  if (times.empty()) throw std::invalid_argument("load profile is empty");
  if (durations_s.size() != times.size() || demand_kw.size() != times.size()) {
    throw std::invalid_argument("load profile columns differ in length");
  }
  for (std::size_t t = 0; t < times.size(); ++t) {
    if (t > 0 && !(times[t - 1] < times[t])) {
      throw std::invalid_argument("load timestamps must be strictly increasing");
    }
    if (!(durations_s[t] > 0.0)) throw std::invalid_argument("load durations must be positive");
    if (!(demand_kw[t] >= 0.0)) throw std::invalid_argument("load demand must be non-negative");
  }
}

std::size_t CapacityGrid::nearest_index(double capacity) const {
  auto it = std::lower_bound(points.begin(), points.end(), capacity);
  if (it == points.begin()) return 0;
  if (it == points.end()) return points.size() - 1;
  const auto hi = static_cast<std::size_t>(it - points.begin());
  const double below = capacity - points[hi - 1];
  const double above = points[hi] - capacity;
  return above < below ? hi : hi - 1;
}

double CapacityGrid::level_below(double capacity) const {
  auto it = std::lower_bound(points.begin(), points.end(), capacity);
  if (it == points.begin()) return points.front();
  return *(it - 1);
}

double round_to_precision(double value, double precision) {
  if (!(precision > 0.0)) return value;
  return std::round(value / precision) * precision;
}

double round_up_to_precision(double value, double precision) {
  if (!(precision > 0.0)) return value;
  // Tolerate representation noise such as 360.00000000000006.
  const double scaled = value / precision;
  const double nearest = std::round(scaled);
  if (std::abs(scaled - nearest) < 1e-9) return nearest * precision;
  return std::ceil(scaled) * precision;
}

CapacityGrid capacity_grid(const DerSpec& spec, int level_points, double precision) {
  if (level_points < 2) throw std::invalid_argument("a capacity grid needs at least 2 levels");
  spec.validate();
  const double lo = spec.lower_bound;
  const double hi = spec.upper_bound;
  if (!(lo < hi)) {
    throw std::invalid_argument(spec.name + ": degenerate capacity range");
  }
  const int intervals = level_points - 1;
  CapacityGrid grid;
  grid.spacing = (hi - lo) / intervals;
  grid.points.reserve(static_cast<std::size_t>(level_points));
  grid.points.push_back(lo);
  for (int k = 1; k < intervals; ++k) {
    const double raw = lo + (hi - lo) * static_cast<double>(k) / intervals;
    const double p = round_to_precision(raw, precision);
    if (p > grid.points.back() && p < hi) grid.points.push_back(p);
  }
  grid.points.push_back(hi);
  return grid;
}

std::vector<CapacityGrid> capacity_grids(const DesignSpace& space, int level_points,
                                         double precision) {
  std::vector<CapacityGrid> grids;
  grids.reserve(space.size());
  for (const auto& der : space.ders()) grids.push_back(capacity_grid(der, level_points, precision));
  return grids;
}

double deficit_ratio(std::span<const std::uint8_t> deficit_flags, const LoadProfile& load) {
  if (deficit_flags.size() != load.size() || load.durations_s.size() != load.size()) {
    throw std::invalid_argument("deficit flags and load profile differ in length");
  }
  double short_s = 0.0;
  double total_s = 0.0;
  for (std::size_t t = 0; t < deficit_flags.size(); ++t) {
    if (deficit_flags[t] != 0) short_s += load.durations_s[t];
    total_s += load.durations_s[t];
  }
  if (!(total_s > 0.0)) throw std::invalid_argument("load profile has zero total duration");
  return short_s / total_s;
}

double deficit_ratio(const SimulationOutcome& outcome, const LoadProfile& load) {
  return deficit_ratio(outcome.deficit_flags, load);
}

double unused_ratio(const SimulationOutcome& outcome, std::size_t der_index, double capacity) {
  if (der_index >= outcome.available_kw.size() || der_index >= outcome.used_kw.size()) {
    throw std::out_of_range("DER index out of range");
  }
  if (capacity == 0.0) return kUnusedRatioZeroCapacity;
  const auto& available = outcome.available_kw[der_index];
  const auto& used = outcome.used_kw[der_index];
  std::size_t available_steps = 0;
  std::size_t unused_steps = 0;
  for (std::size_t t = 0; t < available.size(); ++t) {
    if (available[t] > kPowerEpsilon) {
      ++available_steps;
      if (used[t] < available[t] - kPowerEpsilon) ++unused_steps;
    }
  }
  if (available_steps == 0) return kUnusedRatioZeroCapacity;
  return static_cast<double>(unused_steps) / static_cast<double>(available_steps);
}

bool dominates(const EvaluatedDesign& a, const EvaluatedDesign& b) {
  const auto& ca = a.design.capacities;
  const auto& cb = b.design.capacities;
  if (ca.size() != cb.size()) throw std::invalid_argument("designs differ in dimension");
  if (a.deficit_ratio > b.deficit_ratio) return false;
  bool strict = a.deficit_ratio < b.deficit_ratio;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (ca[i] > cb[i]) return false;
    if (ca[i] < cb[i]) strict = true;
  }
  return strict;
}

std::vector<EvaluatedDesign> deduplicate(std::span<const EvaluatedDesign> designs) {
  std::vector<EvaluatedDesign> out;
  std::set<std::vector<double>> seen;
  for (const auto& d : designs) {
    if (seen.insert(d.design.capacities).second) out.push_back(d);
  }
  return out;
}

std::vector<EvaluatedDesign> non_dominated(std::span<const EvaluatedDesign> designs) {
  auto unique = deduplicate(designs);
  std::stable_sort(unique.begin(), unique.end(), [](const auto& a, const auto& b) {
    return a.design.capacities < b.design.capacities;
  });
  // A dominator has componentwise-smaller capacities and therefore sorts earlier.
  // Checking against survivors only is enough because dominance is transitive.
  std::vector<EvaluatedDesign> kept;
  for (auto& candidate : unique) {
    const bool dominated = std::any_of(kept.begin(), kept.end(),
                                       [&](const auto& k) { return dominates(k, candidate); });
    if (!dominated) kept.push_back(std::move(candidate));
  }
  return kept;
}

MicrogridDesign snap_to_grid(const MicrogridDesign& design, std::span<const CapacityGrid> grids) {
  if (design.capacities.size() != grids.size()) {
    throw std::invalid_argument("design and grids differ in dimension");
  }
  MicrogridDesign out = design;
  for (std::size_t i = 0; i < grids.size(); ++i) out.capacities[i] = grids[i].snap(design.capacities[i]);
  return out;
}

}  // namespace dersizer
