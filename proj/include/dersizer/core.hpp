#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dersizer {

// Absolute power tolerance (kW) for "not fully satisfied" and "available but not used".
inline constexpr double kPowerEpsilon = 1e-6;

// Default capacity rounding (kW / kWh) used when building search grids from a config.
inline constexpr double kDefaultCapacityPrecision = 5.0;

// Sentinel reported as the unused ratio of a DER with zero capacity.
inline constexpr double kUnusedRatioZeroCapacity = -1.0;

enum class DerKind { DieselGenerator, Photovoltaic, WindTurbine, BatteryStorage };

std::string_view to_string(DerKind kind);
DerKind parse_der_kind(std::string_view text);

// Unit of the primary capacity: kWh for storage, kW for everything else.
std::string_view capacity_unit(DerKind kind);

struct DerSpec {
  std::string name;
  DerKind kind = DerKind::DieselGenerator;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  // Hours; energy capacity divided by max charge / discharge power. Storage only.
  std::optional<double> charge_ratio;
  std::optional<double> discharge_ratio;

  void validate() const;
};

class DesignSpace {
 public:
  DesignSpace() = default;
  explicit DesignSpace(std::vector<DerSpec> ders);

  std::size_t size() const { return ders_.size(); }
  const DerSpec& operator[](std::size_t i) const { return ders_[i]; }
  const std::vector<DerSpec>& ders() const { return ders_; }

  std::optional<std::size_t> index_of(DerKind kind) const;

 private:
  std::vector<DerSpec> ders_;
};

struct MicrogridDesign {
  std::vector<double> capacities;

  bool operator==(const MicrogridDesign&) const = default;
  auto operator<=>(const MicrogridDesign&) const = default;
};

using TimePoint = std::chrono::sys_seconds;

struct LoadProfile {
  std::vector<TimePoint> times;
  std::vector<double> durations_s;
  std::vector<double> demand_kw;

  std::size_t size() const { return times.size(); }
  double total_duration_s() const;
  double peak_kw() const;

  void validate() const;
};

struct CapacityGrid {
  // Strictly ascending; front() is the lower bound and back() the upper bound.
  std::vector<double> points;
  // Nominal spacing (upper - lower) / (level_points - 1) before rounding.
  double spacing = 0.0;

  std::size_t intervals() const { return points.size() - 1; }

  // Index of the nearest point; exact midpoints resolve to the lower point.
  std::size_t nearest_index(double capacity) const;
  double snap(double capacity) const { return points[nearest_index(capacity)]; }

  // Largest point strictly below `capacity`, or the lower bound when none is.
  double level_below(double capacity) const;
};

struct SimulationOutcome {
  std::vector<std::uint8_t> deficit_flags;
  // Row-major |I| x |T| matrices in kW.
  std::vector<std::vector<double>> available_kw;
  std::vector<std::vector<double>> used_kw;
};

struct EvaluatedDesign {
  MicrogridDesign design;
  double deficit_ratio = 0.0;
  std::vector<double> unused_ratios;

  bool operator==(const EvaluatedDesign&) const = default;
};

// Builds the capacity levels of one DER. Interior points are rounded to the
// nearest multiple of `precision` (0 disables rounding) and collapsed points
// are dropped, so the grid can hold fewer than `level_points` entries.
CapacityGrid capacity_grid(const DerSpec& spec, int level_points, double precision = 0.0);

std::vector<CapacityGrid> capacity_grids(const DesignSpace& space, int level_points,
                                         double precision = 0.0);

double deficit_ratio(std::span<const std::uint8_t> deficit_flags, const LoadProfile& load);
double deficit_ratio(const SimulationOutcome& outcome, const LoadProfile& load);

double unused_ratio(const SimulationOutcome& outcome, std::size_t der_index, double capacity);

bool dominates(const EvaluatedDesign& a, const EvaluatedDesign& b);

// Deduplicates by capacity vector (first occurrence wins), drops every dominated
// entry and returns the survivors in ascending lexicographic capacity order.
std::vector<EvaluatedDesign> non_dominated(std::span<const EvaluatedDesign> designs);

std::vector<EvaluatedDesign> deduplicate(std::span<const EvaluatedDesign> designs);

MicrogridDesign snap_to_grid(const MicrogridDesign& design, std::span<const CapacityGrid> grids);

// Rounds to the nearest multiple of `precision`; identity when precision <= 0.
double round_to_precision(double value, double precision);
double round_up_to_precision(double value, double precision);

}  // namespace dersizer
