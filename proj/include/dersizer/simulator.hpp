#pragma once

#include <atomic>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "dersizer/core.hpp"

namespace dersizer {

// Per-step wind capacity factors keyed by timestamp; each value holds until the next one.
struct WindSeries {
  std::vector<TimePoint> times;
  std::vector<double> capacity_factors;

  void validate() const;
  // Fails unless the series covers [load.times.front(), load.times.back()].
  std::vector<double> sample(const LoadProfile& load) const;
};

struct DispatchConfig {
  double pv_daylight_start_h = 6.0;
  double pv_daylight_end_h = 18.0;
  double pv_peak_factor = 1.0;
  double wind_capacity_factor = 0.35;
  std::optional<WindSeries> wind_series;
  double bess_charge_efficiency = 0.95;
  double bess_discharge_efficiency = 0.95;
  double bess_min_soc = 0.10;
  double bess_initial_soc = 1.00;

  void validate() const;
};

struct BessState {
  double energy_kwh = 0.0;
  double capacity_kwh = 0.0;
  double max_charge_kw = 0.0;
  double max_discharge_kw = 0.0;

  static BessState initial(double capacity_kwh, double charge_ratio_h, double discharge_ratio_h,
                           double initial_soc);
};

// Power available from each source during one step (kW).
struct StepAvailability {
  double pv_kw = 0.0;
  double wind_kw = 0.0;
  double diesel_kw = 0.0;
};

struct StepDispatch {
  double pv_used_kw = 0.0;    // load served plus battery charging
  double wind_used_kw = 0.0;  // load served plus battery charging
  double charge_kw = 0.0;
  double discharge_kw = 0.0;
  double discharge_available_kw = 0.0;
  double diesel_used_kw = 0.0;
  double residual_kw = 0.0;
  bool deficit = false;
  BessState next;
};

std::vector<double> pv_availability(std::span<const TimePoint> times, const DispatchConfig& config);

// One step of the merit-order dispatch: renewables, battery charging from surplus,
// battery discharge, then diesel.
StepDispatch dispatch_step(double demand_kw, const StepAvailability& available, const BessState& bess,
                           double duration_s, const DispatchConfig& config);

class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual SimulationOutcome operate(const MicrogridDesign& design, const LoadProfile& load) const = 0;
  virtual const DesignSpace& space() const = 0;
};

// Deterministic islanded dispatch over at most one DER of each kind.
class ReferenceSimulator final : public Simulator {
 public:
  ReferenceSimulator(DesignSpace space, DispatchConfig config);

  SimulationOutcome operate(const MicrogridDesign& design, const LoadProfile& load) const override;
  const DesignSpace& space() const override { return space_; }
  const DispatchConfig& config() const { return config_; }

 private:
  DesignSpace space_;
  DispatchConfig config_;
  std::optional<std::size_t> diesel_, pv_, wind_, bess_;
};

// Runs the simulator once and derives the deficit and unused ratios.
EvaluatedDesign evaluate_design(const Simulator& simulator, const MicrogridDesign& design,
                                const LoadProfile& load);

// Thread-safe memo of evaluated designs. Concurrent requests for the same
// design share one simulation.
class SimulationCache {
 public:
  SimulationCache(const Simulator& simulator, const LoadProfile& load);

  EvaluatedDesign evaluate(const MicrogridDesign& design);
  std::optional<EvaluatedDesign> lookup(const MicrogridDesign& design) const;

  std::size_t unique_simulations() const { return simulations_.load(); }
  const LoadProfile& load() const { return load_; }
  const Simulator& simulator() const { return simulator_; }

 private:
  using Key = std::vector<std::int64_t>;
  static Key key_of(const MicrogridDesign& design);

  const Simulator& simulator_;
  const LoadProfile& load_;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_future<EvaluatedDesign>> entries_;
  std::atomic<std::size_t> simulations_{0};
};

}  // namespace dersizer
