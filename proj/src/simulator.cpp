#include "dersizer/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace dersizer {
namespace {

bool is_fraction(double v) { return v > 0.0 && v <= 1.0; }

double hour_of_day(TimePoint t) {
  const auto midnight = std::chrono::floor<std::chrono::days>(t);
  return std::chrono::duration<double, std::ratio<3600>>(t - midnight).count();
}

}  // namespace

void WindSeries::validate() const {
  if (times.empty()) throw std::invalid_argument("wind series is empty");
  if (times.size() != capacity_factors.size()) {
    throw std::invalid_argument("wind series columns differ in length");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0 && !(times[i - 1] < times[i])) {
      throw std::invalid_argument("wind series timestamps must be strictly increasing");
    }
    const double cf = capacity_factors[i];
    if (!(cf >= 0.0 && cf <= 1.0)) throw std::invalid_argument("wind capacity factors must be in [0,1]");
  }
}

std::vector<double> WindSeries::sample(const LoadProfile& load) const {
  validate();
  if (load.size() == 0) return {};
  // Step-hold: the last sample carries to the end of the horizon.
  if (load.times.front() < times.front()) {
    throw std::invalid_argument("wind series starts after the load horizon");
  }
  std::vector<double> out;
  out.reserve(load.size());
  std::size_t j = 0;
  for (const auto& t : load.times) {
    while (j + 1 < times.size() && times[j + 1] <= t) ++j;
    out.push_back(capacity_factors[j]);
  }
  return out;
}

void DispatchConfig::validate() const {
  if (!(pv_daylight_start_h >= 0.0 && pv_daylight_end_h <= 24.0)) {
    throw std::invalid_argument("PV daylight window must lie within one day");
  }
  if (!(pv_daylight_end_h > pv_daylight_start_h)) {
    throw std::invalid_argument("PV daylight window end must follow its start");
  }
  if (!is_fraction(pv_peak_factor)) throw std::invalid_argument("pv_peak_factor must be in (0,1]");
  if (!is_fraction(wind_capacity_factor)) {
    throw std::invalid_argument("wind_capacity_factor must be in (0,1]");
  }
  if (!is_fraction(bess_charge_efficiency) || !is_fraction(bess_discharge_efficiency)) {
    throw std::invalid_argument("battery efficiencies must be in (0,1]");
  }
  if (!is_fraction(bess_min_soc) || !is_fraction(bess_initial_soc) ||
      !(bess_min_soc < bess_initial_soc)) {
    throw std::invalid_argument("battery SoC limits need 0 < min_soc < initial_soc <= 1");
  }
  if (wind_series) wind_series->validate();
}

BessState BessState::initial(double capacity_kwh, double charge_ratio_h, double discharge_ratio_h,
                             double initial_soc) {
  BessState s;
  s.capacity_kwh = capacity_kwh;
  s.energy_kwh = capacity_kwh * initial_soc;
  s.max_charge_kw = capacity_kwh / charge_ratio_h;
  s.max_discharge_kw = capacity_kwh / discharge_ratio_h;
  return s;
}

std::vector<double> pv_availability(std::span<const TimePoint> times, const DispatchConfig& config) {
  const double start = config.pv_daylight_start_h;
  const double end = config.pv_daylight_end_h;
  if (!(end > start)) throw std::invalid_argument("PV daylight window end must follow its start");
  std::vector<double> out;
  out.reserve(times.size());
  for (const auto& t : times) {
    const double h = hour_of_day(t);
    double factor = 0.0;
    if (h > start && h < end) {
      factor = config.pv_peak_factor * std::max(0.0, std::sin(std::numbers::pi * (h - start) / (end - start)));
    }
    out.push_back(factor);
  }
  return out;
}

StepDispatch dispatch_step(double demand_kw, const StepAvailability& available, const BessState& bess,
                           double duration_s, const DispatchConfig& config) {
  StepDispatch step;
  step.next = bess;
  const double hours = duration_s / 3600.0;
  const double eta_c = config.bess_charge_efficiency;
  const double eta_d = config.bess_discharge_efficiency;
  const double floor_kwh = config.bess_min_soc * bess.capacity_kwh;

  const double pv_served = std::min(demand_kw, available.pv_kw);
  const double wind_served = std::min(demand_kw - pv_served, available.wind_kw);
  double need = demand_kw - pv_served - wind_served;

  const double usable_kwh = std::max(0.0, bess.energy_kwh - floor_kwh);
  step.discharge_available_kw = std::min(bess.max_discharge_kw, usable_kwh * eta_d / hours);

  const double pv_surplus = available.pv_kw - pv_served;
  const double wind_surplus = available.wind_kw - wind_served;
  const double headroom_kw = std::max(0.0, bess.capacity_kwh - bess.energy_kwh) / (eta_c * hours);
  step.charge_kw = std::min({pv_surplus + wind_surplus, bess.max_charge_kw, headroom_kw});
  if (step.charge_kw > 0.0) {
    step.next.energy_kwh = std::min(bess.capacity_kwh, bess.energy_kwh + step.charge_kw * eta_c * hours);
  }
  const double pv_charge = std::min(step.charge_kw, pv_surplus);
  step.pv_used_kw = pv_served + pv_charge;
  step.wind_used_kw = wind_served + (step.charge_kw - pv_charge);

  if (need > 0.0) {
    step.discharge_kw = std::min(need, step.discharge_available_kw);
    if (step.discharge_kw > 0.0) {
      step.next.energy_kwh = std::max(floor_kwh, bess.energy_kwh - step.discharge_kw * hours / eta_d);
    }
    need -= step.discharge_kw;
  }

  step.diesel_used_kw = std::min(need, available.diesel_kw);
  need -= step.diesel_used_kw;
  step.residual_kw = need;
  step.deficit = need > kPowerEpsilon;
  return step;
}

ReferenceSimulator::ReferenceSimulator(DesignSpace space, DispatchConfig config)
    : space_(std::move(space)), config_(std::move(config)) {
  config_.validate();
  for (std::size_t i = 0; i < space_.size(); ++i) {
    std::optional<std::size_t>* slot = nullptr;
    switch (space_[i].kind) {
      case DerKind::DieselGenerator: slot = &diesel_; break;
      case DerKind::Photovoltaic: slot = &pv_; break;
      case DerKind::WindTurbine: slot = &wind_; break;
      case DerKind::BatteryStorage: slot = &bess_; break;
    }
    if (slot->has_value()) {
      throw std::invalid_argument("reference simulator supports one DER per kind; '" + space_[i].name +
                                  "' repeats " + std::string(to_string(space_[i].kind)));
    }
    *slot = i;
  }
}

SimulationOutcome ReferenceSimulator::operate(const MicrogridDesign& design, const LoadProfile& load) const {
  const std::size_t n_der = space_.size();
  if (design.capacities.size() != n_der) throw std::invalid_argument("design does not match design space");
  const std::size_t steps = load.size();

  auto capacity = [&](const std::optional<std::size_t>& idx) {
    return idx ? design.capacities[*idx] : 0.0;
  };
  const double pv_kw = capacity(pv_);
  const double wind_kw = capacity(wind_);
  const double diesel_kw = capacity(diesel_);

  std::vector<double> pv_factor = pv_ ? pv_availability(load.times, config_) : std::vector<double>(steps, 0.0);
  std::vector<double> wind_factor;
  if (wind_ && config_.wind_series) {
    wind_factor = config_.wind_series->sample(load);
  } else {
    wind_factor.assign(steps, config_.wind_capacity_factor);
  }

  BessState bess;
  if (bess_) {
    const auto& spec = space_[*bess_];
    bess = BessState::initial(design.capacities[*bess_], *spec.charge_ratio, *spec.discharge_ratio,
                              config_.bess_initial_soc);
  }

  SimulationOutcome out;
  out.deficit_flags.assign(steps, 0);
  out.available_kw.assign(n_der, std::vector<double>(steps, 0.0));
  out.used_kw.assign(n_der, std::vector<double>(steps, 0.0));

  for (std::size_t t = 0; t < steps; ++t) {
    StepAvailability avail{pv_kw * pv_factor[t], wind_kw * wind_factor[t], diesel_kw};
    const StepDispatch step = dispatch_step(load.demand_kw[t], avail, bess, load.durations_s[t], config_);
    out.deficit_flags[t] = step.deficit ? 1 : 0;
    if (pv_) {
      out.available_kw[*pv_][t] = avail.pv_kw;
      out.used_kw[*pv_][t] = step.pv_used_kw;
    }
    if (wind_) {
      out.available_kw[*wind_][t] = avail.wind_kw;
      out.used_kw[*wind_][t] = step.wind_used_kw;
    }
    if (diesel_) {
      out.available_kw[*diesel_][t] = avail.diesel_kw;
      out.used_kw[*diesel_][t] = step.diesel_used_kw;
    }
    if (bess_) {
      out.available_kw[*bess_][t] = step.discharge_available_kw;
      out.used_kw[*bess_][t] = step.discharge_kw;
    }
    bess = step.next;
  }
  return out;
}

EvaluatedDesign evaluate_design(const Simulator& simulator, const MicrogridDesign& design,
                                const LoadProfile& load) {
  const SimulationOutcome outcome = simulator.operate(design, load);
  EvaluatedDesign ev;
  ev.design = design;
  ev.deficit_ratio = deficit_ratio(outcome, load);
  ev.unused_ratios.reserve(design.capacities.size());
  for (std::size_t i = 0; i < design.capacities.size(); ++i) {
    ev.unused_ratios.push_back(unused_ratio(outcome, i, design.capacities[i]));
  }
  return ev;
}

SimulationCache::SimulationCache(const Simulator& simulator, const LoadProfile& load)
    : simulator_(simulator), load_(load) {
  load_.validate();
}

SimulationCache::Key SimulationCache::key_of(const MicrogridDesign& design) {
  // Micro-unit quantization merges float noise from different search paths.
  Key key;
  key.reserve(design.capacities.size());
  for (double c : design.capacities) key.push_back(std::llround(c * 1e6));
  return key;
}

std::optional<EvaluatedDesign> SimulationCache::lookup(const MicrogridDesign& design) const {
  std::shared_future<EvaluatedDesign> fut;
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key_of(design));
    if (it == entries_.end()) return std::nullopt;
    fut = it->second;
  }
  return fut.get();
}

EvaluatedDesign SimulationCache::evaluate(const MicrogridDesign& design) {
  Key key = key_of(design);
  std::promise<EvaluatedDesign> promise;
  std::shared_future<EvaluatedDesign> fut;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto [it, inserted] = entries_.try_emplace(std::move(key));
    if (inserted) {
      it->second = promise.get_future().share();
      simulations_.fetch_add(1);
      owner = true;
    }
    fut = it->second;
  }
  if (owner) {
    try {
      promise.set_value(evaluate_design(simulator_, design, load_));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return fut.get();
}

}  // namespace dersizer
