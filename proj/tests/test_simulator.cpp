#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "doctest.h"
#include "dersizer/simulator.hpp"
#include "test_support.hpp"

using namespace dersizer;
using namespace dersizer::testing;

TEST_CASE("pv_availability: noon peak, midnight zero and closed form at 09:00") {
  DispatchConfig cfg;
  const std::vector<TimePoint> times{at_hour(12.0), at_hour(0.0), at_hour(9.0), at_hour(18.0), at_hour(6.0)};
  const auto f = pv_availability(times, cfg);
  CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f[1] == 0.0);
  CHECK(f[2] == doctest::Approx(std::sin(std::numbers::pi / 4)).epsilon(1e-15));
  CHECK(f[3] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f[4] == 0.0);

  cfg.pv_peak_factor = 0.8;
  CHECK(pv_availability(times, cfg)[0] == doctest::Approx(0.8));
  cfg.pv_daylight_end_h = cfg.pv_daylight_start_h;
  CHECK_THROWS_AS(pv_availability(times, cfg), std::invalid_argument);
}

TEST_CASE("dispatch_step: PV alone covers demand") {
  const DispatchConfig cfg;
  const auto s = dispatch_step(50, {60, 0, 0}, BessState{}, 240, cfg);
  CHECK(s.pv_used_kw == 50);
  CHECK_FALSE(s.deficit);
}

TEST_CASE("dispatch_step: diesel shortfall raises a deficit") {
  const DispatchConfig cfg;
  const auto s = dispatch_step(50, {0, 0, 40}, BessState{}, 240, cfg);
  CHECK(s.diesel_used_kw == 40);
  CHECK(s.residual_kw == 10);
  CHECK(s.deficit);
}

TEST_CASE("dispatch_step: surplus PV charges the battery") {
  const DispatchConfig cfg;
  const BessState bess = BessState::initial(100, 2.0, 2.0, 0.5);
  REQUIRE(bess.max_charge_kw == 50);
  const auto s = dispatch_step(10, {30, 0, 0}, bess, 240, cfg);
  // Independent arithmetic: 20 kW surplus, under the 50 kW limit and the 50 kWh of headroom.
  const double expected_gain = 20.0 * (240.0 / 3600.0) * 0.95;
  CHECK(expected_gain == doctest::Approx(1.2666667).epsilon(1e-7));
  CHECK(s.charge_kw == doctest::Approx(20.0));
  CHECK(s.pv_used_kw == doctest::Approx(30.0));
  CHECK(s.next.energy_kwh - bess.energy_kwh == doctest::Approx(expected_gain).epsilon(1e-12));
  CHECK_FALSE(s.deficit);
}

TEST_CASE("dispatch_step: battery discharge respects power limit and SoC floor") {
  const DispatchConfig cfg;
  BessState bess = BessState::initial(100, 2.0, 2.0, 1.0);
  auto s = dispatch_step(80, {0, 0, 0}, bess, 3600, cfg);
  CHECK(s.discharge_kw == doctest::Approx(50.0));
  CHECK(s.deficit);

  bess.energy_kwh = 12.0;  // 2 kWh above the 10% floor
  s = dispatch_step(80, {0, 0, 100}, bess, 3600, cfg);
  CHECK(s.discharge_kw == doctest::Approx(2.0 * 0.95));
  CHECK(s.next.energy_kwh == doctest::Approx(10.0));
  CHECK(s.diesel_used_kw == doctest::Approx(80.0 - 1.9));
  CHECK_FALSE(s.deficit);
}

TEST_CASE("dispatch_step: energy conservation, SoC bounds and no phantom generation") {
  const DispatchConfig cfg;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double cap = 400.0 * u(rng);
    BessState bess = BessState::initial(cap, 0.5 + 3 * u(rng), 0.5 + 3 * u(rng), cfg.bess_initial_soc);
    for (int t = 0; t < 50; ++t) {
      const double demand = 120.0 * u(rng);
      const StepAvailability avail{150.0 * u(rng), 60.0 * u(rng), 80.0 * u(rng)};
      const double dt = 60.0 + 3540.0 * u(rng);
      const auto s = dispatch_step(demand, avail, bess, dt, cfg);
      const double hours = dt / 3600.0;
      const double expected = (s.charge_kw * cfg.bess_charge_efficiency - s.discharge_kw / cfg.bess_discharge_efficiency) * hours;
      CHECK(s.next.energy_kwh - bess.energy_kwh == doctest::Approx(expected).epsilon(1e-9).scale(std::max(1.0, cap)));
      CHECK(s.next.energy_kwh >= cfg.bess_min_soc * cap - 1e-9);
      CHECK(s.next.energy_kwh <= cap + 1e-9);
      CHECK(s.pv_used_kw + s.wind_used_kw + s.discharge_kw + s.diesel_used_kw <= demand + s.charge_kw + 1e-9);
      CHECK(s.pv_used_kw <= avail.pv_kw + 1e-12);
      CHECK(s.wind_used_kw <= avail.wind_kw + 1e-12);
      CHECK((s.charge_kw == 0.0 || s.discharge_kw == 0.0));
      bess = s.next;
    }
  }
}

TEST_CASE("operate: diesel at peak never falls short; nothing installed always does") {
  const auto load = daily_load(48);
  ReferenceSimulator sim(three_der_space(load.peak_kw()), DispatchConfig{});
  CHECK(deficit_ratio(sim.operate(MicrogridDesign{{load.peak_kw(), 0, 0}}, load), load) == 0.0);
  CHECK(deficit_ratio(sim.operate(MicrogridDesign{{0, 0, 0}}, load), load) == 1.0);
}

TEST_CASE("operate: PV-only design falls short exactly where PV is dark") {
  const DispatchConfig cfg;
  LoadProfile load;
  for (int t = 0; t < 48; ++t) load.times.push_back(at_hour(0.5 * t));
  load.durations_s.assign(48, 1800.0);
  const auto factor = pv_availability(load.times, cfg);
  const double peak = 100.0;
  for (int t = 0; t < 48; ++t) load.demand_kw.push_back(factor[t] > 0.0 ? peak * factor[t] : 40.0);

  DerSpec pv{"pv", DerKind::Photovoltaic, 0, 3 * peak, {}, {}};
  ReferenceSimulator sim(DesignSpace({pv}), cfg);
  const auto out = sim.operate(MicrogridDesign{{3 * peak}}, load);
  int dark = 0;
  for (int t = 0; t < 48; ++t) {
    const bool expect = factor[t] == 0.0 && load.demand_kw[t] > 0.0;
    dark += expect ? 1 : 0;
    CHECK(static_cast<bool>(out.deficit_flags[t]) == expect);
    CHECK(out.used_kw[0][t] <= out.available_kw[0][t]);
  }
  // 06:00 through 18:00 inclusive have a zero sine factor only at the two endpoints.
  CHECK(dark == 48 - 23);
}

TEST_CASE("operate: deficit flags agree with the served power") {
  const auto load = daily_load(48);
  const auto space = three_der_space(load.peak_kw());
  ReferenceSimulator sim(space, DispatchConfig{});
  const auto out = sim.operate(MicrogridDesign{{30, 100, 200}}, load);
  for (std::size_t t = 0; t < load.size(); ++t) {
    double served = 0.0;
    for (std::size_t i = 0; i < space.size(); ++i) {
      CHECK(out.used_kw[i][t] >= 0.0);
      CHECK(out.used_kw[i][t] <= out.available_kw[i][t] + 1e-9);
      served += out.used_kw[i][t];
    }
    if (out.deficit_flags[t]) CHECK(served < load.demand_kw[t] - kPowerEpsilon);
  }
}

TEST_CASE("operate: raising any one capacity never raises the deficit ratio") {
  const auto load = daily_load(48);
  const double peak = load.peak_kw();
  const auto space = four_der_space(peak);
  ReferenceSimulator sim(space, DispatchConfig{});
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    MicrogridDesign lo;
    for (std::size_t i = 0; i < space.size(); ++i) lo.capacities.push_back(space[i].upper_bound * u(rng));
    MicrogridDesign hi = lo;
    const std::size_t der = rng() % space.size();
    hi.capacities[der] += (space[der].upper_bound - lo.capacities[der]) * u(rng);
    const auto a = sim.operate(lo, load);
    const auto b = sim.operate(hi, load);
    CHECK(deficit_ratio(b, load) <= deficit_ratio(a, load));
    for (std::size_t t = 0; t < load.size(); ++t) CHECK(b.deficit_flags[t] <= a.deficit_flags[t]);
  }
}

TEST_CASE("operate: deterministic") {
  const auto load = daily_load(48);
  ReferenceSimulator sim(four_der_space(load.peak_kw()), DispatchConfig{});
  const MicrogridDesign d{{20, 90, 30, 150}};
  const auto a = sim.operate(d, load);
  const auto b = sim.operate(d, load);
  CHECK(a.deficit_flags == b.deficit_flags);
  CHECK(a.available_kw == b.available_kw);
  CHECK(a.used_kw == b.used_kw);
}

TEST_CASE("operate: wind series replaces the constant capacity factor") {
  auto load = daily_load(4);
  DerSpec wind{"wind", DerKind::WindTurbine, 0, 100, {}, {}};
  DispatchConfig cfg;
  cfg.wind_series = WindSeries{{load.times[0], load.times[2]}, {1.0, 0.0}};
  ReferenceSimulator sim(DesignSpace({wind}), cfg);
  const auto out = sim.operate(MicrogridDesign{{100}}, load);
  CHECK(out.available_kw[0] == std::vector<double>{100, 100, 0, 0});

  cfg.wind_series = WindSeries{{load.times[1], load.times[3]}, {1.0, 0.0}};
  ReferenceSimulator late(DesignSpace({wind}), cfg);
  CHECK_THROWS_AS(late.operate(MicrogridDesign{{100}}, load), std::invalid_argument);
}

TEST_CASE("dispatch config validation") {
  DispatchConfig cfg;
  cfg.bess_min_soc = 0.5;
  cfg.bess_initial_soc = 0.4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = DispatchConfig{};
  cfg.bess_charge_efficiency = 1.2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("reference simulator rejects two DERs of one kind") {
  DerSpec a{"a", DerKind::DieselGenerator, 0, 10, {}, {}};
  DerSpec b{"b", DerKind::DieselGenerator, 0, 10, {}, {}};
  CHECK_THROWS_AS(ReferenceSimulator(DesignSpace({a, b}), DispatchConfig{}), std::invalid_argument);
}

TEST_CASE("cache: counts unique designs and returns identical metrics") {
  const auto load = daily_load(48);
  ReferenceSimulator sim(three_der_space(load.peak_kw()), DispatchConfig{});
  SimulationCache cache(sim, load);
  const MicrogridDesign a{{40, 70, 260}};
  const MicrogridDesign b{{40, 70, 320}};
  const auto first = cache.evaluate(a);
  CHECK(cache.unique_simulations() == 1);
  const auto again = cache.evaluate(a);
  CHECK(cache.unique_simulations() == 1);
  CHECK(first == again);
  CHECK(first == evaluate_design(sim, a, load));
  cache.evaluate(b);
  CHECK(cache.unique_simulations() == 2);
  CHECK(cache.lookup(b).has_value());
  CHECK_FALSE(cache.lookup(MicrogridDesign{{1, 2, 3}}).has_value());
}

TEST_CASE("cache: concurrent requests for one design simulate it once") {
  const auto load = daily_load(48);
  ReferenceSimulator sim(three_der_space(load.peak_kw()), DispatchConfig{});
  SimulationCache cache(sim, load);
  std::vector<std::thread> pool;
  std::vector<EvaluatedDesign> results(8);
  for (int w = 0; w < 8; ++w) {
    pool.emplace_back([&, w] {
      for (int k = 0; k < 20; ++k) {
        results[w] = cache.evaluate(MicrogridDesign{{static_cast<double>(k % 5) * 10, 35, 130}});
      }
    });
  }
  for (auto& t : pool) t.join();
  CHECK(cache.unique_simulations() == 5);
  for (const auto& r : results) CHECK(r == results[0]);
}
