#include <filesystem>
#include <random>

#include "doctest.h"
#include "dersizer/io.hpp"
#include "test_support.hpp"

using namespace dersizer;
using namespace dersizer::testing;

namespace {

std::string four_minute_csv(std::size_t rows) {
  std::string csv = "datetime,load_kw\n";
  const TimePoint start = at_hour(0);
  for (std::size_t t = 0; t < rows; ++t) {
    csv += format_timestamp(start + std::chrono::minutes{4} * static_cast<long long>(t)) + "," +
           std::to_string(50 + static_cast<int>(t % 70)) + "\n";
  }
  return csv;
}

PipelineConfigFile config_with(const std::string& ders) {
  return parse_config(R"({"load_path": "load.csv", "ders": )" + ders + "}");
}

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "dersizer_test_io";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse_load_profile: two weeks at four-minute intervals") {
  const LoadProfile load = parse_load_profile(four_minute_csv(5040));
  CHECK(load.size() == 5040);
  for (double d : load.durations_s) CHECK(d == 240.0);
  CHECK(load.total_duration_s() == 14.0 * 86400.0);
}

TEST_CASE("parse_load_profile: last interval repeats the previous duration") {
  const auto load = parse_load_profile("datetime,load_kw\n2024-01-01T00:00:00,10\n2024-01-01T01:00:00,12\n");
  CHECK(load.durations_s == std::vector<double>{3600, 3600});
  CHECK(load.demand_kw == std::vector<double>{10, 12});
}

TEST_CASE("parse_load_profile: errors name the offending line") {
  auto line_of = [](const std::string& text) {
    try {
      parse_load_profile(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  CHECK(line_of("datetime,load_kw\n2024-01-01T01:00,10\n2024-01-01T00:00,12\n") == 3);
  CHECK(line_of("datetime,load_kw\n2024-01-01T00:00,10\n2024-01-01T01:00,-1\n") == 3);
  CHECK(line_of("datetime,load_kw\n2024-01-01T00:00,10\n2024-01-01T01:00\n") == 3);
  CHECK(line_of("datetime,load_kw\n2024-13-01T00:00,10\n2024-01-01T01:00,3\n") == 2);
  CHECK(line_of("datetime,load_kw\n2024-01-01T00:00,abc\n2024-01-01T01:00,3\n") == 2);
  CHECK(line_of("time,kw\n2024-01-01T00:00,1\n") == 1);
  CHECK_THROWS_AS(parse_load_profile("datetime,load_kw\n2024-01-01T00:00,10\n"), ParseError);
}

TEST_CASE("timestamps: accepted spellings") {
  const TimePoint expected = at_hour(13.5);
  CHECK(parse_timestamp("2024-01-01T13:30:00") == expected);
  CHECK(parse_timestamp("2024-01-01 13:30") == expected);
  CHECK(parse_timestamp("2024-01-01T13:30:00Z") == expected);
  CHECK(format_timestamp(expected) == "2024-01-01T13:30:00");
  CHECK_THROWS_AS(parse_timestamp("2024-01-01T25:00"), std::invalid_argument);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), std::invalid_argument);
}

TEST_CASE("synthetic load round-trips through CSV") {
  const auto load = synthetic_load(5040, 240, 120);
  CHECK(load.peak_kw() == 120.0);
  const auto parsed = parse_load_profile(render_load_profile(load));
  CHECK(parsed.demand_kw == load.demand_kw);
  CHECK(parsed.times == load.times);
  CHECK(parsed.total_duration_s() == 14.0 * 86400.0);
}

TEST_CASE("parse_wind_series") {
  const auto w = parse_wind_series("datetime,capacity_factor\n2024-01-01T00:00,0.2\n2024-01-01T06:00,0.6\n");
  CHECK(w.capacity_factors == std::vector<double>{0.2, 0.6});
  CHECK_THROWS_AS(parse_wind_series("datetime,capacity_factor\n2024-01-01T00:00,1.5\n"), ParseError);
}

TEST_CASE("resolve_bounds: peak multipliers and explicit bounds") {
  LoadProfile load = parse_load_profile("datetime,load_kw\n2024-01-01T00:00,80\n2024-01-01T01:00,120\n");
  const auto cfg = config_with(R"([
      {"name": "pv", "kind": "photovoltaic"},
      {"name": "bess", "kind": "battery"},
      {"name": "diesel", "kind": "diesel", "upper_bound": 250},
      {"name": "wind", "kind": "wind"}])");
  const DesignSpace space = resolve_bounds(cfg, load);
  CHECK(space[0].upper_bound == 360.0);
  CHECK(space[1].upper_bound == 600.0);
  CHECK(space[2].upper_bound == 250.0);
  CHECK(space[3].upper_bound == 120.0);
  CHECK(space[1].charge_ratio == 2.0);
}

TEST_CASE("resolve_bounds: rounds up to the capacity precision and grows with the load") {
  const auto cfg = config_with(R"([{"name": "pv", "kind": "pv", "peak_multiplier": 3}])");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> peak(1.0, 500.0), scale(1.0, 4.0);
  for (int trial = 0; trial < 100; ++trial) {
    LoadProfile load = synthetic_load(48, 1800, peak(rng));
    const double before = resolve_bounds(cfg, load)[0].upper_bound;
    CHECK(before >= 3 * load.peak_kw());
    CHECK(before < 3 * load.peak_kw() + 5.0);
    const double k = scale(rng);
    for (double& d : load.demand_kw) d *= k;
    CHECK(resolve_bounds(cfg, load)[0].upper_bound >= before);
  }
}

TEST_CASE("parse_config: defaults and validation") {
  const auto cfg = config_with(R"([{"name": "d", "kind": "diesel"}])");
  CHECK(cfg.search.coarse_level_points == 6);
  CHECK(cfg.search.fine_level_points == 11);
  CHECK(cfg.search.deficit_display_threshold == 0.01);
  CHECK(cfg.search.capacity_precision == 5.0);
  CHECK(cfg.dispatch.bess_min_soc == 0.10);
  CHECK(cfg.ders[0].peak_multiplier == 1.0);

  const auto full = parse_config(R"({
      "load_path": "data/load.csv", "output_path": "out.csv",
      "ders": [{"name": "b", "kind": "battery", "charge_ratio": 4, "discharge_ratio": 1}],
      "search": {"fine_level_points": 41, "rng_seed": 18446744073709551615, "outer_passes": 2},
      "dispatch": {"bess_initial_soc": 0.5, "wind_series_path": "/abs/wind.csv"}})",
                                 "/base");
  CHECK(full.load_path == std::filesystem::path("/base/data/load.csv"));
  CHECK(full.search.fine_level_points == 41);
  CHECK(full.search.rng_seed == 18446744073709551615ull);
  CHECK(full.search.outer_passes == 2);
  CHECK(full.dispatch.bess_initial_soc == 0.5);
  CHECK(full.wind_series_path == std::filesystem::path("/abs/wind.csv"));
  CHECK(full.ders[0].charge_ratio == 4.0);

  CHECK_THROWS_AS(config_with(R"([{"name": "d", "kind": "diesel", "upper_bound": 5, "peak_multiplier": 1}])"),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_with(R"([{"name": "d", "kind": "diesel", "charge_ratio": 2}])"), std::invalid_argument);
  CHECK_THROWS_AS(config_with(R"([{"name": "d", "kind": "nuclear"}])"), std::invalid_argument);
  CHECK_THROWS_AS(config_with(R"([{"name": "d", "kind": "diesel", "upperbound": 5}])"), std::invalid_argument);
  CHECK_THROWS_AS(config_with("[]"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("{not json"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"ders": [{"name": "d", "kind": "diesel"}]})"), std::invalid_argument);
}

TEST_CASE("render_csv: header, ordering and the zero-capacity sentinel") {
  ResultColumns cols{{"diesel", "pv", "bess"}, {"kw", "kw", "kwh"}};
  const std::vector<ResultRow> rows{{{45, 70, 450}, 0.0, {0.25, 0.5, 0.125}}, {{45, 0, 650}, 0.0, {0.3, -1.0, 0.5}}};
  const std::string csv = render_csv(cols, rows);
  CHECK(csv ==
        "diesel_kw,pv_kw,bess_kwh,sizing_grid_deficit_ratio,diesel_unused_ratio,pv_unused_ratio,bess_unused_ratio\n"
        "45,0,650,0.0000,0.3000,-1.0000,0.5000\n"
        "45,70,450,0.0000,0.2500,0.5000,0.1250\n");
  CHECK(render_csv(cols, {}) ==
        "diesel_kw,pv_kw,bess_kwh,sizing_grid_deficit_ratio,diesel_unused_ratio,pv_unused_ratio,bess_unused_ratio\n");
}

TEST_CASE("results CSV: parse -> render -> parse is lossless at four decimals") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ResultColumns cols{{"diesel", "pv", "bess"}, {"kw", "kw", "kwh"}};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ResultRow> rows;
    for (int k = 0; k < 15; ++k) {
      ResultRow r;
      for (int i = 0; i < 3; ++i) {
        r.capacities.push_back(std::round(u(rng) * 6000.0) / 10.0);
        r.unused_ratios.push_back(u(rng) < 0.1 ? -1.0 : u(rng));
      }
      r.deficit_ratio = u(rng) * 0.01;
      rows.push_back(r);
    }
    const auto first = parse_results_csv(render_csv(cols, rows));
    CHECK(first.columns.names == cols.names);
    CHECK(first.columns.units == cols.units);
    const auto second = parse_results_csv(render_csv(first.columns, first.rows));
    CHECK(second.rows == first.rows);
    REQUIRE(first.rows.size() == rows.size());
    auto sorted = to_rows(to_designs(rows));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      CHECK(first.rows[k].capacities == sorted[k].capacities);
      CHECK(std::abs(first.rows[k].deficit_ratio - sorted[k].deficit_ratio) <= 5e-5);
    }
  }
}

TEST_CASE("results JSON: rows round-trip exactly and carry run metadata") {
  SearchReport report;
  report.final_designs = {{MicrogridDesign{{70, 0, 320}}, 0.0, {0.4, -1.0, 0.61}},
                          {MicrogridDesign{{25, 245, 650}}, 0.003, {0.1 / 3.0, 0.2, 0.7}}};
  report.stages = {{"exhaustive", 10, 10}, {"binary", 5, 40}, {"local", 2, 20}};
  report.total_simulations = 17;
  report.seed = 42;
  ResultColumns cols{{"diesel", "pv", "bess"}, {"kw", "kw", "kwh"}};
  const std::string text = render_json(cols, report);
  const auto parsed = parse_results_json(text);
  CHECK(parsed.rows == to_rows(report.final_designs));
  CHECK(parsed.columns.names == cols.names);
  CHECK(text.find("\"per_stage_counts\"") != std::string::npos);
  CHECK(text.find("\"seed\": 42") != std::string::npos);
  CHECK(text.find("\"elapsed_s\"") != std::string::npos);
}

TEST_CASE("parse_results_csv: rejects mismatched headers") {
  CHECK_THROWS_AS(parse_results_csv("a_kw,b_kw\n"), ParseError);
  CHECK_THROWS_AS(parse_results_csv("a,sizing_grid_deficit_ratio,a_unused_ratio\n"), ParseError);
  CHECK_THROWS_AS(parse_results_csv("a_kw,sizing_grid_deficit_ratio,b_unused_ratio\n"), ParseError);
  CHECK_THROWS_AS(parse_results_csv("a_kw,sizing_grid_deficit_ratio,a_unused_ratio\n1,2\n"), ParseError);
}

TEST_CASE("write_file_atomic: replaces whole files and leaves no temporaries") {
  const auto dir = scratch_dir();
  const auto path = dir / "out.csv";
  write_file_atomic(path, "first\n");
  write_file_atomic(path, "second\n");
  CHECK(read_file(path) == "second\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  CHECK_THROWS(write_file_atomic(dir / "missing" / "out.csv", "x"));
  std::filesystem::remove_all(dir);
}
