#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dersizer/core.hpp"
#include "dersizer/search.hpp"
#include "dersizer/simulator.hpp"

namespace dersizer {

// Malformed input file; `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Accepts "YYYY-MM-DDTHH:MM[:SS]" with 'T' or a space and an optional trailing 'Z'.
TimePoint parse_timestamp(std::string_view text);
std::string format_timestamp(TimePoint t);

// CSV with header `datetime,load_kw`. Each duration is the gap to the next
// timestamp; the last row repeats the preceding duration.
LoadProfile parse_load_profile(std::string_view text);
std::string render_load_profile(const LoadProfile& load);

// CSV with header `datetime,capacity_factor`.
WindSeries parse_wind_series(std::string_view text);

struct DerEntry {
  std::string name;
  DerKind kind = DerKind::DieselGenerator;
  double lower_bound = 0.0;
  std::optional<double> upper_bound;
  std::optional<double> peak_multiplier;
  std::optional<double> charge_ratio;
  std::optional<double> discharge_ratio;
};

double default_peak_multiplier(DerKind kind);

struct PipelineConfigFile {
  std::vector<DerEntry> ders;
  SearchConfig search;
  DispatchConfig dispatch;
  std::filesystem::path load_path;
  std::filesystem::path output_path;
  std::optional<std::filesystem::path> wind_series_path;
};

// Relative paths in the document resolve against `base_dir`.
PipelineConfigFile parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
PipelineConfigFile load_config(const std::filesystem::path& path);

// Multiplier bounds become multiplier * peak demand rounded up to the capacity precision.
DesignSpace resolve_bounds(const PipelineConfigFile& config, const LoadProfile& load);

struct ResultColumns {
  std::vector<std::string> names;
  std::vector<std::string> units;  // "kw" or "kwh"

  static ResultColumns from(const DesignSpace& space);
};

struct ResultRow {
  std::vector<double> capacities;
  double deficit_ratio = 0.0;
  std::vector<double> unused_ratios;

  bool operator==(const ResultRow&) const = default;
};

std::vector<ResultRow> to_rows(std::span<const EvaluatedDesign> designs);
std::vector<EvaluatedDesign> to_designs(std::span<const ResultRow> rows);

enum class ReportFormat { Csv, Json };
ReportFormat parse_report_format(std::string_view text);

std::string render_csv(const ResultColumns& columns, std::span<const ResultRow> rows);
std::string render_json(const ResultColumns& columns, const SearchReport& report);

struct ParsedResults {
  ResultColumns columns;
  std::vector<ResultRow> rows;
};
ParsedResults parse_results_csv(std::string_view text);
ParsedResults parse_results_json(std::string_view text);

// Writes via a temporary sibling file and a rename so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

void write_report(const SearchReport& report, const ResultColumns& columns, ReportFormat format,
                  const std::filesystem::path& path);

// Deterministic day/night demand shape scaled so its maximum equals `peak_kw`.
LoadProfile synthetic_load(std::size_t steps, double interval_s, double peak_kw, std::uint64_t seed = 1,
                           TimePoint start = TimePoint{std::chrono::days{19723}});

}  // namespace dersizer
