#include "dersizer/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "json.hpp"

namespace dersizer {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Non-blank lines paired with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> lines_of(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t number = 0;
  std::size_t start = 0;
  if (text.starts_with("\xEF\xBB\xBF")) start = 3;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++number;
    if (!trim(line).empty()) out.emplace_back(number, trim(line));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string capacity_text(double v) {
  std::string s = fixed4(v);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return s;
}

struct TimeColumnFile {
  std::vector<TimePoint> times;
  std::vector<double> values;
};

TimeColumnFile parse_time_series(std::string_view text, std::string_view value_column) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("file is empty", 1);
  const auto header = split(lines.front().second);
  if (header.size() != 2 || header[0] != "datetime" || header[1] != value_column) {
    throw ParseError("expected header 'datetime," + std::string(value_column) + "'", lines.front().first);
  }
  TimeColumnFile out;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto [number, line] = lines[k];
    const auto cells = split(line);
    if (cells.size() != 2) throw ParseError("expected 2 columns", number);
    TimePoint t;
    try {
      t = parse_timestamp(cells[0]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), number);
    }
    const auto value = to_double(cells[1]);
    if (!value) throw ParseError("invalid number '" + std::string(cells[1]) + "'", number);
    if (!out.times.empty() && !(out.times.back() < t)) {
      throw ParseError("timestamps must be strictly increasing", number);
    }
    out.times.push_back(t);
    out.values.push_back(*value);
  }
  return out;
}

void reject_unknown_keys(const json& object, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!object.is_object()) throw std::invalid_argument(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_opt(const json& object, const char* key, T& target) {
  if (object.contains(key)) target = object.at(key).get<T>();
}

template <typename T>
void read_opt(const json& object, const char* key, std::optional<T>& target) {
  if (object.contains(key) && !object.at(key).is_null()) target = object.at(key).get<T>();
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

TimePoint parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.ends_with('Z')) text.remove_suffix(1);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  const std::string buf(text);
  const int fields = std::sscanf(buf.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  if (fields != 6 || (sep != 'T' && sep != ' ')) {
    throw std::invalid_argument("invalid timestamp '" + buf + "'");
  }
  std::string_view rest = std::string_view(buf).substr(static_cast<std::size_t>(consumed));
  if (!rest.empty()) {
    int used = 0;
    if (std::sscanf(rest.data(), ":%2d%n", &s, &used) != 1 || static_cast<std::size_t>(used) != rest.size()) {
      throw std::invalid_argument("invalid timestamp '" + buf + "'");
    }
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw std::invalid_argument("invalid timestamp '" + buf + "'");
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

std::string format_timestamp(TimePoint t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

LoadProfile parse_load_profile(std::string_view text) {
  const auto lines = lines_of(text);
  const TimeColumnFile series = parse_time_series(text, "load_kw");
  if (series.times.size() < 2) throw ParseError("a load profile needs at least 2 rows");
  LoadProfile load;
  load.times = series.times;
  load.demand_kw = series.values;
  for (std::size_t t = 0; t < load.demand_kw.size(); ++t) {
    if (load.demand_kw[t] < 0.0) throw ParseError("load must be non-negative", lines[t + 1].first);
  }
  load.durations_s.resize(load.times.size());
  for (std::size_t t = 0; t + 1 < load.times.size(); ++t) {
    load.durations_s[t] = static_cast<double>((load.times[t + 1] - load.times[t]).count());
  }
  load.durations_s.back() = load.durations_s[load.durations_s.size() - 2];
  load.validate();
  return load;
}

std::string render_load_profile(const LoadProfile& load) {
  std::string out = "datetime,load_kw\n";
  for (std::size_t t = 0; t < load.size(); ++t) {
    out += format_timestamp(load.times[t]);
    out += ',';
    out += shortest(load.demand_kw[t]);
    out += '\n';
  }
  return out;
}

WindSeries parse_wind_series(std::string_view text) {
  const auto lines = lines_of(text);
  TimeColumnFile series = parse_time_series(text, "capacity_factor");
  if (series.times.empty()) throw ParseError("wind series has no rows");
  for (std::size_t k = 0; k < series.values.size(); ++k) {
    if (series.values[k] < 0.0 || series.values[k] > 1.0) {
      throw ParseError("capacity factor must be in [0,1]", lines[k + 1].first);
    }
  }
  return WindSeries{std::move(series.times), std::move(series.values)};
}

double default_peak_multiplier(DerKind kind) {
  switch (kind) {
    case DerKind::DieselGenerator: return 1.0;
    case DerKind::WindTurbine: return 1.0;
    case DerKind::Photovoltaic: return 3.0;
    case DerKind::BatteryStorage: return 5.0;
  }
  return 1.0;
}

PipelineConfigFile parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    reject_unknown_keys(doc, {"ders", "search", "dispatch", "load_path", "output_path"}, "config");
    PipelineConfigFile cfg;
    if (!doc.contains("ders") || !doc.at("ders").is_array() || doc.at("ders").empty()) {
      throw std::invalid_argument("config needs a non-empty 'ders' array");
    }
    for (const auto& d : doc.at("ders")) {
      reject_unknown_keys(d,
                          {"name", "kind", "lower_bound", "upper_bound", "peak_multiplier", "charge_ratio",
                           "discharge_ratio"},
                          "DER entry");
      DerEntry e;
      e.name = d.at("name").get<std::string>();
      e.kind = parse_der_kind(d.at("kind").get<std::string>());
      read_opt(d, "lower_bound", e.lower_bound);
      read_opt(d, "upper_bound", e.upper_bound);
      read_opt(d, "peak_multiplier", e.peak_multiplier);
      read_opt(d, "charge_ratio", e.charge_ratio);
      read_opt(d, "discharge_ratio", e.discharge_ratio);
      if (e.upper_bound && e.peak_multiplier) {
        throw std::invalid_argument(e.name + ": give either upper_bound or peak_multiplier, not both");
      }
      if (!e.upper_bound && !e.peak_multiplier) e.peak_multiplier = default_peak_multiplier(e.kind);
      if (e.peak_multiplier && !(*e.peak_multiplier > 0.0)) {
        throw std::invalid_argument(e.name + ": peak_multiplier must be positive");
      }
      if (e.kind == DerKind::BatteryStorage) {
        if (!e.charge_ratio) e.charge_ratio = 2.0;
        if (!e.discharge_ratio) e.discharge_ratio = 2.0;
      } else if (e.charge_ratio || e.discharge_ratio) {
        throw std::invalid_argument(e.name + ": charge/discharge ratios apply to battery storage only");
      }
      cfg.ders.push_back(std::move(e));
    }

    if (doc.contains("search")) {
      const auto& s = doc.at("search");
      reject_unknown_keys(s,
                          {"coarse_level_points", "fine_level_points", "outer_passes", "rng_seed",
                           "deficit_display_threshold", "capacity_precision", "safety_cap"},
                          "search");
      read_opt(s, "coarse_level_points", cfg.search.coarse_level_points);
      read_opt(s, "fine_level_points", cfg.search.fine_level_points);
      read_opt(s, "outer_passes", cfg.search.outer_passes);
      read_opt(s, "rng_seed", cfg.search.rng_seed);
      read_opt(s, "deficit_display_threshold", cfg.search.deficit_display_threshold);
      read_opt(s, "capacity_precision", cfg.search.capacity_precision);
      read_opt(s, "safety_cap", cfg.search.safety_cap);
    }
    cfg.search.validate();

    if (doc.contains("dispatch")) {
      const auto& p = doc.at("dispatch");
      reject_unknown_keys(p,
                          {"pv_daylight_start", "pv_daylight_end", "pv_peak_factor", "wind_capacity_factor",
                           "wind_series_path", "bess_charge_efficiency", "bess_discharge_efficiency",
                           "bess_min_soc", "bess_initial_soc"},
                          "dispatch");
      read_opt(p, "pv_daylight_start", cfg.dispatch.pv_daylight_start_h);
      read_opt(p, "pv_daylight_end", cfg.dispatch.pv_daylight_end_h);
      read_opt(p, "pv_peak_factor", cfg.dispatch.pv_peak_factor);
      read_opt(p, "wind_capacity_factor", cfg.dispatch.wind_capacity_factor);
      read_opt(p, "bess_charge_efficiency", cfg.dispatch.bess_charge_efficiency);
      read_opt(p, "bess_discharge_efficiency", cfg.dispatch.bess_discharge_efficiency);
      read_opt(p, "bess_min_soc", cfg.dispatch.bess_min_soc);
      read_opt(p, "bess_initial_soc", cfg.dispatch.bess_initial_soc);
      if (p.contains("wind_series_path")) {
        cfg.wind_series_path = resolve_path(base_dir, p.at("wind_series_path").get<std::string>());
      }
    }
    cfg.dispatch.validate();

    if (!doc.contains("load_path")) throw std::invalid_argument("config needs 'load_path'");
    cfg.load_path = resolve_path(base_dir, doc.at("load_path").get<std::string>());
    if (doc.contains("output_path")) cfg.output_path = resolve_path(base_dir, doc.at("output_path").get<std::string>());
    return cfg;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

PipelineConfigFile load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

DesignSpace resolve_bounds(const PipelineConfigFile& config, const LoadProfile& load) {
  const double peak = load.peak_kw();
  std::vector<DerSpec> specs;
  for (const auto& e : config.ders) {
    DerSpec s;
    s.name = e.name;
    s.kind = e.kind;
    s.lower_bound = e.lower_bound;
    s.upper_bound = e.upper_bound ? *e.upper_bound
                                  : round_up_to_precision(*e.peak_multiplier * peak, config.search.capacity_precision);
    s.charge_ratio = e.charge_ratio;
    s.discharge_ratio = e.discharge_ratio;
    specs.push_back(std::move(s));
  }
  return DesignSpace(std::move(specs));
}

ResultColumns ResultColumns::from(const DesignSpace& space) {
  ResultColumns c;
  for (const auto& d : space.ders()) {
    c.names.push_back(d.name);
    c.units.emplace_back(capacity_unit(d.kind));
  }
  return c;
}

std::vector<ResultRow> to_rows(std::span<const EvaluatedDesign> designs) {
  std::vector<ResultRow> rows;
  rows.reserve(designs.size());
  for (const auto& d : designs) rows.push_back({d.design.capacities, d.deficit_ratio, d.unused_ratios});
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.capacities < b.capacities; });
  return rows;
}

std::vector<EvaluatedDesign> to_designs(std::span<const ResultRow> rows) {
  std::vector<EvaluatedDesign> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({MicrogridDesign{r.capacities}, r.deficit_ratio, r.unused_ratios});
  return out;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  throw std::invalid_argument("unknown format '" + std::string(text) + "' (expected csv or json)");
}

std::string render_csv(const ResultColumns& columns, std::span<const ResultRow> rows) {
  const std::size_t n = columns.names.size();
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += columns.names[i] + "_" + columns.units[i] + ",";
  out += "sizing_grid_deficit_ratio";
  for (std::size_t i = 0; i < n; ++i) out += "," + columns.names[i] + "_unused_ratio";
  out += '\n';

  std::vector<ResultRow> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.capacities < b.capacities; });
  for (const auto& r : sorted) {
    if (r.capacities.size() != n || r.unused_ratios.size() != n) {
      throw std::invalid_argument("result row does not match the column set");
    }
    for (double c : r.capacities) out += capacity_text(c) + ",";
    out += fixed4(r.deficit_ratio);
    for (double u : r.unused_ratios) out += "," + fixed4(u);
    out += '\n';
  }
  return out;
}

std::string render_json(const ResultColumns& columns, const SearchReport& report) {
  json doc;
  doc["columns"] = json::array();
  for (std::size_t i = 0; i < columns.names.size(); ++i) {
    doc["columns"].push_back({{"name", columns.names[i]}, {"unit", columns.units[i]}});
  }
  doc["rows"] = json::array();
  for (const auto& r : to_rows(report.final_designs)) {
    doc["rows"].push_back(
        {{"capacities", r.capacities}, {"deficit_ratio", r.deficit_ratio}, {"unused_ratios", r.unused_ratios}});
  }
  doc["per_stage_counts"] = json::array();
  for (const auto& s : report.stages) {
    doc["per_stage_counts"].push_back({{"stage", s.stage}, {"simulations", s.simulations}, {"designs", s.designs}});
  }
  doc["total_simulations"] = report.total_simulations;
  doc["potential_designs"] = report.potential_designs;
  doc["seed"] = report.seed;
  doc["elapsed_s"] = report.elapsed_s;
  return doc.dump(2) + "\n";
}

ParsedResults parse_results_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("results file is empty", 1);
  const auto header = split(lines.front().second);
  const auto pivot = std::find(header.begin(), header.end(), "sizing_grid_deficit_ratio");
  if (pivot == header.end()) throw ParseError("missing 'sizing_grid_deficit_ratio' column", lines.front().first);
  const auto n = static_cast<std::size_t>(pivot - header.begin());
  if (n == 0 || header.size() != 2 * n + 1) {
    throw ParseError("expected one capacity and one unused-ratio column per DER", lines.front().first);
  }
  ParsedResults out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string_view cap = header[i];
    std::string_view unit;
    if (cap.ends_with("_kwh")) {
      unit = "kwh";
    } else if (cap.ends_with("_kw")) {
      unit = "kw";
    } else {
      throw ParseError("capacity column '" + std::string(cap) + "' lacks a _kw/_kwh suffix", lines.front().first);
    }
    const std::string name(cap.substr(0, cap.size() - unit.size() - 1));
    if (header[n + 1 + i] != name + "_unused_ratio") {
      throw ParseError("expected column '" + name + "_unused_ratio'", lines.front().first);
    }
    out.columns.names.push_back(name);
    out.columns.units.emplace_back(unit);
  }
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto [number, line] = lines[k];
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ParseError("wrong number of columns", number);
    std::vector<double> values;
    for (const auto& cell : cells) {
      const auto v = to_double(cell);
      if (!v) throw ParseError("invalid number '" + std::string(cell) + "'", number);
      values.push_back(*v);
    }
    ResultRow row;
    row.capacities.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n));
    row.deficit_ratio = values[n];
    row.unused_ratios.assign(values.begin() + static_cast<std::ptrdiff_t>(n + 1), values.end());
    out.rows.push_back(std::move(row));
  }
  return out;
}

ParsedResults parse_results_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    ParsedResults out;
    for (const auto& c : doc.at("columns")) {
      out.columns.names.push_back(c.at("name").get<std::string>());
      out.columns.units.push_back(c.at("unit").get<std::string>());
    }
    for (const auto& r : doc.at("rows")) {
      out.rows.push_back({r.at("capacities").get<std::vector<double>>(), r.at("deficit_ratio").get<double>(),
                          r.at("unused_ratios").get<std::vector<double>>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("results JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("failed writing '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot replace '" + path.string() + "'");
  }
}

void write_report(const SearchReport& report, const ResultColumns& columns, ReportFormat format,
                  const std::filesystem::path& path) {
  const auto rows = to_rows(report.final_designs);
  write_file_atomic(path, format == ReportFormat::Csv ? render_csv(columns, rows) : render_json(columns, report));
}

}  // namespace dersizer
