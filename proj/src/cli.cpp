#include "dersizer/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dersizer/io.hpp"
#include "dersizer/search.hpp"

namespace dersizer {
namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> levels;
  std::optional<double> deficit_threshold;
  std::string format = "csv";
  std::string out_path;
  std::string design;
  std::string input_path;
  std::size_t steps = 5040;
  double interval_s = 240.0;
  double peak_kw = 120.0;
  std::uint64_t load_seed = 1;
};

struct Instance {
  PipelineConfigFile config;
  LoadProfile load;
  DesignSpace space;
};

unsigned threads_from_env() {
  const char* raw = std::getenv("DER_SIZER_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  const unsigned long n = std::strtoul(raw, &end, 10);
  if (*end != '\0' || n == 0) throw std::invalid_argument("DER_SIZER_THREADS must be a positive integer");
  return static_cast<unsigned>(n);
}

std::string read_input(const std::filesystem::path& path) {
  try {
    return read_file(path);
  } catch (const std::runtime_error& e) {
    throw ParseError(e.what());
  }
}

Instance load_instance(const Options& opt) {
  Instance inst;
  inst.config = parse_config(read_input(opt.config_path), std::filesystem::path(opt.config_path).parent_path());
  auto& search = inst.config.search;
  if (opt.seed) search.rng_seed = *opt.seed;
  if (opt.deficit_threshold) search.deficit_display_threshold = *opt.deficit_threshold;
  search.threads = threads_from_env();
  search.validate();
  inst.load = parse_load_profile(read_input(inst.config.load_path));
  if (inst.config.wind_series_path) {
    inst.config.dispatch.wind_series = parse_wind_series(read_input(*inst.config.wind_series_path));
    inst.config.dispatch.wind_series->sample(inst.load);
  }
  inst.space = resolve_bounds(inst.config, inst.load);
  return inst;
}

std::filesystem::path output_path(const Options& opt, const PipelineConfigFile& cfg) {
  return opt.out_path.empty() ? cfg.output_path : std::filesystem::path(opt.out_path);
}

void emit(const std::string& contents, const std::filesystem::path& path, std::ostream& out) {
  if (path.empty()) {
    out << contents;
  } else {
    write_file_atomic(path, contents);
  }
}

std::string render(const ResultColumns& columns, const SearchReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) return render_json(columns, report);
  return render_csv(columns, to_rows(report.final_designs));
}

void log_report(const SearchReport& report, std::ostream& err) {
  for (const auto& s : report.stages) {
    err << "[der_sizer] stage " << s.stage << ": " << s.simulations << " new simulations, " << s.designs
        << " designs\n";
  }
  err << "[der_sizer] unique simulations " << report.total_simulations << " of " << report.potential_designs
      << " potential designs; " << report.final_designs.size() << " final designs in " << report.elapsed_s
      << " s\n";
  if (report.final_designs.empty()) err << "[der_sizer] warning: no design met the deficit threshold\n";
}

int cmd_size(const Options& opt, std::ostream& out, std::ostream& err) {
  Instance inst = load_instance(opt);
  if (opt.levels) inst.config.search.fine_level_points = *opt.levels;
  inst.config.search.validate();
  const auto format = parse_report_format(opt.format);
  ReferenceSimulator sim(inst.space, inst.config.dispatch);
  err << "[der_sizer] sizing " << inst.space.size() << " DERs over " << inst.load.size() << " steps, seed "
      << inst.config.search.rng_seed << "\n";
  const SearchReport report = run_pipeline(sim, inst.load, inst.config.search);
  log_report(report, err);
  emit(render(ResultColumns::from(inst.space), report, format), output_path(opt, inst.config), out);
  return kExitOk;
}

int cmd_exhaustive(const Options& opt, std::ostream& out, std::ostream& err) {
  const Instance inst = load_instance(opt);
  const auto& search = inst.config.search;
  const int levels = opt.levels.value_or(search.fine_level_points);
  const auto format = parse_report_format(opt.format);
  ReferenceSimulator sim(inst.space, inst.config.dispatch);
  SimulationCache cache(sim, inst.load);
  const auto grids = capacity_grids(inst.space, levels, search.capacity_precision);

  const auto started = std::chrono::steady_clock::now();
  ExhaustiveOptions ex;
  ex.safety_cap = search.safety_cap;
  ex.threads = search.threads;
  const ExhaustiveResult result = exhaustive_search(cache, grids, ex);

  SearchReport report;
  report.seed = search.rng_seed;
  report.potential_designs = result.candidates;
  report.stages.push_back({"exhaustive", cache.unique_simulations(), result.simulated.size()});
  for (auto& d : non_dominated(result.simulated)) {
    if (d.deficit_ratio <= search.deficit_display_threshold) report.final_designs.push_back(std::move(d));
  }
  report.total_simulations = cache.unique_simulations();
  report.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  err << "[der_sizer] exhaustive search at " << levels << " levels pruned " << result.pruned_count << " designs\n";
  log_report(report, err);
  emit(render(ResultColumns::from(inst.space), report, format), output_path(opt, inst.config), out);
  return kExitOk;
}

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  const Instance inst = load_instance(opt);
  MicrogridDesign design;
  std::stringstream ss(opt.design);
  for (std::string cell; std::getline(ss, cell, ',');) {
    try {
      std::size_t used = 0;
      design.capacities.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw std::invalid_argument("invalid capacity '" + cell + "' in --design");
    }
  }
  if (design.capacities.size() != inst.space.size()) {
    throw std::invalid_argument("--design needs " + std::to_string(inst.space.size()) + " comma-separated capacities");
  }
  for (std::size_t i = 0; i < design.capacities.size(); ++i) {
    if (design.capacities[i] < 0.0) throw std::invalid_argument("capacities must be non-negative");
  }
  ReferenceSimulator sim(inst.space, inst.config.dispatch);
  const EvaluatedDesign ev = evaluate_design(sim, design, inst.load);
  err << "[der_sizer] simulated " << inst.load.size() << " steps\n";
  const std::vector<EvaluatedDesign> one{ev};
  const auto rows = to_rows(one);
  out << render_csv(ResultColumns::from(inst.space), rows);
  return kExitOk;
}

int cmd_filter(const Options& opt, std::ostream& out, std::ostream& err) {
  const std::string text = read_input(opt.input_path);
  const bool json_in = std::filesystem::path(opt.input_path).extension() == ".json";
  ParsedResults parsed = json_in ? parse_results_json(text) : parse_results_csv(text);
  const auto format = parse_report_format(opt.format);
  SearchReport report;
  for (auto& d : non_dominated(to_designs(parsed.rows))) {
    if (!opt.deficit_threshold || d.deficit_ratio <= *opt.deficit_threshold) {
      report.final_designs.push_back(std::move(d));
    }
  }
  err << "[der_sizer] kept " << report.final_designs.size() << " of " << parsed.rows.size() << " rows\n";
  if (report.final_designs.empty()) err << "[der_sizer] warning: no rows survived the filter\n";
  emit(render(parsed.columns, report, format), opt.out_path, out);
  return kExitOk;
}

int cmd_synth_load(const Options& opt, std::ostream& out, std::ostream& err) {
  const LoadProfile load = synthetic_load(opt.steps, opt.interval_s, opt.peak_kw, opt.load_seed);
  err << "[der_sizer] synthetic load: " << load.size() << " steps, peak " << load.peak_kw() << " kW\n";
  emit(render_load_profile(load), opt.out_path, out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Enumerate rightsized, non-dominated microgrid designs for a load profile.", "der_sizer"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Pipeline configuration (JSON)")->required();
    sub->add_option("--seed", opt.seed, "Override search.rng_seed");
    sub->add_option("--deficit-threshold", opt.deficit_threshold, "Override the deficit display threshold")
        ->check(CLI::Range(0.0, 1.0));
  };
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", opt.out_path, "Output file (default: config output_path, else stdout)");
  };

  auto* size = app.add_subcommand("size", "Run the three-stage sizing pipeline");
  add_common(size);
  add_output(size);
  size->add_option("--levels", opt.levels, "Fine level count per DER")->check(CLI::Range(2, 100000));

  auto* exhaustive = app.add_subcommand("exhaustive", "Exhaustive search with pruning at one level count");
  add_common(exhaustive);
  add_output(exhaustive);
  exhaustive->add_option("--levels", opt.levels, "Level count per DER")->check(CLI::Range(2, 100000));

  auto* simulate = app.add_subcommand("simulate", "Evaluate a single design");
  add_common(simulate);
  simulate->add_option("--design", opt.design, "Comma-separated capacities in DER order")->required();

  auto* filter = app.add_subcommand("filter", "Non-dominated filter over a results file");
  filter->add_option("input", opt.input_path, "Results CSV (or .json)")->required();
  filter->add_option("--deficit-threshold", opt.deficit_threshold, "Drop rows above this deficit ratio")
      ->check(CLI::Range(0.0, 1.0));
  add_output(filter);

  auto* synth = app.add_subcommand("synth-load", "Write a synthetic load profile CSV");
  synth->add_option("--steps", opt.steps, "Number of intervals")->check(CLI::PositiveNumber);
  synth->add_option("--interval", opt.interval_s, "Interval length in seconds")->check(CLI::PositiveNumber);
  synth->add_option("--peak", opt.peak_kw, "Peak demand in kW")->check(CLI::PositiveNumber);
  synth->add_option("--seed", opt.load_seed, "Noise seed");
  synth->add_option("--out", opt.out_path, "Output file (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (size->parsed()) return cmd_size(opt, out, err);
    if (exhaustive->parsed()) return cmd_exhaustive(opt, out, err);
    if (simulate->parsed()) return cmd_simulate(opt, out, err);
    if (filter->parsed()) return cmd_filter(opt, out, err);
    if (synth->parsed()) return cmd_synth_load(opt, out, err);
  } catch (const SafetyCapExceeded& e) {
    err << "der_sizer: " << e.what() << "\n";
    return kExitSafetyCap;
  } catch (const ParseError& e) {
    err << "der_sizer: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "der_sizer: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "der_sizer: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dersizer
