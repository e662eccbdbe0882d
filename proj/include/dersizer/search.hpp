#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dersizer/core.hpp"
#include "dersizer/simulator.hpp"

namespace dersizer {

inline constexpr std::uint64_t kDefaultSafetyCap = 100'000'000;

// Raised when an exhaustive enumeration would exceed its candidate budget.
class SafetyCapExceeded : public std::runtime_error {
 public:
  SafetyCapExceeded(std::uint64_t candidates, std::uint64_t cap);
  std::uint64_t candidates() const { return candidates_; }
  std::uint64_t cap() const { return cap_; }

 private:
  std::uint64_t candidates_;
  std::uint64_t cap_;
};

struct SearchConfig {
  int coarse_level_points = 6;
  int fine_level_points = 11;
  // Outer passes of the binary and local searches; defaults to the number of DERs.
  std::optional<int> outer_passes;
  std::uint64_t rng_seed = 0;
  double deficit_display_threshold = 0.01;
  double capacity_precision = kDefaultCapacityPrecision;
  std::uint64_t safety_cap = kDefaultSafetyCap;
  // Worker threads; 0 selects the machine's hardware concurrency.
  unsigned threads = 0;

  void validate() const;
  int passes_for(std::size_t der_count) const;
};

struct ExhaustiveOptions {
  std::uint64_t safety_cap = kDefaultSafetyCap;
  unsigned threads = 0;
  bool record_pruned = false;
};

struct ExhaustiveResult {
  // Simulated designs in enumeration order (every DER descending, first DER slowest).
  std::vector<EvaluatedDesign> simulated;
  // Designs skipped because a one-level-larger neighbour already fell short.
  // Only filled when ExhaustiveOptions::record_pruned is set.
  std::vector<MicrogridDesign> pruned;
  std::uint64_t candidates = 0;
  std::uint64_t pruned_count = 0;
};

struct StageCounts {
  std::string stage;
  std::size_t simulations = 0;  // unique simulations first run during the stage
  std::size_t designs = 0;      // size of the stage's output set
};

struct SearchReport {
  std::vector<EvaluatedDesign> final_designs;
  std::size_t total_simulations = 0;
  std::uint64_t potential_designs = 0;
  std::vector<StageCounts> stages;
  double elapsed_s = 0.0;
  std::uint64_t seed = 0;
};

std::uint64_t grid_product(std::span<const CapacityGrid> grids);

ExhaustiveResult exhaustive_search(SimulationCache& cache, std::span<const CapacityGrid> grids,
                                   const ExhaustiveOptions& options = {});

// Largest power of two not exceeding `intervals`.
std::size_t initial_step_size(std::size_t intervals);

std::vector<EvaluatedDesign> binary_search_refine(SimulationCache& cache, std::span<const CapacityGrid> grids,
                                                  std::span<const EvaluatedDesign> seeds, std::uint64_t rng_seed,
                                                  int passes, unsigned threads = 0);

std::vector<EvaluatedDesign> local_search(SimulationCache& cache, std::span<const CapacityGrid> grids,
                                          std::span<const EvaluatedDesign> seeds, int passes,
                                          unsigned threads = 0);

SearchReport run_pipeline(const Simulator& simulator, const LoadProfile& load, const SearchConfig& config);

}  // namespace dersizer
