#include "dersizer/search.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <functional>
#include <limits>
#include <random>

#include "parallel.hpp"

namespace dersizer {

SafetyCapExceeded::SafetyCapExceeded(std::uint64_t candidates, std::uint64_t cap)
    : std::runtime_error("exhaustive search would enumerate " + std::to_string(candidates) +
                         " candidates, above the safety cap of " + std::to_string(cap)),
      candidates_(candidates),
      cap_(cap) {}

void SearchConfig::validate() const {
  if (coarse_level_points < 2) throw std::invalid_argument("coarse_level_points must be >= 2");
  if (fine_level_points < coarse_level_points) {
    throw std::invalid_argument("fine_level_points must be >= coarse_level_points");
  }
  if (outer_passes && *outer_passes < 1) throw std::invalid_argument("outer_passes must be >= 1");
  if (!(deficit_display_threshold >= 0.0 && deficit_display_threshold <= 1.0)) {
    throw std::invalid_argument("deficit_display_threshold must be in [0,1]");
  }
  if (!(capacity_precision >= 0.0)) throw std::invalid_argument("capacity_precision must be >= 0");
  if (safety_cap == 0) throw std::invalid_argument("safety_cap must be positive");
}

int SearchConfig::passes_for(std::size_t der_count) const {
  return outer_passes.value_or(static_cast<int>(der_count));
}

std::uint64_t grid_product(std::span<const CapacityGrid> grids) {
  std::uint64_t product = 1;
  for (const auto& g : grids) {
    const std::uint64_t n = g.points.size();
    if (product > std::numeric_limits<std::uint64_t>::max() / n) return std::numeric_limits<std::uint64_t>::max();
    product *= n;
  }
  return product;
}

namespace {

enum class Status : std::uint8_t { Unvisited, Sufficient, Short, Pruned };

MicrogridDesign design_at(std::span<const CapacityGrid> grids, std::span<const std::size_t> index) {
  MicrogridDesign d;
  d.capacities.reserve(grids.size());
  for (std::size_t i = 0; i < grids.size(); ++i) d.capacities.push_back(grids[i].points[index[i]]);
  return d;
}

// Visits every index vector whose entries sum to `total`, first DER slowest and
// every DER descending, which is descending flat-index order.
void for_each_in_layer(std::span<const std::size_t> extent, std::size_t total,
                       const std::function<void(const std::vector<std::size_t>&)>& visit) {
  const std::size_t dims = extent.size();
  // Largest sum reachable by DERs k..end, used to skip infeasible prefixes.
  std::vector<std::size_t> tail_max(dims + 1, 0);
  for (std::size_t k = dims; k-- > 0;) tail_max[k] = tail_max[k + 1] + (extent[k] - 1);
  std::vector<std::size_t> index(dims, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t k, std::size_t remaining) {
    if (k + 1 == dims) {
      if (remaining < extent[k]) {
        index[k] = remaining;
        visit(index);
      }
      return;
    }
    const std::size_t hi = std::min(remaining, extent[k] - 1);
    for (std::size_t v = hi + 1; v-- > 0;) {
      if (remaining - v > tail_max[k + 1]) break;
      index[k] = v;
      rec(k + 1, remaining - v);
    }
  };
  rec(0, total);
}

// Portable Fisher-Yates so a seed yields the same order on every platform.
std::vector<std::size_t> shuffled_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

EvaluatedDesign with_capacity(SimulationCache& cache, const EvaluatedDesign& from, std::size_t der, double value) {
  MicrogridDesign d = from.design;
  d.capacities[der] = value;
  return cache.evaluate(d);
}

std::vector<EvaluatedDesign> binary_search_one(SimulationCache& cache, std::span<const CapacityGrid> grids,
                                               const EvaluatedDesign& seed, std::mt19937_64& rng, int passes) {
  std::vector<EvaluatedDesign> found;
  const EvaluatedDesign base = cache.evaluate(snap_to_grid(seed.design, grids));
  found.push_back(base);

  for (int pass = 0; pass < passes; ++pass) {
    bool decrease = base.deficit_ratio == 0.0;
    EvaluatedDesign current = base;
    for (std::size_t der : shuffled_order(grids.size(), rng)) {
      const auto& grid = grids[der];
      const std::size_t top = grid.intervals();
      for (std::size_t step = initial_step_size(top); step >= 1; step /= 2) {
        while (true) {
          const std::size_t at = grid.nearest_index(current.design.capacities[der]);
          const std::size_t to = decrease ? (at > step ? at - step : 0) : std::min(at + step, top);
          if (to == at) {
            if (!decrease && current.deficit_ratio == 0.0) decrease = true;
            break;
          }
          EvaluatedDesign next = with_capacity(cache, current, der, grid.points[to]);
          found.push_back(next);
          if (next.deficit_ratio > current.deficit_ratio) break;
          current = std::move(next);
        }
      }
    }
  }
  return found;
}

std::vector<EvaluatedDesign> local_search_one(SimulationCache& cache, std::span<const CapacityGrid> grids,
                                              const EvaluatedDesign& seed, int passes) {
  std::vector<EvaluatedDesign> found;
  EvaluatedDesign current = cache.evaluate(seed.design);
  if (current.deficit_ratio > 0.0) return found;
  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t der = 0; der < grids.size(); ++der) {
      while (true) {
        const double at = current.design.capacities[der];
        const double below = grids[der].level_below(at);
        if (below == at) break;
        EvaluatedDesign next = with_capacity(cache, current, der, below);
        found.push_back(next);
        if (next.deficit_ratio > 0.0) break;
        current = std::move(next);
      }
    }
  }
  return found;
}

std::vector<EvaluatedDesign> concat(std::span<const EvaluatedDesign> head,
                                    std::vector<std::vector<EvaluatedDesign>>& tails) {
  std::vector<EvaluatedDesign> out(head.begin(), head.end());
  for (auto& t : tails) std::move(t.begin(), t.end(), std::back_inserter(out));
  return out;
}

}  // namespace

ExhaustiveResult exhaustive_search(SimulationCache& cache, std::span<const CapacityGrid> grids,
                                   const ExhaustiveOptions& options) {
  if (grids.empty()) throw std::invalid_argument("exhaustive search needs at least one grid");
  ExhaustiveResult result;
  result.candidates = grid_product(grids);
  if (result.candidates > options.safety_cap) throw SafetyCapExceeded(result.candidates, options.safety_cap);

  const std::size_t dims = grids.size();
  std::vector<std::size_t> extent(dims);
  std::vector<std::uint64_t> stride(dims);
  std::size_t max_sum = 0;
  for (std::size_t i = dims; i-- > 0;) {
    extent[i] = grids[i].points.size();
    stride[i] = (i + 1 == dims) ? 1 : stride[i + 1] * extent[i + 1];
    max_sum += extent[i] - 1;
  }

  std::vector<Status> status(result.candidates, Status::Unvisited);
  struct Simulated {
    std::uint64_t flat;
    EvaluatedDesign design;
  };
  std::vector<Simulated> simulated;

  // Every one-level-larger neighbour lies in the previous layer, so a layer
  // sees exactly the shortfall set the sequential descending sweep would.
  for (std::size_t layer = max_sum + 1; layer-- > 0;) {
    std::vector<std::vector<std::size_t>> members;
    for_each_in_layer(extent, layer, [&](const std::vector<std::size_t>& idx) { members.push_back(idx); });

    std::vector<std::uint64_t> flats(members.size());
    std::vector<std::size_t> to_simulate;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto& idx = members[m];
      std::uint64_t flat = 0;
      for (std::size_t i = 0; i < dims; ++i) flat += idx[i] * stride[i];
      flats[m] = flat;
      bool prune = false;
      for (std::size_t i = 0; i < dims && !prune; ++i) {
        if (idx[i] + 1 < extent[i]) {
          const Status up = status[flat + stride[i]];
          prune = up == Status::Short || up == Status::Pruned;
        }
      }
      if (prune) {
        status[flat] = Status::Pruned;
        ++result.pruned_count;
        if (options.record_pruned) result.pruned.push_back(design_at(grids, idx));
      } else {
        to_simulate.push_back(m);
      }
    }

    std::vector<EvaluatedDesign> evaluated(to_simulate.size());
    detail::parallel_for(to_simulate.size(), options.threads, [&](std::size_t k) {
      evaluated[k] = cache.evaluate(design_at(grids, members[to_simulate[k]]));
    });
    for (std::size_t k = 0; k < to_simulate.size(); ++k) {
      const std::uint64_t flat = flats[to_simulate[k]];
      status[flat] = evaluated[k].deficit_ratio > 0.0 ? Status::Short : Status::Sufficient;
      simulated.push_back({flat, std::move(evaluated[k])});
    }
  }

  std::sort(simulated.begin(), simulated.end(), [](const auto& a, const auto& b) { return a.flat > b.flat; });
  result.simulated.reserve(simulated.size());
  for (auto& s : simulated) result.simulated.push_back(std::move(s.design));
  return result;
}

std::size_t initial_step_size(std::size_t intervals) {
  if (intervals < 1) throw std::invalid_argument("initial_step_size needs at least one interval");
  return std::bit_floor(intervals);
}

std::vector<EvaluatedDesign> binary_search_refine(SimulationCache& cache, std::span<const CapacityGrid> grids,
                                                  std::span<const EvaluatedDesign> seeds, std::uint64_t rng_seed,
                                                  int passes, unsigned threads) {
  std::vector<std::vector<EvaluatedDesign>> per_seed(seeds.size());
  detail::parallel_for(seeds.size(), threads, [&](std::size_t s) {
    // Each seed draws its DER orders from its own stream so results do not
    // depend on scheduling.
    std::seed_seq seq{static_cast<std::uint32_t>(rng_seed), static_cast<std::uint32_t>(rng_seed >> 32),
                      static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(std::uint64_t{s} >> 32)};
    std::mt19937_64 rng(seq);
    per_seed[s] = binary_search_one(cache, grids, seeds[s], rng, passes);
  });
  return concat(seeds, per_seed);
}

std::vector<EvaluatedDesign> local_search(SimulationCache& cache, std::span<const CapacityGrid> grids,
                                          std::span<const EvaluatedDesign> seeds, int passes, unsigned threads) {
  std::vector<std::vector<EvaluatedDesign>> per_seed(seeds.size());
  detail::parallel_for(seeds.size(), threads,
                       [&](std::size_t s) { per_seed[s] = local_search_one(cache, grids, seeds[s], passes); });
  return concat(seeds, per_seed);
}

SearchReport run_pipeline(const Simulator& simulator, const LoadProfile& load, const SearchConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const DesignSpace& space = simulator.space();
  const int passes = config.passes_for(space.size());

  const auto coarse = capacity_grids(space, config.coarse_level_points, config.capacity_precision);
  const auto fine = capacity_grids(space, config.fine_level_points, config.capacity_precision);

  SearchReport report;
  report.seed = config.rng_seed;
  report.potential_designs = grid_product(fine);

  SimulationCache cache(simulator, load);
  std::size_t before = 0;
  auto record = [&](std::string stage, std::size_t designs) {
    const std::size_t now = cache.unique_simulations();
    report.stages.push_back({std::move(stage), now - before, designs});
    before = now;
  };

  ExhaustiveOptions exhaustive;
  exhaustive.safety_cap = config.safety_cap;
  exhaustive.threads = config.threads;
  const ExhaustiveResult initial = exhaustive_search(cache, coarse, exhaustive);
  record("exhaustive", initial.simulated.size());

  const auto refined = binary_search_refine(cache, fine, initial.simulated, config.rng_seed, passes, config.threads);
  record("binary", refined.size());

  const auto frontier = non_dominated(refined);
  const auto polished = local_search(cache, fine, frontier, passes, config.threads);
  record("local", polished.size());

  for (auto& d : non_dominated(polished)) {
    if (d.deficit_ratio <= config.deficit_display_threshold) report.final_designs.push_back(std::move(d));
  }
  report.total_simulations = cache.unique_simulations();
  report.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace dersizer
