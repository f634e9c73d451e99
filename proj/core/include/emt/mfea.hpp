#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "emt/encoding.hpp"
#include "emt/operators.hpp"
#include "emt/problems.hpp"
#include "emt/run_trace.hpp"

namespace emt {

struct MfeaConfig {
  std::size_t population_size = 100;
  double rmp = 0.3;
  double sbx_eta = 2.0;
  double mutation_eta = 5.0;
  std::optional<double> mutation_rate;  // per gene; defaults to 1 / D_max
  std::uint64_t max_evals = 50'000;

  void validate() const;
  double gene_mutation_rate(std::size_t unified_dim) const {
    return mutation_rate.value_or(1.0 / static_cast<double>(unified_dim));
  }
};

/// Keeps the N members with highest scalar fitness (ranks recomputed over the
/// whole pool); ties go to lower skill-task cost, then lower pool index.
Population select_next_generation(std::vector<Individual> pool, std::size_t n, std::size_t num_tasks);

/// Pool indices of the N survivors in selection order. Recomputes the ranks
/// and fitness of `pool` in place.
std::vector<std::size_t> selection_order(std::span<Individual> pool, std::size_t n, std::size_t num_tasks);

/// Canonical MFEA: assortative mating with SBX, polynomial mutation, vertical
/// cultural transmission and elitist scalar-fitness selection.
RunTrace run_mfea(const MultitaskProblem& problem, const MfeaConfig& config, std::uint64_t seed);

/// Uniform sampling of [0,1]^D, round-robin over tasks, same budget accounting.
RunTrace run_random_search(const MultitaskProblem& problem, const MfeaConfig& config, std::uint64_t seed);

namespace detail {

/// Best-so-far bookkeeping shared by the evolutionary loops.
class BestTracker {
 public:
  BestTracker(std::size_t num_tasks, std::size_t dim);
  void observe(const Individual& ind);
  const std::vector<double>& best() const noexcept { return best_; }
  const std::vector<std::vector<double>>& genomes() const noexcept { return genomes_; }

 private:
  std::vector<double> best_;
  std::vector<std::vector<double>> genomes_;
};

/// N uniform genomes with skill factor i mod T, each evaluated on its skill task.
Population initial_population(Evaluator& eval, std::size_t n, Rng& rng);

/// Evaluates every member on its skill task, in index order.
void evaluate_on_skill(std::span<Individual> members, Evaluator& eval);

void record_point(RunTrace& trace, std::size_t generation, std::uint64_t evals, const BestTracker& best);

/// Random pairing of member indices for one generation.
std::vector<std::pair<std::size_t, std::size_t>> random_pairs(std::size_t n, Rng& rng);

}  // namespace detail

}  // namespace emt
