#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace emt {

struct TracePoint {
  std::size_t generation = 0;
  std::uint64_t evals = 0;
  std::vector<double> best;  // best-so-far objective per task
};

struct GenerationEvent {
  std::size_t generation = 0;
  std::uint64_t evals = 0;
  std::vector<double> best;
  std::size_t crossovers = 0;           // pairs that took the crossover branch
  std::size_t mutations = 0;            // pairs that took the mutation branch
  std::size_t fallback_crossovers = 0;  // residual crossover replaced by SBX (network not trained yet)
  std::size_t classifier_assignments = 0;
  std::size_t repaired = 0;             // offspring with NaN genes resampled
};

struct RetrainEvent {
  std::size_t generation = 0;
  std::uint64_t evals_before = 0;
  std::uint64_t evals_after = 0;
  std::size_t residual_samples = 0;
  std::vector<double> residual_loss;  // per epoch
  std::size_t classifier_samples = 0;
  std::vector<double> classifier_val_accuracy;  // per epoch
  bool classifier_trained = false;
  std::string note;
};

/// Everything an algorithm run reports back to the harness.
struct RunTrace {
  std::vector<TracePoint> points;
  std::vector<double> final_best;
  std::vector<std::vector<double>> best_genomes;  // unified genome of the best member per task
  std::uint64_t evaluations = 0;
  std::vector<GenerationEvent> generations;
  std::vector<RetrainEvent> retrains;
};

}  // namespace emt
