#pragma once

#include <span>
#include <utility>
#include <vector>

#include "emt/encoding.hpp"
#include "emt/rng.hpp"

namespace emt {

using Genome = std::vector<double>;

/// SBX spread factor for a uniform draw u in [0, 1).
double sbx_beta(double u, double eta);

/// Simulated binary crossover without clamping. Per gene,
/// c1 = (p1 + p2)/2 + beta (p1 - p2)/2 and c2 = (p1 + p2)/2 - beta (p1 - p2)/2, with the
/// smaller-magnitude child taken as the remainder (p1 + p2) - other.
std::pair<Genome, Genome> sbx_crossover_unclamped(std::span<const double> p1, std::span<const double> p2, double eta,
                                                  Rng& rng);

/// SBX with children clamped to [0, 1].
std::pair<Genome, Genome> sbx_crossover(std::span<const double> p1, std::span<const double> p2, double eta, Rng& rng);

/// Bounded polynomial perturbation of one gene in [0, 1] for a uniform draw u.
double polynomial_perturb(double x, double u, double eta);

/// Each gene is perturbed with probability `rate`; the result stays in [0, 1].
Genome polynomial_mutation(std::span<const double> x, double eta, double rate, Rng& rng);

enum class MatingDecision { Crossover, MutateEach };

/// Crossover when skills match or a uniform draw falls below rmp.
MatingDecision assortative_mating(const Individual& p1, const Individual& p2, double rmp, Rng& rng);

/// Clamps genes to [0, 1] and resamples NaN genes uniformly.
/// Returns true when at least one NaN gene was resampled.
bool boundary_repair(std::span<double> genome, Rng& rng);

}  // namespace emt
