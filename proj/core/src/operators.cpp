#include "emt/operators.hpp"

#include <algorithm>
#include <cmath>

#include "emt/error.hpp"

namespace emt {

double sbx_beta(double u, double eta) {
  const double exponent = 1.0 / (eta + 1.0);
  if (u <= 0.5) return std::pow(2.0 * u, exponent);
  return std::pow(2.0 * (1.0 - u), -exponent);
}

std::pair<Genome, Genome> sbx_crossover_unclamped(std::span<const double> p1, std::span<const double> p2, double eta,
                                                  Rng& rng) {
  if (p1.size() != p2.size()) throw DimensionError("sbx: parents differ in length");
  Genome c1(p1.size());
  Genome c2(p1.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    const double beta = sbx_beta(rng.uniform(), eta);
    const double sum = p1[i] + p2[i];
    const double half_spread = 0.5 * beta * (p1[i] - p2[i]);
    const double a = 0.5 * sum + half_spread;
    const double b = 0.5 * sum - half_spread;
    // The child farther from zero is computed directly and the other one as the
    // remainder, which keeps c1 + c2 == p1 + p2 whenever binary64 can represent it.
    if (std::abs(a) >= std::abs(b)) {
      c1[i] = a;
      c2[i] = sum - a;
    } else {
      c2[i] = b;
      c1[i] = sum - b;
    }
  }
  return {std::move(c1), std::move(c2)};
}

std::pair<Genome, Genome> sbx_crossover(std::span<const double> p1, std::span<const double> p2, double eta, Rng& rng) {
  auto children = sbx_crossover_unclamped(p1, p2, eta, rng);
  for (double& v : children.first) v = std::clamp(v, 0.0, 1.0);
  for (double& v : children.second) v = std::clamp(v, 0.0, 1.0);
  return children;
}

double polynomial_perturb(double x, double u, double eta) {
  const double power = 1.0 / (eta + 1.0);
  double delta = 0.0;
  if (u < 0.5) {
    const double xy = 1.0 - x;  // 1 - distance to the lower bound
    const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, eta + 1.0);
    delta = std::pow(val, power) - 1.0;
  } else {
    const double xy = x;  // 1 - distance to the upper bound
    const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, eta + 1.0);
    delta = 1.0 - std::pow(val, power);
  }
  return std::clamp(x + delta, 0.0, 1.0);
}

Genome polynomial_mutation(std::span<const double> x, double eta, double rate, Rng& rng) {
  Genome out(x.begin(), x.end());
  for (double& g : out) {
    if (rng.uniform() < rate) g = polynomial_perturb(g, rng.uniform(), eta);
  }
  return out;
}

MatingDecision assortative_mating(const Individual& p1, const Individual& p2, double rmp, Rng& rng) {
  if (p1.skill_factor == p2.skill_factor) return MatingDecision::Crossover;
  return rng.uniform() < rmp ? MatingDecision::Crossover : MatingDecision::MutateEach;
}

bool boundary_repair(std::span<double> genome, Rng& rng) {
  bool resampled = false;
  for (double& g : genome) {
    if (std::isnan(g)) {
      g = rng.uniform();
      resampled = true;
    } else {
      g = std::clamp(g, 0.0, 1.0);
    }
  }
  return resampled;
}

}  // namespace emt
