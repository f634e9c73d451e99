#pragma once

#include <cstddef>
#include <vector>

#include "emt/encoding.hpp"
#include "emt/rng.hpp"
#include "emt/training.hpp"

namespace emt::testing {

/// Two classes of D x D images: pixel = 0.25 + offset * label + N(0, noise).
inline std::vector<ClassifierSample> separable_images(std::size_t n, std::size_t d, double offset, double noise,
                                                      Rng& rng, std::size_t classes = 2) {
  std::vector<ClassifierSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].label = i % classes;
    out[i].image.resize(d * d);
    for (double& v : out[i].image) v = 0.25 + offset * static_cast<double>(out[i].label) + rng.normal(0.0, noise);
  }
  return out;
}

/// Population of `n` genomes in `clusters` Gaussian clusters (sd `spread`),
/// skill factor = cluster index, genomes clamped to [0, 1].
inline std::vector<Individual> clustered_population(std::size_t n, std::size_t d, std::size_t clusters, double spread,
                                                    Rng& rng) {
  std::vector<std::vector<double>> centers(clusters, std::vector<double>(d));
  for (auto& c : centers)
    for (double& v : c) v = rng.uniform(0.2, 0.8);
  std::vector<Individual> pop;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % clusters;
    std::vector<double> g(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = centers[k][j] + rng.normal(0.0, spread);
      g[j] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
    pop.emplace_back(std::move(g), k, clusters);
  }
  return pop;
}

}  // namespace emt::testing
