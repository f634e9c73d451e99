#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "emt/rng.hpp"
#include "emt/tensor.hpp"

namespace emt {

struct JlConfig {
  std::size_t n = 100;
  std::size_t ambient_dim = 2500;
  std::size_t k = 0;  // 0: jl_target_dim(n, epsilon)
  double epsilon = 0.5;
  std::size_t trials = 1;

  void validate() const;
};

/// ceil(8 ln n / eps^2).
std::size_t jl_target_dim(std::size_t n, double epsilon);

/// (n, ambient) points times a Gaussian (ambient, k) matrix scaled by 1/sqrt(k).
Tensor gaussian_projection(const Tensor& points, std::size_t k, Rng& rng);

struct PairDistortion {
  std::size_t pair_id = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  double original_sq_dist = 0.0;
  double projected_sq_dist = 0.0;
  double ratio = 0.0;
};

struct DistortionReport {
  double max_deviation = 0.0;        // max |ratio - 1|
  double fraction_within = 0.0;      // share of pairs with ratio in [1 - eps, 1 + eps]
  std::size_t pairs = 0;             // pairs with distinct original points
  std::size_t excluded_duplicates = 0;
  std::vector<PairDistortion> rows;  // one per counted pair
};

/// Squared-distance ratios over all pairs i < j; coincident original points are skipped.
DistortionReport distortion_report(const Tensor& original, const Tensor& projected, double epsilon);

/// CSV with columns pair_id, original_sq_dist, projected_sq_dist, ratio.
void write_distortion_csv(std::ostream& os, const DistortionReport& report);

struct RowMapStats {
  double mean_ratio = 0.0;
  double variance = 0.0;
  std::size_t draws = 0;
  std::size_t skipped = 0;  // draws on pairs with zero Frobenius distance
};

/// D * ||row_s(Xi) - row_s(Xj)||^2 / ||Xi - Xj||_F^2 for `trials` draws of a
/// random pair (i, j) and a shared uniform row s.
RowMapStats row_map_distortion(const std::vector<Tensor>& matrices, Rng& rng, std::size_t trials);

/// The same ratio for one pair and row.
double row_map_ratio(const Tensor& a, const Tensor& b, std::size_t row);

}  // namespace emt
