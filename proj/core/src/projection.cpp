#include "emt/projection.hpp"

#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include "emt/error.hpp"

namespace emt {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sq_dist(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + ": expected a rank-2 tensor");
}

}  // namespace

void JlConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInputError("epsilon must lie in (0, 1)");
  if (n < 2) throw InvalidInputError("need at least two points");
  if (ambient_dim == 0 || trials == 0) throw InvalidInputError("ambient dimension and trials must be positive");
  const std::size_t target = k == 0 ? jl_target_dim(n, epsilon) : k;
  if (target > ambient_dim) throw InvalidInputError("target dimension exceeds ambient dimension");
}

std::size_t jl_target_dim(std::size_t n, double epsilon) {
  if (n < 2) throw InvalidInputError("jl_target_dim: need at least two points");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInputError("jl_target_dim: epsilon must lie in (0, 1)");
  return static_cast<std::size_t>(std::ceil(8.0 * std::log(static_cast<double>(n)) / (epsilon * epsilon)));
}

Tensor gaussian_projection(const Tensor& points, std::size_t k, Rng& rng) {
  require_matrix(points, "gaussian_projection");
  const std::size_t n = points.dim(0);
  const std::size_t d = points.dim(1);
  if (k == 0 || k > d) throw InvalidInputError("gaussian_projection: k must lie in [1, ambient_dim]");
  RowMatrix p(d, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal() * scale;
  Eigen::Map<const RowMatrix> x(points.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Tensor out({n, k});
  Eigen::Map<RowMatrix> y(out.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  y.noalias() = x * p;
  return out;
}

DistortionReport distortion_report(const Tensor& original, const Tensor& projected, double epsilon) {
  require_matrix(original, "distortion_report");
  require_matrix(projected, "distortion_report");
  const std::size_t n = original.dim(0);
  if (projected.dim(0) != n) throw DimensionError("distortion_report: point counts differ");
  if (n < 2) throw InvalidInputError("distortion_report: need at least two points");
  const std::size_t d = original.dim(1);
  const std::size_t k = projected.dim(1);

  DistortionReport rep;
  std::size_t within = 0;
  std::size_t pair_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++pair_id) {
      const double o = sq_dist(original.data() + i * d, original.data() + j * d, d);
      if (o == 0.0) {
        ++rep.excluded_duplicates;
        continue;
      }
      const double p = sq_dist(projected.data() + i * k, projected.data() + j * k, k);
      const double ratio = p / o;
      rep.max_deviation = std::max(rep.max_deviation, std::abs(ratio - 1.0));
      if (ratio >= 1.0 - epsilon && ratio <= 1.0 + epsilon) ++within;
      rep.rows.push_back(PairDistortion{pair_id, i, j, o, p, ratio});
    }
  }
  rep.pairs = rep.rows.size();
  rep.fraction_within = rep.pairs == 0 ? 1.0 : static_cast<double>(within) / static_cast<double>(rep.pairs);
  return rep;
}

void write_distortion_csv(std::ostream& os, const DistortionReport& report) {
  const auto old_precision = os.precision(17);
  os << "pair_id,original_sq_dist,projected_sq_dist,ratio\n";
  for (const auto& r : report.rows) {
    os << r.pair_id << ',' << r.original_sq_dist << ',' << r.projected_sq_dist << ',' << r.ratio << '\n';
  }
  os.precision(old_precision);
}

double row_map_ratio(const Tensor& a, const Tensor& b, std::size_t row) {
  require_matrix(a, "row_map_ratio");
  if (!a.same_shape(b) || a.dim(0) != a.dim(1)) throw DimensionError("row_map_ratio: expected equal D x D matrices");
  const std::size_t d = a.dim(0);
  if (row >= d) throw InvalidInputError("row_map_ratio: row out of range");
  const double frob = sq_dist(a.data(), b.data(), d * d);
  if (frob == 0.0) throw InvalidInputError("row_map_ratio: identical matrices");
  return static_cast<double>(d) * sq_dist(a.data() + row * d, b.data() + row * d, d) / frob;
}

RowMapStats row_map_distortion(const std::vector<Tensor>& matrices, Rng& rng, std::size_t trials) {
  if (matrices.size() < 2) throw InvalidInputError("row_map_distortion: need at least two matrices");
  const std::size_t d = matrices.front().rank() == 2 ? matrices.front().dim(0) : 0;
  for (const auto& m : matrices) {
    if (m.rank() != 2 || m.dim(0) != d || m.dim(1) != d) throw DimensionError("row_map_distortion: expected D x D");
  }
  RowMapStats st;
  double mean = 0.0;
  double m2 = 0.0;
  const std::size_t count = matrices.size();
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t i = rng.below(count);
    std::size_t j = rng.below(count - 1);
    if (j >= i) ++j;
    const std::size_t s = rng.below(d);
    const double frob = sq_dist(matrices[i].data(), matrices[j].data(), d * d);
    if (frob == 0.0) {
      ++st.skipped;
      continue;
    }
    const double ratio = row_map_ratio(matrices[i], matrices[j], s);
    ++st.draws;
    const double delta = ratio - mean;  // Welford
    mean += delta / static_cast<double>(st.draws);
    m2 += delta * (ratio - mean);
  }
  st.mean_ratio = mean;
  st.variance = st.draws > 1 ? m2 / static_cast<double>(st.draws - 1) : 0.0;
  return st;
}

}  // namespace emt
