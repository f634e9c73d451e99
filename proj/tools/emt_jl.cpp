// Distance-preservation report for Gaussian projections and random row selection.
#include <cmath>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "emt/projection.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Johnson-Lindenstrauss and row-selection distortion report", "emt_jl"};
  std::size_t n = 100;
  std::size_t dim = 50;
  double epsilon = 0.5;
  std::size_t k = 0;
  std::uint64_t seed = 1;
  std::size_t draws = 10'000;
  std::string csv;
  app.add_option("--n", n, "number of points")->check(CLI::Range(2, 1 << 20));
  app.add_option("--dim", dim, "matrix side D; points live in D*D dimensions")->check(CLI::PositiveNumber);
  app.add_option("--epsilon", epsilon, "distortion tolerance in (0, 1)");
  app.add_option("--k", k, "projection dimension (default ceil(8 ln n / eps^2))");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--draws", draws, "row-selection draws")->check(CLI::PositiveNumber);
  app.add_option("--csv", csv, "write per-pair distortions to this file");
  CLI11_PARSE(app, argc, argv);

  try {
    emt::JlConfig cfg;
    cfg.n = n;
    cfg.ambient_dim = dim * dim;
    cfg.epsilon = epsilon;
    cfg.k = k;
    cfg.validate();
    const std::size_t target = k == 0 ? emt::jl_target_dim(n, epsilon) : k;

    emt::Rng rng(seed);
    emt::Tensor points({n, dim * dim});
    for (double& v : points.values()) v = rng.normal();
    const auto projected = emt::gaussian_projection(points, target, rng);
    const auto report = emt::distortion_report(points, projected, epsilon);

    std::cout << "gaussian projection: n=" << n << " ambient=" << dim * dim << " k=" << target << " eps=" << epsilon
              << '\n';
    std::cout << "  pairs " << report.pairs << ", within [1-eps, 1+eps]: " << report.fraction_within
              << ", max |ratio-1|: " << report.max_deviation << '\n';

    std::vector<emt::Tensor> mats;
    for (std::size_t i = 0; i < n; ++i) {
      emt::Tensor m({dim, dim});
      std::copy_n(points.data() + i * dim * dim, dim * dim, m.data());
      mats.push_back(std::move(m));
    }
    const auto rows = emt::row_map_distortion(mats, rng, draws);
    std::cout << "row selection: draws " << rows.draws << ", mean D*|drow|^2/|dX|_F^2 = " << rows.mean_ratio
              << ", variance " << rows.variance << '\n';

    if (!csv.empty()) {
      std::ofstream out(csv);
      if (!out) {
        std::cerr << "emt_jl: cannot write " << csv << '\n';
        return 1;
      }
      emt::write_distortion_csv(out, report);
    }
  } catch (const std::exception& e) {
    std::cerr << "emt_jl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
