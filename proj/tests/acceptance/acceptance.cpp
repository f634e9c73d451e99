// Acceptance suite: one line per criterion, "PASS"/"FAIL" plus the measured values.
//   emt_acceptance            run all criteria
//   emt_acceptance --only N   run criterion N (exit status reflects that criterion)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "emt/experiment.hpp"
#include "emt/mfea_rl.hpp"
#include "emt/projection.hpp"
#include "emt/stats.hpp"
#include "emt/training.hpp"
#include "synthetic.hpp"

using namespace emt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("emt_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 1 ------------------------------------------------------------------------
Outcome gradient_correctness() {
  Rng rng(101);
  ResidualNet vdsr(4, 3, 4);
  vdsr.init(rng, 1.0);
  Tensor x({3, 4}), target({3, 4, 4});
  for (double& v : x.values()) v = rng.uniform();
  for (double& v : target.values()) v = rng.uniform();
  const double e1 = gradient_check(vdsr, x, target, 100000, rng);

  SkillClassifier cls(4, 2, 1, 4);
  cls.init(rng);
  Tensor images({4, 4, 4});
  for (double& v : images.values()) v = rng.uniform();
  const std::vector<std::size_t> labels{0, 1, 1, 0};
  const double e2 = gradient_check(cls, images, labels, 100000, rng);
  return {e1 < 1e-4 && e2 < 1e-4, fmt("max rel err VDSR %.2e, classifier %.2e (< 1e-4)", e1, e2)};
}

// 2 ------------------------------------------------------------------------
Outcome zero_residual_identity() {
  Rng rng(102);
  const std::size_t d = 7;
  ResidualNet net(d, 4, 8);
  net.init(rng);
  net.zero_head();
  net.set_trained(true);
  std::size_t bad_rows = 0, bad_children = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Individual p1(std::vector<double>(d), 0, 2), p2(std::vector<double>(d), 1, 2);
    for (double& v : p1.genome) v = rng.uniform();
    for (double& v : p2.genome) v = rng.uniform();
    const Tensor x_new = residual_compose(p1.genome, vdsr_forward(net, p1.genome));
    for (std::size_t r = 0; r < d; ++r) {
      bad_rows += !std::equal(p1.genome.begin(), p1.genome.end(), x_new.values().begin() + static_cast<long>(r * d));
    }
    const auto cx = residual_crossover(p1, p2, net, 2.0, rng);
    bad_children += cx.fallback || cx.c1 != p1.genome || cx.c2 != p2.genome;
  }
  return {bad_rows == 0 && bad_children == 0,
          fmt("%d trials: %zu composed rows differ, %zu crossovers changed a parent", trials, bad_rows, bad_children)};
}

// 3 ------------------------------------------------------------------------
Outcome vdsr_training_progress() {
  int ok = 0;
  std::string ratios;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto pop = emt::testing::clustered_population(200, 8, 2, 0.15, rng);
    const auto pairs = build_residual_pairs(pop, rng);
    ResidualNet net(8, ResidualNet::kDefaultDepth, 16);
    net.init(rng);
    const auto losses = train_residual_net(net, pairs, TrainOptions::residual_defaults(), rng);
    const double ratio = losses.at(4) / losses.at(0);
    ok += ratio < 0.8;
    ratios += fmt("%s%.3f", ratios.empty() ? "" : " ", ratio);
  }
  return {ok >= 9, fmt("epoch5/epoch1 MSE < 0.8 on %d/10 seeds (need 9); ratios %s", ok, ratios.c_str())};
}

// 4 ------------------------------------------------------------------------
Outcome classifier_accuracy() {
  Rng rng(104);
  const auto data = emt::testing::separable_images(300, 8, 0.5, 0.2, rng);
  SkillClassifier cls(8, 2);
  cls.init(rng);
  const auto opts = TrainOptions::classifier_defaults();
  const auto res = train_classifier(cls, data, opts, rng);
  const double acc = res.val_accuracy.at(res.best_epoch - 1);
  return {acc >= 0.95 && res.val_accuracy.size() <= 50,
          fmt("validation accuracy %.3f at epoch %zu, %zu epochs run (patience %zu, max %zu)", acc, res.best_epoch,
              res.val_accuracy.size(), opts.patience, opts.epochs)};
}

// 5 ------------------------------------------------------------------------
Outcome jl_verification() {
  Rng rng(105);
  const std::size_t n = 100, ambient = 2500;
  const double eps = 0.5;
  Tensor pts({n, ambient});
  for (double& v : pts.values()) v = rng.normal();
  const std::size_t k = jl_target_dim(n, eps);
  const auto rep = distortion_report(pts, gaussian_projection(pts, k, rng), eps);
  return {rep.fraction_within >= 0.99 && rep.pairs == n * (n - 1) / 2,
          fmt("k = %zu, %.4f of %zu pairs within [0.5, 1.5] (need 0.99), max |ratio - 1| = %.3f", k,
              rep.fraction_within, rep.pairs, rep.max_deviation)};
}

// 6 ------------------------------------------------------------------------
Outcome row_map_unbiasedness() {
  Rng rng(106);
  std::vector<Tensor> ms;
  for (int i = 0; i < 50; ++i) {
    Tensor m({10, 10});
    for (double& v : m.values()) v = rng.uniform();
    ms.push_back(std::move(m));
  }
  const auto st = row_map_distortion(ms, rng, 10000);
  return {std::abs(st.mean_ratio - 1.0) <= 0.05 && st.draws == 10000,
          fmt("mean ratio %.4f over %zu draws (need 1 +- 0.05), variance %.4f", st.mean_ratio, st.draws,
              st.variance)};
}

// 7 ------------------------------------------------------------------------
double ulp_of(double x) {
  const double a = std::abs(x);
  return std::nextafter(a, INFINITY) - a;
}

Outcome sbx_conservation() {
  Rng rng(107);
  const std::size_t d = 10;
  const int events = 100000;
  std::size_t genes = 0, mismatched = 0, events_with_mismatch = 0, unrepresentable = 0;
  std::vector<double> p1(d), p2(d);
  for (int e = 0; e < events; ++e) {
    for (double& v : p1) v = rng.uniform();
    for (double& v : p2) v = rng.uniform();
    const auto [c1, c2] = sbx_crossover_unclamped(p1, p2, 2.0, rng);
    bool any = false;
    for (std::size_t i = 0; i < d; ++i) {
      ++genes;
      const double s = p1[i] + p2[i];
      if (c1[i] + c2[i] == s) continue;
      ++mismatched;
      any = true;
      // No pair of doubles with these magnitudes can sum exactly to s when s is
      // not a multiple of the finer of the two child spacings.
      if (std::fmod(s, std::min(ulp_of(c1[i]), ulp_of(c2[i]))) != 0.0) ++unrepresentable;
    }
    events_with_mismatch += any;
  }
  return {mismatched == 0,
          fmt("%zu of %zu genes (%zu of %d events) not bitwise conserved; %zu of those have no representable "
              "child pair summing to p1 + p2",
              mismatched, genes, events_with_mismatch, events, unrepresentable)};
}

// 8 ------------------------------------------------------------------------
double enumerate_p(std::size_t n, std::size_t m, double u_obs) {
  std::vector<int> pick(n + m, 0);
  std::fill(pick.end() - static_cast<long>(n), pick.end(), 1);
  std::uint64_t le = 0, ge = 0, total = 0;
  do {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < pick.size(); ++i) rank_sum += pick[i] ? static_cast<double>(i + 1) : 0.0;
    const double u = rank_sum - static_cast<double>(n * (n + 1)) / 2.0;
    le += u <= u_obs;
    ge += u >= u_obs;
    ++total;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

Outcome wilcoxon_exactness() {
  Rng rng(108);
  std::size_t checked = 0, mismatches = 0, not_exact = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t m = 1; m <= 6; ++m) {
      for (int s = 0; s < 100; ++s) {
        // Distinct random integers, so the exact (tie-free) branch applies.
        std::vector<double> pool(200);
        std::iota(pool.begin(), pool.end(), -100.0);
        rng.shuffle(pool);
        const std::vector<double> a(pool.begin(), pool.begin() + static_cast<long>(n));
        const std::vector<double> b(pool.begin() + static_cast<long>(n), pool.begin() + static_cast<long>(n + m));
        const auto r = wilcoxon_rank_sum(a, b);
        ++checked;
        not_exact += !r.exact;
        mismatches += r.p_value != enumerate_p(n, m, r.u_statistic);
      }
    }
  }
  return {mismatches == 0 && not_exact == 0,
          fmt("%zu samples over all 36 size pairs n, m <= 6: %zu p-value mismatches, %zu not in exact mode", checked,
              mismatches, not_exact)};
}

// 9 ------------------------------------------------------------------------
Outcome determinism() {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::string common =
      std::string(EMT_RUN_EXE) +
      " --problem cec17:P1,P4 --algo mfea,mfea-rl:full --seeds 2 --max-evals 3000 --dims 10 --vdsr-hidden 16"
      " --deterministic --out ";
  const int ra = std::system((common + a.string() + " > /dev/null").c_str());
  const int rb = std::system((common + b.string() + " > /dev/null").c_str());
  if (ra != 0 || rb != 0) return {false, fmt("emt_run exit status %d / %d", ra, rb)};
  const std::string ca = slurp(a / "convergence.csv"), cb = slurp(b / "convergence.csv");
  const bool same = !ca.empty() && ca == cb;
  const std::size_t lines = static_cast<std::size_t>(std::count(ca.begin(), ca.end(), '\n'));
  fs::remove_all(a);
  fs::remove_all(b);
  return {same, fmt("two --deterministic invocations (P1, P4 x mfea, mfea-rl:full x 2 seeds): convergence.csv %s "
                    "(%zu lines, %zu bytes)",
                    same ? "byte-identical" : "DIFFERS", lines, ca.size())};
}

// 10 -----------------------------------------------------------------------
Outcome optimization_sanity() {
  ExperimentConfig c;
  for (const char* id : {"P1", "P4"}) {
    ProblemSpec s;
    s.problem_id = id;
    c.problems.push_back(s);
  }
  c.algorithms = {"random-search", "mfea", "mfea-rl:full"};
  c.base_algorithm = "random-search";
  c.reps = 10;
  c.max_evals = 20000;
  c.dims = {10};
  c.vdsr_hidden = 16;
  c.output_dir = scratch("sanity");
  const auto res = run_experiment(c);

  std::size_t plus = 0, expected = 0;
  std::string signs;
  for (const auto& row : res.summary.rows) {
    if (!row.vs_base) continue;
    ++expected;
    plus += row.vs_base->decision == Decision::Plus;
    signs += fmt("%s %s T%zu %c (p=%.1e); ", row.algorithm.c_str(), row.problem.c_str(), row.task + 1,
                 to_symbol(row.vs_base->decision), row.vs_base->p_value);
  }
  std::size_t rl_runs = 0, non_monotone = 0, retrains = 0, eval_delta = 0;
  const std::size_t reps = 10, algos = 3;
  for (std::size_t i = 0; i < res.traces.size(); ++i) {
    if ((i / reps) % algos != 2) continue;  // problem-major, then algorithm, then rep
    const auto& tr = res.traces[i];
    ++rl_runs;
    for (std::size_t g = 1; g < tr.points.size(); ++g) {
      for (std::size_t t = 0; t < tr.points[g].best.size(); ++t) non_monotone += tr.points[g].best[t] > tr.points[g - 1].best[t];
    }
    for (const auto& r : tr.retrains) {
      ++retrains;
      eval_delta += r.evals_after - r.evals_before;
    }
  }
  fs::remove_all(c.output_dir);
  const bool pass = expected == 8 && plus == 8 && rl_runs == 20 && non_monotone == 0 && eval_delta == 0 && retrains > 0;
  return {pass, fmt("%zu/%zu comparisons vs random-search are '+'; MFEA-RL: %zu runs, %zu best-so-far increases, "
                    "%zu retrains with total eval delta %zu; %s",
                    plus, expected, rl_runs, non_monotone, retrains, eval_delta, signs.c_str())};
}

// 11 -----------------------------------------------------------------------
Outcome ablation_harness() {
  ExperimentConfig c;
  for (const char* id : {"P3", "P4", "P8", "P9"}) {
    ProblemSpec s;
    s.problem_id = id;
    c.problems.push_back(s);
  }
  c.algorithms = {"mfea-rl:full", "mfea-rl:vdsr", "mfea-rl:res"};
  c.reps = 3;
  c.max_evals = 20000;
  c.dims = {10};
  c.vdsr_hidden = 16;
  c.output_dir = scratch("ablation");
  const auto res = run_experiment(c);

  // Comparable traces: every run of a problem samples the same evaluation grid.
  std::size_t incomparable = 0, incomplete = 0;
  const std::size_t per_problem = c.algorithms.size() * c.reps;
  for (std::size_t i = 0; i < res.traces.size(); ++i) {
    const auto& ref = res.traces[(i / per_problem) * per_problem];
    const auto& tr = res.traces[i];
    incomplete += tr.evaluations > c.max_evals || tr.evaluations + c.population_size <= c.max_evals;
    bool same = tr.points.size() == ref.points.size();
    for (std::size_t g = 0; same && g < tr.points.size(); ++g) same = tr.points[g].evals == ref.points[g].evals;
    incomparable += !same;
  }
  const std::string table = render_summary_table(res.summary);
  const bool footer = table.find("+/-/=") != std::string::npos;
  const bool csv_footer = slurp(c.output_dir / "summary.csv").find("+/-/=,") != std::string::npos;
  fs::remove_all(c.output_dir);
  std::cout << table;
  const bool pass = res.traces.size() == 36 && incomparable == 0 && incomplete == 0 && footer && csv_footer;
  return {pass, fmt("%zu runs (4 problems x 3 modes x 3 seeds), %zu incomplete, %zu with a differing eval grid; "
                    "+/-/= footer in table %s, in summary.csv %s",
                    res.traces.size(), incomplete, incomparable, footer ? "yes" : "no", csv_footer ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {2, "zero-residual identity", zero_residual_identity},
      {3, "VDSR training progress", vdsr_training_progress},
      {4, "classifier accuracy", classifier_accuracy},
      {5, "JL verification", jl_verification},
      {6, "row-map unbiasedness", row_map_unbiasedness},
      {7, "SBX conservation", sbx_conservation},
      {8, "Wilcoxon exactness", wilcoxon_exactness},
      {9, "determinism", determinism},
      {10, "optimization sanity", optimization_sanity},
      {11, "ablation harness", ablation_harness},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: emt_acceptance [--only N]\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << ", "
              << fmt("%.1f s", secs) << "): " << out.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
