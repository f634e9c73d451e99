#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emt {

enum class Decision { Plus, Minus, Equal };
enum class LowerMean { A, B, Tie };

char to_symbol(Decision d);

struct ComparisonResult {
  double p_value = 1.0;
  Decision decision = Decision::Equal;
  double alpha = 0.05;
  LowerMean direction = LowerMean::Tie;
  double u_statistic = 0.0;  // Mann-Whitney U of sample a
  bool exact = false;
};

/// Two-sided Wilcoxon rank-sum test with midranks. Exact null distribution
/// when min(n, m) <= 8 and there are no ties, normal approximation with tie
/// and continuity correction otherwise. Plus means `a` is significantly
/// better (lower mean) than `b` under minimization.
ComparisonResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

/// Exact two-sided p-value for U computed from integer subset counts:
/// min(1, 2 min(#{U' <= u}, #{U' >= u}) / C(n + m, n)).
double exact_rank_sum_p(std::size_t n, std::size_t m, std::uint64_t u);

/// Final per-task results of one run.
struct RunResult {
  std::string algorithm;
  std::string problem;
  std::uint64_t seed = 0;
  std::vector<double> final_best;
};

struct SummaryRow {
  std::string problem;
  std::size_t task = 0;
  std::string algorithm;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::size_t n_runs = 0;
  std::optional<ComparisonResult> vs_base;  // empty for the base algorithm
};

struct SignTotals {
  std::size_t plus = 0;
  std::size_t minus = 0;
  std::size_t equal = 0;
};

struct SummaryTable {
  std::string base_algorithm;
  double alpha = 0.05;
  std::vector<std::string> algorithms;  // base first, then first-seen order
  std::vector<SummaryRow> rows;         // ordered by problem, task, algorithm
  std::map<std::string, SignTotals> totals;
  bool has_comparisons() const { return algorithms.size() > 1; }
};

/// Per (problem, task, algorithm) statistics; each non-base algorithm is
/// compared against the base with wilcoxon_rank_sum(algorithm, base).
/// Throws InvalidInputError listing missing cells when the algorithms were not
/// run on the same problems and seeds.
SummaryTable summarize(std::span<const RunResult> runs, const std::string& base_algorithm, double alpha = 0.05);

/// problem,task,algorithm,mean,std,n_runs,wilcoxon_vs(<base>),sign plus a totals row per algorithm.
void write_summary_csv(std::ostream& os, const SummaryTable& table);

/// Fixed-width table: one line per problem/task, "mean (std) sign" per
/// algorithm and a closing "+/-/=" line.
std::string render_summary_table(const SummaryTable& table);

}  // namespace emt
