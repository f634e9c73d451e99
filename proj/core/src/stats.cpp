#include "emt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "emt/error.hpp"

namespace emt {

namespace {

using Count = unsigned __int128;

/// counts[u] = number of size-n subsets of {1..n+m} whose Mann-Whitney U equals u.
std::vector<Count> u_distribution(std::size_t n, std::size_t m) {
  // Recurrence f(n, m, u) = f(n - 1, m, u - m) + f(n, m - 1, u), iterated over n with m growing.
  const std::size_t small = std::min(n, m);
  const std::size_t large = std::max(n, m);
  // prev[j][u] holds f(i - 1, j, u) for j = 0..large.
  std::vector<std::vector<Count>> prev(large + 1, std::vector<Count>(1, 1));
  for (std::size_t i = 1; i <= small; ++i) {
    std::vector<std::vector<Count>> cur(large + 1);
    cur[0] = {1};
    for (std::size_t j = 1; j <= large; ++j) {
      std::vector<Count> f(i * j + 1, 0);
      for (std::size_t u = 0; u < cur[j - 1].size(); ++u) f[u] += cur[j - 1][u];
      for (std::size_t u = 0; u < prev[j].size(); ++u) f[u + j] += prev[j][u];
      cur[j] = std::move(f);
    }
    prev = std::move(cur);
  }
  return prev[large];
}

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double normal_two_sided(double z) { return std::erfc(z / std::sqrt(2.0)); }

std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

}  // namespace

char to_symbol(Decision d) {
  switch (d) {
    case Decision::Plus: return '+';
    case Decision::Minus: return '-';
    case Decision::Equal: return '=';
  }
  return '=';
}

double exact_rank_sum_p(std::size_t n, std::size_t m, std::uint64_t u) {
  if (n == 0 || m == 0) throw EmptyInputError("exact_rank_sum_p: empty sample");
  if (u > static_cast<std::uint64_t>(n) * m) throw InvalidInputError("exact_rank_sum_p: U out of range");
  const auto counts = u_distribution(n, m);
  Count lower = 0;
  Count total = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    total += counts[k];
    if (k <= u) lower += counts[k];
  }
  Count upper = 0;
  for (std::size_t k = u; k < counts.size(); ++k) upper += counts[k];
  const Count tail = std::min(lower, upper);
  if (2 * tail >= total) return 1.0;
  return static_cast<double>(2 * tail) / static_cast<double>(total);
}

ComparisonResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.empty() || b.empty()) throw EmptyInputError("wilcoxon_rank_sum: empty sample");
  for (double v : a) {
    if (std::isnan(v)) throw InvalidInputError("wilcoxon_rank_sum: NaN in sample");
  }
  for (double v : b) {
    if (std::isnan(v)) throw InvalidInputError("wilcoxon_rank_sum: NaN in sample");
  }
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t total = n + m;

  std::vector<std::pair<double, bool>> pooled;  // (value, from a)
  pooled.reserve(total);
  for (double v : a) pooled.emplace_back(v, true);
  for (double v : b) pooled.emplace_back(v, false);
  std::stable_sort(pooled.begin(), pooled.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  bool ties = false;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    if (j - i > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second) rank_sum_a += midrank;
    }
    i = j;
  }

  ComparisonResult res;
  res.alpha = alpha;
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  res.u_statistic = rank_sum_a - dn * (dn + 1.0) / 2.0;

  if (std::min(n, m) <= 8 && !ties) {
    res.exact = true;
    res.p_value = exact_rank_sum_p(n, m, static_cast<std::uint64_t>(std::llround(res.u_statistic)));
  } else {
    const double dt = static_cast<double>(total);
    const double var = dn * dm / 12.0 * ((dt + 1.0) - tie_term / (dt * (dt - 1.0)));
    if (var <= 0.0) {
      res.p_value = 1.0;
    } else {
      const double z = std::max(0.0, (std::abs(res.u_statistic - dn * dm / 2.0) - 0.5) / std::sqrt(var));
      res.p_value = std::min(1.0, normal_two_sided(z));
    }
  }

  const double ma = mean_of(a);
  const double mb = mean_of(b);
  res.direction = ma < mb ? LowerMean::A : (mb < ma ? LowerMean::B : LowerMean::Tie);
  if (res.p_value < alpha && res.direction != LowerMean::Tie) {
    res.decision = res.direction == LowerMean::A ? Decision::Plus : Decision::Minus;
  }
  return res;
}

SummaryTable summarize(std::span<const RunResult> runs, const std::string& base_algorithm, double alpha) {
  if (runs.empty()) throw EmptyInputError("summarize: no runs");
  SummaryTable table;
  table.base_algorithm = base_algorithm;
  table.alpha = alpha;
  table.algorithms.push_back(base_algorithm);
  std::vector<std::string> problems;
  for (const auto& r : runs) {
    if (std::find(table.algorithms.begin(), table.algorithms.end(), r.algorithm) == table.algorithms.end()) {
      table.algorithms.push_back(r.algorithm);
    }
    if (std::find(problems.begin(), problems.end(), r.problem) == problems.end()) problems.push_back(r.problem);
  }

  // (problem, algorithm) -> seed -> run
  std::map<std::pair<std::string, std::string>, std::map<std::uint64_t, const RunResult*>> cells;
  for (const auto& r : runs) {
    auto& slot = cells[{r.problem, r.algorithm}];
    if (!slot.emplace(r.seed, &r).second) {
      throw InvalidInputError("summarize: duplicate run for " + r.problem + "/" + r.algorithm + "/seed " +
                              std::to_string(r.seed));
    }
  }

  std::vector<std::string> missing;
  for (const auto& p : problems) {
    std::set<std::uint64_t> seeds;
    for (const auto& a : table.algorithms) {
      for (const auto& [s, _] : cells[{p, a}]) seeds.insert(s);
    }
    for (const auto& a : table.algorithms) {
      const auto& have = cells[{p, a}];
      for (std::uint64_t s : seeds) {
        if (!have.contains(s)) missing.push_back(p + "/" + a + "/seed " + std::to_string(s));
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "summarize: mismatched run sets, missing cells:";
    for (const auto& m : missing) msg += " " + m;
    throw InvalidInputError(msg);
  }

  for (const auto& a : table.algorithms) {
    if (a != base_algorithm) table.totals[a];
  }
  for (const auto& p : problems) {
    const auto& base_runs = cells[{p, base_algorithm}];
    std::size_t tasks = base_runs.begin()->second->final_best.size();
    for (const auto& a : table.algorithms) {
      for (const auto& [s, r] : cells[{p, a}]) {
        if (r->final_best.size() != tasks) throw InvalidInputError("summarize: task count differs within " + p);
      }
    }
    for (std::size_t t = 0; t < tasks; ++t) {
      std::vector<double> base_vals;
      for (const auto& [s, r] : base_runs) base_vals.push_back(r->final_best[t]);
      for (const auto& a : table.algorithms) {
        std::vector<double> vals;
        for (const auto& [s, r] : cells[{p, a}]) vals.push_back(r->final_best[t]);
        SummaryRow row;
        row.problem = p;
        row.task = t;
        row.algorithm = a;
        row.n_runs = vals.size();
        row.mean = mean_of(vals);
        double ss = 0.0;
        for (double v : vals) ss += (v - row.mean) * (v - row.mean);
        row.std = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
        if (a != base_algorithm) {
          row.vs_base = wilcoxon_rank_sum(vals, base_vals, alpha);
          auto& tot = table.totals[a];
          switch (row.vs_base->decision) {
            case Decision::Plus: ++tot.plus; break;
            case Decision::Minus: ++tot.minus; break;
            case Decision::Equal: ++tot.equal; break;
          }
        }
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

void write_summary_csv(std::ostream& os, const SummaryTable& table) {
  const auto old_precision = os.precision(17);
  os << "problem,task,algorithm,mean,std,n_runs,wilcoxon_vs(" << table.base_algorithm << "),sign\n";
  for (const auto& r : table.rows) {
    os << r.problem << ',' << r.task << ',' << r.algorithm << ',' << r.mean << ',' << r.std << ',' << r.n_runs << ',';
    if (r.vs_base) os << r.vs_base->p_value << ',' << to_symbol(r.vs_base->decision);
    else os << ',';
    os << '\n';
  }
  for (const auto& a : table.algorithms) {
    auto it = table.totals.find(a);
    if (it == table.totals.end()) continue;
    os << "+/-/=,," << a << ",,,,," << it->second.plus << '/' << it->second.minus << '/' << it->second.equal << '\n';
  }
  os.precision(old_precision);
}

std::string render_summary_table(const SummaryTable& table) {
  const bool cmp = table.has_comparisons();
  std::vector<std::string> header{"Problem", "Task"};
  for (const auto& a : table.algorithms) header.push_back(a);

  std::vector<std::vector<std::string>> lines;
  std::map<std::pair<std::string, std::size_t>, std::size_t> index;
  for (const auto& r : table.rows) {
    auto key = std::make_pair(r.problem, r.task);
    auto [it, fresh] = index.emplace(key, lines.size());
    if (fresh) {
      std::vector<std::string> line(header.size());
      line[0] = r.problem;
      line[1] = "T" + std::to_string(r.task + 1);
      lines.push_back(std::move(line));
    }
    const auto col = static_cast<std::size_t>(
        std::find(table.algorithms.begin(), table.algorithms.end(), r.algorithm) - table.algorithms.begin());
    std::string cell = format_sci(r.mean) + " (" + format_sci(r.std) + ")";
    if (cmp && r.vs_base) cell += std::string(" ") + to_symbol(r.vs_base->decision);
    lines[it->second][2 + col] = std::move(cell);
  }
  if (cmp) {
    std::vector<std::string> footer(header.size());
    footer[0] = "+/-/=";
    for (std::size_t c = 0; c < table.algorithms.size(); ++c) {
      auto it = table.totals.find(table.algorithms[c]);
      if (it == table.totals.end()) {
        footer[2 + c] = "base";
        continue;
      }
      footer[2 + c] = std::to_string(it->second.plus) + "/" + std::to_string(it->second.minus) + "/" +
                      std::to_string(it->second.equal);
    }
    lines.push_back(std::move(footer));
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& l : lines) width[c] = std::max(width[c], l[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& l) {
    for (std::size_t c = 0; c < l.size(); ++c) {
      os << l[c] << std::string(width[c] - l[c].size(), ' ');
      os << (c + 1 < l.size() ? "  " : "\n");
    }
  };
  auto rule = [&] {
    std::size_t total = 0;
    for (std::size_t w : width) total += w + 2;
    os << std::string(total - 2, '-') << '\n';
  };
  emit(header);
  rule();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (cmp && i + 1 == lines.size()) rule();
    emit(lines[i]);
  }
  if (cmp) {
    os << "Wilcoxon rank-sum, two-sided, alpha " << table.alpha;
    os << "; signs compare each algorithm against " << table.base_algorithm << " (+ better, - worse, = no difference)\n";
  }
  return os.str();
}

}  // namespace emt
