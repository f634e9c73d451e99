#include "emt/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emt/error.hpp"

namespace emt {

void Task::validate(double orthogonality_tol) const {
  if (dim == 0) throw InvalidInputError("task: dimension must be positive");
  if (lower.size() != dim || upper.size() != dim || shift.size() != dim || rotation.size() != dim * dim) {
    throw DimensionError("task: bound/shift/rotation sizes do not match dim");
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(lower[i] < upper[i])) throw InvalidInputError("task: lower bound must be below upper bound");
    if (shift[i] < lower[i] || shift[i] > upper[i]) throw InvalidInputError("task: shift outside bounds");
  }
  // R^T R = I
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      double dot = 0.0;
      for (std::size_t r = 0; r < dim; ++r) dot += rotation[r * dim + a] * rotation[r * dim + b];
      const double expected = a == b ? 1.0 : 0.0;
      if (std::abs(dot - expected) >= orthogonality_tol) throw InvalidInputError("task: rotation is not orthogonal");
    }
  }
}

std::vector<double> Task::optimum_point() const {
  // x* = shift + R^T z*, with z* the canonical optimum of the base function.
  const double c = canonical_optimum_coordinate(base_function);
  std::vector<double> x = shift;
  if (c == 0.0) return x;
  for (std::size_t col = 0; col < dim; ++col) {
    double s = 0.0;
    for (std::size_t row = 0; row < dim; ++row) s += rotation[row * dim + col] * c;
    x[col] += s;
  }
  return x;
}

std::size_t MultitaskProblem::unified_dim() const {
  std::size_t d = 0;
  for (const auto& t : tasks) d = std::max(d, t.dim);
  return d;
}

void MultitaskProblem::validate() const {
  if (tasks.size() < 2) throw InvalidInputError("multitask problem needs at least two tasks");
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    if (tasks[j].id != j) throw InvalidInputError("task ids must be 0..T-1 in order");
    tasks[j].validate();
  }
}

std::vector<double> decode(std::span<const double> genome, const Task& task) {
  if (genome.size() < task.dim) throw DimensionError("decode: genome shorter than task dimension");
  std::vector<double> y(task.dim);
  for (std::size_t i = 0; i < task.dim; ++i) y[i] = task.lower[i] + genome[i] * (task.upper[i] - task.lower[i]);
  return y;
}

std::vector<std::size_t> factorial_ranks(std::span<const Individual> members, std::size_t task_id) {
  if (members.empty()) throw EmptyInputError("factorial_ranks: empty population");
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable sort on cost keeps lower member index first among ties, including unset (+inf).
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return members[a].factorial_costs.at(task_id) < members[b].factorial_costs.at(task_id);
  });
  std::vector<std::size_t> ranks(members.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos + 1;
  return ranks;
}

double scalar_fitness(std::span<const std::optional<std::size_t>> ranks) {
  std::optional<std::size_t> best;
  for (const auto& r : ranks) {
    if (r && (!best || *r < *best)) best = r;
  }
  if (!best) throw InvalidInputError("scalar_fitness: no factorial rank set");
  return 1.0 / static_cast<double>(*best);
}

void update_ranks_and_fitness(std::span<Individual> members, std::size_t num_tasks) {
  for (auto& m : members) m.factorial_ranks.assign(num_tasks, std::nullopt);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    const auto ranks = factorial_ranks(members, t);
    for (std::size_t i = 0; i < members.size(); ++i) members[i].factorial_ranks[t] = ranks[i];
  }
  for (auto& m : members) m.scalar_fitness = scalar_fitness(m.factorial_ranks);
}

}  // namespace emt
