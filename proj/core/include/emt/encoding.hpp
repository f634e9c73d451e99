#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emt/functions.hpp"

namespace emt {

/// Marker for a factorial cost that was never evaluated. Orders after every finite cost.
inline constexpr double kUnsetCost = std::numeric_limits<double>::infinity();

/// One optimization task: f(x) = base(rotation * (x - shift)) over a box.
struct Task {
  std::size_t id = 0;
  std::size_t dim = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  FunctionKind base_function = FunctionKind::Sphere;
  std::vector<double> shift;
  std::vector<double> rotation;  // dim x dim, row-major

  /// Throws InvalidInputError when bounds, shift or rotation break the task invariants.
  void validate(double orthogonality_tol = 1e-9) const;

  /// Task-space point where the base function attains its canonical optimum.
  std::vector<double> optimum_point() const;
};

struct MultitaskProblem {
  std::string name;
  std::vector<Task> tasks;

  std::size_t num_tasks() const { return tasks.size(); }
  /// D_max: the largest task dimension, which is the unified genome length.
  std::size_t unified_dim() const;
  void validate() const;
};

struct Individual {
  std::vector<double> genome;
  std::size_t skill_factor = 0;
  std::vector<double> factorial_costs;                      // kUnsetCost when not evaluated
  std::vector<std::optional<std::size_t>> factorial_ranks;  // 1-based
  double scalar_fitness = 0.0;

  Individual() = default;
  Individual(std::vector<double> g, std::size_t skill, std::size_t num_tasks)
      : genome(std::move(g)),
        skill_factor(skill),
        factorial_costs(num_tasks, kUnsetCost),
        factorial_ranks(num_tasks) {}

  double skill_cost() const { return factorial_costs.at(skill_factor); }
};

struct Population {
  std::vector<Individual> members;
  std::size_t generation = 0;

  std::size_t size() const { return members.size(); }
};

/// Affine map of the first task.dim unified coordinates into the task box.
std::vector<double> decode(std::span<const double> genome, const Task& task);

/// Ranks 1..N by ascending cost on `task_id`; unset costs last; ties by member index.
std::vector<std::size_t> factorial_ranks(std::span<const Individual> members, std::size_t task_id);

/// 1 / (best rank over the set ranks). Throws when no rank is set.
double scalar_fitness(std::span<const std::optional<std::size_t>> ranks);

/// Recomputes factorial ranks on every task and the scalar fitness of every member.
void update_ranks_and_fitness(std::span<Individual> members, std::size_t num_tasks);

}  // namespace emt
