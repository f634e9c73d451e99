#include "emt/mfea.hpp"

#include <algorithm>
#include <numeric>

#include "emt/error.hpp"

namespace emt {

void MfeaConfig::validate() const {
  if (population_size == 0 || population_size % 2 != 0) {
    throw InvalidInputError("population size must be a positive even number");
  }
  if (!(rmp >= 0.0 && rmp <= 1.0)) throw InvalidInputError("rmp must lie in [0, 1]");
  if (sbx_eta < 0.0 || mutation_eta < 0.0) throw InvalidInputError("distribution indices must be non-negative");
  if (mutation_rate && !(*mutation_rate >= 0.0 && *mutation_rate <= 1.0)) {
    throw InvalidInputError("mutation rate must lie in [0, 1]");
  }
  if (max_evals < population_size) throw InvalidInputError("evaluation budget is smaller than the population");
}

std::vector<std::size_t> selection_order(std::span<Individual> pool, std::size_t n, std::size_t num_tasks) {
  if (pool.size() < n) throw InvalidInputError("selection pool smaller than target population size");
  update_ranks_and_fitness(pool, num_tasks);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pool[a].scalar_fitness != pool[b].scalar_fitness) return pool[a].scalar_fitness > pool[b].scalar_fitness;
    return pool[a].skill_cost() < pool[b].skill_cost();
  });
  order.resize(n);
  return order;
}

Population select_next_generation(std::vector<Individual> pool, std::size_t n, std::size_t num_tasks) {
  const auto order = selection_order(pool, n, num_tasks);
  Population next;
  next.members.reserve(n);
  for (std::size_t i : order) next.members.push_back(std::move(pool[i]));
  update_ranks_and_fitness(next.members, num_tasks);
  return next;
}

namespace detail {

BestTracker::BestTracker(std::size_t num_tasks, std::size_t dim)
    : best_(num_tasks, kUnsetCost), genomes_(num_tasks, std::vector<double>(dim, 0.0)) {}

void BestTracker::observe(const Individual& ind) {
  const std::size_t t = ind.skill_factor;
  const double c = ind.factorial_costs.at(t);
  if (c < best_[t]) {
    best_[t] = c;
    genomes_[t] = ind.genome;
  }
}

Population initial_population(Evaluator& eval, std::size_t n, Rng& rng) {
  const std::size_t t = eval.problem().num_tasks();
  const std::size_t d = eval.problem().unified_dim();
  Population pop;
  pop.members.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> g(d);
    for (double& v : g) v = rng.uniform();
    pop.members.emplace_back(std::move(g), i % t, t);
  }
  evaluate_on_skill(pop.members, eval);
  update_ranks_and_fitness(pop.members, t);
  return pop;
}

void evaluate_on_skill(std::span<Individual> members, Evaluator& eval) {
  for (auto& m : members) m.factorial_costs.at(m.skill_factor) = eval(m.genome, m.skill_factor);
}

void record_point(RunTrace& trace, std::size_t generation, std::uint64_t evals, const BestTracker& best) {
  trace.points.push_back(TracePoint{generation, evals, best.best()});
}

std::vector<std::pair<std::size_t, std::size_t>> random_pairs(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i + 1 < n; i += 2) pairs.emplace_back(idx[i], idx[i + 1]);
  return pairs;
}

}  // namespace detail

RunTrace run_mfea(const MultitaskProblem& problem, const MfeaConfig& config, std::uint64_t seed) {
  config.validate();
  problem.validate();
  const std::size_t n = config.population_size;
  const std::size_t num_tasks = problem.num_tasks();
  const std::size_t dim = problem.unified_dim();
  const double rate = config.gene_mutation_rate(dim);

  Rng rng(seed);
  Evaluator eval(problem);
  detail::BestTracker best(num_tasks, dim);
  RunTrace trace;

  Population pop = detail::initial_population(eval, n, rng);
  for (const auto& m : pop.members) best.observe(m);
  detail::record_point(trace, 0, eval.evaluations(), best);

  while (eval.evaluations() + n <= config.max_evals) {
    const std::size_t gen = pop.generation + 1;
    GenerationEvent ev;
    ev.generation = gen;
    std::vector<Individual> offspring;
    offspring.reserve(n);
    for (const auto& [a, b] : detail::random_pairs(n, rng)) {
      const Individual& pa = pop.members[a];
      const Individual& pb = pop.members[b];
      if (assortative_mating(pa, pb, config.rmp, rng) == MatingDecision::Crossover) {
        ++ev.crossovers;
        auto [c1, c2] = sbx_crossover(pa.genome, pb.genome, config.sbx_eta, rng);
        // Vertical cultural transmission: each child imitates a random parent.
        const std::size_t s1 = rng.uniform() < 0.5 ? pa.skill_factor : pb.skill_factor;
        const std::size_t s2 = rng.uniform() < 0.5 ? pa.skill_factor : pb.skill_factor;
        offspring.emplace_back(std::move(c1), s1, num_tasks);
        offspring.emplace_back(std::move(c2), s2, num_tasks);
      } else {
        ++ev.mutations;
        offspring.emplace_back(polynomial_mutation(pa.genome, config.mutation_eta, rate, rng), pa.skill_factor,
                               num_tasks);
        offspring.emplace_back(polynomial_mutation(pb.genome, config.mutation_eta, rate, rng), pb.skill_factor,
                               num_tasks);
      }
    }
    for (auto& c : offspring) {
      if (boundary_repair(c.genome, rng)) ++ev.repaired;
    }
    detail::evaluate_on_skill(offspring, eval);
    for (const auto& c : offspring) best.observe(c);

    std::vector<Individual> pool = std::move(pop.members);
    pool.insert(pool.end(), std::make_move_iterator(offspring.begin()), std::make_move_iterator(offspring.end()));
    pop = select_next_generation(std::move(pool), n, num_tasks);
    pop.generation = gen;

    detail::record_point(trace, gen, eval.evaluations(), best);
    ev.evals = eval.evaluations();
    ev.best = best.best();
    trace.generations.push_back(std::move(ev));
  }

  trace.final_best = best.best();
  trace.best_genomes = best.genomes();
  trace.evaluations = eval.evaluations();
  return trace;
}

RunTrace run_random_search(const MultitaskProblem& problem, const MfeaConfig& config, std::uint64_t seed) {
  config.validate();
  problem.validate();
  const std::size_t n = config.population_size;
  const std::size_t num_tasks = problem.num_tasks();
  const std::size_t dim = problem.unified_dim();
  Rng rng(seed);
  Evaluator eval(problem);
  detail::BestTracker best(num_tasks, dim);
  RunTrace trace;
  std::size_t gen = 0;
  while (eval.evaluations() + n <= config.max_evals) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> g(dim);
      for (double& v : g) v = rng.uniform();
      Individual ind(std::move(g), i % num_tasks, num_tasks);
      ind.factorial_costs[ind.skill_factor] = eval(ind.genome, ind.skill_factor);
      best.observe(ind);
    }
    detail::record_point(trace, gen, eval.evaluations(), best);
    GenerationEvent ev;
    ev.generation = gen;
    ev.evals = eval.evaluations();
    ev.best = best.best();
    trace.generations.push_back(std::move(ev));
    ++gen;
  }
  trace.final_best = best.best();
  trace.best_genomes = best.genomes();
  trace.evaluations = eval.evaluations();
  return trace;
}

}  // namespace emt
