#include "emt/mfea_rl.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "emt/error.hpp"

namespace emt {

std::string to_string(RlMode mode) {
  switch (mode) {
    case RlMode::Full: return "full";
    case RlMode::VdsrOnly: return "vdsr";
    case RlMode::ResOnly: return "res";
  }
  return "full";
}

RlMode parse_rl_mode(const std::string& name) {
  if (name == "full") return RlMode::Full;
  if (name == "vdsr") return RlMode::VdsrOnly;
  if (name == "res") return RlMode::ResOnly;
  throw InvalidInputError("unknown MFEA-RL mode: " + name);
}

void MfeaRlConfig::validate() const {
  MfeaConfig::validate();
  if (retrain_interval == 0) throw InvalidInputError("retrain interval must be at least 1");
  if (vdsr_depth == 0 || vdsr_hidden == 0 || classifier_channels == 0) {
    throw InvalidInputError("network sizes must be positive");
  }
  vdsr_opts.validate();
  resnet_opts.validate();
}

namespace {

std::vector<std::vector<std::size_t>> group_by_skill(std::span<const Individual> members, std::size_t num_tasks) {
  std::vector<std::vector<std::size_t>> groups(num_tasks);
  for (std::size_t i = 0; i < members.size(); ++i) groups.at(members[i].skill_factor).push_back(i);
  return groups;
}

std::size_t max_skill(std::span<const Individual> members) {
  std::size_t t = 0;
  for (const auto& m : members) t = std::max(t, m.skill_factor + 1);
  return t;
}

}  // namespace

std::vector<ResidualSample> build_residual_pairs(std::span<const Individual> members, Rng& rng,
                                                 std::size_t max_samples) {
  if (members.empty()) throw EmptyInputError("build_residual_pairs: empty population");
  const std::size_t d = members.front().genome.size();
  const auto groups = group_by_skill(members, max_skill(members));

  std::vector<std::size_t> chosen(members.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (max_samples != 0 && max_samples < chosen.size()) {
    rng.shuffle(chosen);
    chosen.resize(max_samples);
  }

  std::vector<ResidualSample> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) {
    const auto& group = groups[members[i].skill_factor];
    ResidualSample s;
    s.x = members[i].genome;
    s.target.resize(d * d);
    for (std::size_t r = 0; r < d; ++r) {
      const auto& row = members[group[rng.below(group.size())]].genome;
      std::copy(row.begin(), row.end(), s.target.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ClassifierSample> build_classifier_pairs(std::span<const Individual> members, std::size_t num_tasks,
                                                     const ResidualNet& net, Rng& rng, std::size_t max_samples) {
  auto groups = group_by_skill(members, num_tasks);
  std::size_t present = 0;
  std::size_t per_class = members.size();
  for (const auto& g : groups) {
    if (g.empty()) continue;
    ++present;
    per_class = std::min(per_class, g.size());
  }
  if (present < 2) return {};
  if (max_samples != 0) per_class = std::min(per_class, std::max<std::size_t>(1, max_samples / present));

  std::vector<const std::vector<double>*> genomes;
  std::vector<std::size_t> labels;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    auto& g = groups[t];
    if (g.empty()) continue;
    rng.shuffle(g);
    for (std::size_t k = 0; k < per_class; ++k) {
      genomes.push_back(&members[g[k]].genome);
      labels.push_back(t);
    }
  }
  auto images = compose_batch(net, genomes);
  std::vector<ClassifierSample> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto v = images[i].values();
    out[i].image.assign(v.begin(), v.end());
    out[i].label = labels[i];
  }
  return out;
}

TrainingBatch build_training_batch(const Population& pop, std::size_t num_tasks, const ResidualNet& net, Rng& rng,
                                   std::size_t max_samples) {
  TrainingBatch batch;
  batch.vdsr_pairs = build_residual_pairs(pop.members, rng, max_samples);
  batch.resnet_pairs = build_classifier_pairs(pop.members, num_tasks, net, rng, max_samples);
  return batch;
}

std::vector<double> random_row_map(const Tensor& x_new, Rng& rng) {
  if (x_new.rank() != 2) throw DimensionError("random_row_map: expected a D x D matrix");
  const std::size_t rows = x_new.dim(0);
  const std::size_t cols = x_new.dim(1);
  const std::size_t r = rng.below(rows);
  const double* p = x_new.data() + r * cols;
  return std::vector<double>(p, p + cols);
}

std::vector<Tensor> compose_batch(const ResidualNet& net, std::span<const std::vector<double>* const> genomes) {
  const std::size_t d = net.dim();
  std::vector<Tensor> out;
  if (genomes.empty()) return out;
  Tensor batch({genomes.size(), d});
  for (std::size_t b = 0; b < genomes.size(); ++b) {
    if (genomes[b]->size() != d) throw DimensionError("compose_batch: genome length differs from network dimension");
    std::copy(genomes[b]->begin(), genomes[b]->end(), batch.data() + b * d);
  }
  const Tensor residual = net.forward(batch);
  out.reserve(genomes.size());
  for (std::size_t b = 0; b < genomes.size(); ++b) {
    Tensor x({d, d});
    const double* r = residual.data() + b * d * d;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) x.data()[i * d + j] = (*genomes[b])[j] + r[i * d + j];
    }
    out.push_back(std::move(x));
  }
  return out;
}

Tensor compose_one(const ResidualNet& net, std::span<const double> genome) {
  return residual_compose(genome, vdsr_forward(net, genome));
}

CrossoverResult residual_crossover(const Individual& p1, const Individual& p2, const ResidualNet& net, double sbx_eta,
                                   Rng& rng, RlMode mode, const Tensor* x_new1, const Tensor* x_new2) {
  CrossoverResult res;
  if (mode == RlMode::ResOnly || !net.trained()) {
    std::tie(res.c1, res.c2) = sbx_crossover(p1.genome, p2.genome, sbx_eta, rng);
    res.fallback = mode != RlMode::ResOnly;
    return res;
  }
  const Tensor own1 = x_new1 ? Tensor{} : compose_one(net, p1.genome);
  const Tensor own2 = x_new2 ? Tensor{} : compose_one(net, p2.genome);
  res.c1 = random_row_map(x_new1 ? *x_new1 : own1, rng);
  res.c2 = random_row_map(x_new2 ? *x_new2 : own2, rng);
  for (double& v : res.c1) v = std::clamp(v, 0.0, 1.0);
  for (double& v : res.c2) v = std::clamp(v, 0.0, 1.0);
  return res;
}

std::size_t assign_skill_factor(std::span<const double> offspring, const SkillClassifier& classifier,
                                const ResidualNet& net, const Individual& p1, const Individual& p2, RlMode mode,
                                Rng& rng, const Tensor* x_new) {
  if (mode == RlMode::VdsrOnly || !classifier.trained()) {
    return rng.uniform() < 0.5 ? p1.skill_factor : p2.skill_factor;
  }
  if (x_new) return argmax(classifier.logits(*x_new));
  return argmax(classifier.logits(compose_one(net, offspring)));
}

namespace {

struct Member {
  Individual ind;
  std::optional<Tensor> x_new;  // valid for the current network snapshot only
};

class RlRun {
 public:
  RlRun(const MultitaskProblem& problem, const MfeaRlConfig& config, std::uint64_t seed)
      : problem_(problem),
        config_(config),
        num_tasks_(problem.num_tasks()),
        dim_(problem.unified_dim()),
        rng_(seed),
        eval_(problem),
        best_(num_tasks_, dim_),
        vdsr_(dim_, config.vdsr_depth, config.vdsr_hidden),
        classifier_(dim_, num_tasks_, config.classifier_blocks, config.classifier_channels),
        seed_(seed) {
    Rng init_rng(hash_combine(seed, hash_string("network-init")));
    vdsr_.init(init_rng);
    classifier_.init(init_rng);
  }

  RunTrace run() {
    const std::size_t n = config_.population_size;
    Population init = detail::initial_population(eval_, n, rng_);
    for (auto& m : init.members) {
      best_.observe(m);
      pop_.push_back(Member{std::move(m), std::nullopt});
    }
    detail::record_point(trace_, 0, eval_.evaluations(), best_);

    std::size_t gen = 0;
    while (eval_.evaluations() + n <= config_.max_evals) {
      ++gen;
      step(gen);
      if ((gen - 1) % config_.retrain_interval == 0) retrain(gen);
    }
    trace_.final_best = best_.best();
    trace_.best_genomes = best_.genomes();
    trace_.evaluations = eval_.evaluations();
    return std::move(trace_);
  }

 private:
  bool residual_ready() const { return config_.uses_residual_crossover() && vdsr_.trained(); }
  bool classifier_ready() const { return config_.uses_classifier() && classifier_.trained(); }

  void fill_x_new(std::vector<Member*> targets) {
    std::erase_if(targets, [](const Member* m) { return m->x_new.has_value(); });
    std::vector<const std::vector<double>*> genomes;
    for (const Member* m : targets) genomes.push_back(&m->ind.genome);
    auto images = compose_batch(vdsr_, genomes);
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i]->x_new = std::move(images[i]);
  }

  void step(std::size_t gen) {
    const std::size_t n = config_.population_size;
    const double rate = config_.gene_mutation_rate(dim_);
    GenerationEvent ev;
    ev.generation = gen;

    const auto pairs = detail::random_pairs(n, rng_);
    std::vector<bool> crosses(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      crosses[k] = assortative_mating(pop_[pairs[k].first].ind, pop_[pairs[k].second].ind, config_.rmp, rng_) ==
                   MatingDecision::Crossover;
    }
    if (residual_ready()) {
      std::vector<Member*> need;
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (!crosses[k]) continue;
        need.push_back(&pop_[pairs[k].first]);
        need.push_back(&pop_[pairs[k].second]);
      }
      fill_x_new(std::move(need));
    }

    std::vector<Member> offspring;
    offspring.reserve(n);
    std::vector<std::pair<std::size_t, std::size_t>> parents_of;  // crossover offspring -> parent pool indices
    std::vector<std::size_t> needs_skill;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [a, b] = pairs[k];
      const Individual& pa = pop_[a].ind;
      const Individual& pb = pop_[b].ind;
      if (crosses[k]) {
        ++ev.crossovers;
        auto cx = residual_crossover(pa, pb, vdsr_, config_.sbx_eta, rng_, config_.mode,
                                     pop_[a].x_new ? &*pop_[a].x_new : nullptr,
                                     pop_[b].x_new ? &*pop_[b].x_new : nullptr);
        if (cx.fallback) ++ev.fallback_crossovers;
        needs_skill.push_back(offspring.size());
        offspring.push_back(Member{Individual(std::move(cx.c1), pa.skill_factor, num_tasks_), std::nullopt});
        parents_of.emplace_back(a, b);
        needs_skill.push_back(offspring.size());
        offspring.push_back(Member{Individual(std::move(cx.c2), pb.skill_factor, num_tasks_), std::nullopt});
        parents_of.emplace_back(a, b);
      } else {
        ++ev.mutations;
        offspring.push_back(Member{
            Individual(polynomial_mutation(pa.genome, config_.mutation_eta, rate, rng_), pa.skill_factor, num_tasks_),
            std::nullopt});
        offspring.push_back(Member{
            Individual(polynomial_mutation(pb.genome, config_.mutation_eta, rate, rng_), pb.skill_factor, num_tasks_),
            std::nullopt});
      }
    }

    for (auto& m : offspring) {
      if (boundary_repair(m.ind.genome, rng_)) ++ev.repaired;
    }

    // Skill assignment for crossover offspring, from their own X_new when the classifier is active.
    if (classifier_ready()) {
      std::vector<Member*> need;
      for (std::size_t i : needs_skill) need.push_back(&offspring[i]);
      fill_x_new(need);
    }
    for (std::size_t k = 0; k < needs_skill.size(); ++k) {
      Member& m = offspring[needs_skill[k]];
      const auto [a, b] = parents_of[k];
      m.ind.skill_factor = assign_skill_factor(m.ind.genome, classifier_, vdsr_, pop_[a].ind, pop_[b].ind,
                                               config_.mode, rng_, m.x_new ? &*m.x_new : nullptr);
      if (classifier_ready()) ++ev.classifier_assignments;
    }

    for (auto& m : offspring) m.ind.factorial_costs[m.ind.skill_factor] = eval_(m.ind.genome, m.ind.skill_factor);
    for (const auto& m : offspring) best_.observe(m.ind);

    std::vector<Member> pool = std::move(pop_);
    for (auto& m : offspring) pool.push_back(std::move(m));
    std::vector<Individual> inds;
    inds.reserve(pool.size());
    for (auto& m : pool) inds.push_back(std::move(m.ind));
    const auto order = selection_order(inds, n, num_tasks_);
    pop_.clear();
    for (std::size_t i : order) pop_.push_back(Member{std::move(inds[i]), std::move(pool[i].x_new)});

    detail::record_point(trace_, gen, eval_.evaluations(), best_);
    ev.evals = eval_.evaluations();
    ev.best = best_.best();
    trace_.generations.push_back(std::move(ev));
  }

  void retrain(std::size_t gen) {
    RetrainEvent ev;
    ev.generation = gen;
    ev.evals_before = eval_.evaluations();
    Rng train_rng(hash_combine(seed_, hash_combine(hash_string("retrain"), gen)));

    std::vector<Individual> members;
    members.reserve(pop_.size());
    for (const auto& m : pop_) members.push_back(m.ind);

    const auto residual_pairs = build_residual_pairs(members, train_rng, config_.max_training_samples);
    ev.residual_samples = residual_pairs.size();
    ev.residual_loss = train_residual_net(vdsr_, residual_pairs, config_.vdsr_opts, train_rng);
    vdsr_.check_finite();
    for (auto& m : pop_) m.x_new.reset();

    if (config_.uses_classifier()) {
      const auto cls_pairs =
          build_classifier_pairs(members, num_tasks_, vdsr_, train_rng, config_.max_training_samples);
      ev.classifier_samples = cls_pairs.size();
      if (cls_pairs.empty()) {
        ev.note = "classifier skipped: fewer than two tasks have members";
      } else {
        try {
          const auto res = train_classifier(classifier_, cls_pairs, config_.resnet_opts, train_rng);
          ev.classifier_val_accuracy = res.val_accuracy;
          ev.classifier_trained = true;
        } catch (const DegenerateLabelsError& e) {
          ev.note = std::string("classifier skipped: ") + e.what();
        }
      }
    }

    ev.evals_after = eval_.evaluations();
    if (ev.evals_after != ev.evals_before) throw std::logic_error("network retraining consumed function evaluations");
    trace_.retrains.push_back(std::move(ev));
  }

  const MultitaskProblem& problem_;
  const MfeaRlConfig& config_;
  std::size_t num_tasks_;
  std::size_t dim_;
  Rng rng_;
  Evaluator eval_;
  detail::BestTracker best_;
  ResidualNet vdsr_;
  SkillClassifier classifier_;
  std::uint64_t seed_;
  std::vector<Member> pop_;
  RunTrace trace_;
};

}  // namespace

RunTrace run_mfea_rl(const MultitaskProblem& problem, const MfeaRlConfig& config, std::uint64_t seed) {
  config.validate();
  problem.validate();
  RlRun run(problem, config, seed);
  return run.run();
}

}  // namespace emt
