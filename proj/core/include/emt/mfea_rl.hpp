#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emt/mfea.hpp"
#include "emt/networks.hpp"
#include "emt/nn.hpp"
#include "emt/training.hpp"

namespace emt {

/// Ablation switch. VdsrOnly keeps residual crossover but inherits skills from
/// parents; ResOnly uses SBX for variation and the classifier for skills.
enum class RlMode { Full, VdsrOnly, ResOnly };

std::string to_string(RlMode mode);
RlMode parse_rl_mode(const std::string& name);  // "full", "vdsr", "res"

struct MfeaRlConfig : MfeaConfig {
  std::size_t retrain_interval = 10;
  TrainOptions vdsr_opts = TrainOptions::residual_defaults();
  TrainOptions resnet_opts = TrainOptions::classifier_defaults();
  RlMode mode = RlMode::Full;
  std::size_t vdsr_depth = ResidualNet::kDefaultDepth;
  std::size_t vdsr_hidden = ResidualNet::kDefaultHidden;
  std::size_t classifier_blocks = SkillClassifier::kDefaultBlocks;
  std::size_t classifier_channels = SkillClassifier::kDefaultChannels;
  std::size_t max_training_samples = 0;  // 0: the whole population

  void validate() const;
  bool uses_residual_crossover() const { return mode != RlMode::ResOnly; }
  bool uses_classifier() const { return mode != RlMode::VdsrOnly; }
};

struct TrainingBatch {
  std::vector<ResidualSample> vdsr_pairs;
  std::vector<ClassifierSample> resnet_pairs;
};

/// One pair per member (or per member of a random subset of `max_samples`):
/// the target's D rows are genomes drawn with replacement from the members
/// sharing that member's skill factor.
std::vector<ResidualSample> build_residual_pairs(std::span<const Individual> members, Rng& rng,
                                                 std::size_t max_samples = 0);

/// Composed X_new images labeled with the skill factor, balanced by down-sampling
/// every task to the smallest non-empty group. Empty when fewer than two tasks
/// have members.
std::vector<ClassifierSample> build_classifier_pairs(std::span<const Individual> members, std::size_t num_tasks,
                                                     const ResidualNet& net, Rng& rng, std::size_t max_samples = 0);

TrainingBatch build_training_batch(const Population& pop, std::size_t num_tasks, const ResidualNet& net, Rng& rng,
                                   std::size_t max_samples = 0);

/// Uniformly chosen row of a D x D matrix.
std::vector<double> random_row_map(const Tensor& x_new, Rng& rng);

/// X_new = x + R(x) for a batch of genomes, one D x D tensor each.
std::vector<Tensor> compose_batch(const ResidualNet& net, std::span<const std::vector<double>* const> genomes);
Tensor compose_one(const ResidualNet& net, std::span<const double> genome);

struct CrossoverResult {
  Genome c1;
  Genome c2;
  bool fallback = false;  // SBX was used because the residual net is untrained
};

/// Row r1 of parent 1's X_new and row r2 of parent 2's, clamped to [0, 1].
/// Precomputed X_new tensors may be passed to skip the forward passes.
CrossoverResult residual_crossover(const Individual& p1, const Individual& p2, const ResidualNet& net, double sbx_eta,
                                   Rng& rng, RlMode mode = RlMode::Full, const Tensor* x_new1 = nullptr,
                                   const Tensor* x_new2 = nullptr);

/// Classifier argmax over the offspring's own X_new in modes Full and ResOnly
/// with a trained classifier; otherwise a uniformly random parent's skill.
std::size_t assign_skill_factor(std::span<const double> offspring, const SkillClassifier& classifier,
                                const ResidualNet& net, const Individual& p1, const Individual& p2, RlMode mode,
                                Rng& rng, const Tensor* x_new = nullptr);

RunTrace run_mfea_rl(const MultitaskProblem& problem, const MfeaRlConfig& config, std::uint64_t seed);

}  // namespace emt
