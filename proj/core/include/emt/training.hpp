#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "emt/networks.hpp"

namespace emt {

/// One residual-network training pair: a genome and its D x D target matrix.
struct ResidualSample {
  std::vector<double> x;
  std::vector<double> target;  // row-major D x D
};

struct ClassifierSample {
  std::vector<double> image;  // row-major D x D
  std::size_t label = 0;
};

/// Shuffled mini-batch Adam on the MSE between broadcast(x) + R(x) and the
/// target. Returns the mean loss of every epoch and marks the net trained.
std::vector<double> train_residual_net(ResidualNet& net, std::span<const ResidualSample> dataset,
                                       const TrainOptions& opts, Rng& rng);

struct ClassifierTrainResult {
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
  double best_accuracy = 0.0;
  std::size_t best_epoch = 0;  // 1-based
  bool stopped_early = false;
};

/// Stratified train/validation split, cross-entropy Adam training and
/// patience-based early stopping on validation accuracy. The classifier
/// ends with the parameters of its best validation epoch.
ClassifierTrainResult train_classifier(SkillClassifier& net, std::span<const ClassifierSample> dataset,
                                       const TrainOptions& opts, Rng& rng);

/// Fraction of samples whose argmax logit equals the label.
double classification_accuracy(const SkillClassifier& net, std::span<const ClassifierSample> samples);

/// Compares analytic gradients with central finite differences.
///
/// `loss` evaluates the scalar loss at the current parameters; `backprop`
/// fills every Param::grad with the analytic gradient. At most `max_checks`
/// coordinates are probed (all of them when the net is small enough).
/// Returns max |a - n| / max(|a|, |n|, 1e-6).
double gradient_check(std::span<Param* const> params, const std::function<double()>& loss,
                      const std::function<void()>& backprop, std::size_t max_checks, Rng& rng, double h = 1e-5);

double gradient_check(ResidualNet& net, const Tensor& genomes, const Tensor& targets, std::size_t max_checks,
                      Rng& rng);
double gradient_check(SkillClassifier& net, const Tensor& images, std::span<const std::size_t> labels,
                      std::size_t max_checks, Rng& rng);

}  // namespace emt
