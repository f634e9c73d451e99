#include "emt/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emt/error.hpp"

namespace emt {
namespace {

Tensor stack_genomes(std::span<const ResidualSample> data, std::span<const std::size_t> idx, std::size_t d) {
  Tensor g({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& x = data[idx[i]].x;
    std::copy(x.begin(), x.end(), g.data() + i * d);
  }
  return g;
}

Tensor stack_images(std::span<const ClassifierSample> data, std::span<const std::size_t> idx, std::size_t d) {
  Tensor img({idx.size(), d, d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& m = data[idx[i]].image;
    std::copy(m.begin(), m.end(), img.data() + i * d * d);
  }
  return img;
}

// Prediction = broadcast(x) + R, so the residual gradient equals the prediction gradient.
LossResult residual_loss(const ResidualNet& net, std::span<const ResidualSample> data,
                         std::span<const std::size_t> idx, ResidualNet::Cache& cache) {
  const std::size_t d = net.dim();
  const Tensor genomes = stack_genomes(data, idx, d);
  Tensor pred = net.forward(genomes, cache);
  Tensor target({idx.size(), d, d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& x = data[idx[i]].x;
    const auto& t = data[idx[i]].target;
    std::copy(t.begin(), t.end(), target.data() + i * d * d);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) pred[(i * d + r) * d + c] += x[c];
  }
  return mse_loss(pred, target);
}

std::vector<std::vector<double>> snapshot(const std::vector<Param*>& params) {
  std::vector<std::vector<double>> out;
  for (const Param* p : params) out.emplace_back(p->value.values().begin(), p->value.values().end());
  return out;
}

void restore(const std::vector<Param*>& params, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) std::copy(snap[i].begin(), snap[i].end(), params[i]->value.data());
}

}  // namespace

std::vector<double> train_residual_net(ResidualNet& net, std::span<const ResidualSample> dataset,
                                       const TrainOptions& opts, Rng& rng) {
  if (dataset.empty()) throw EmptyInputError("train_residual_net: empty dataset");
  opts.validate();
  const std::size_t d = net.dim();
  for (const auto& s : dataset) {
    if (s.x.size() != d || s.target.size() != d * d) throw DimensionError("train_residual_net: sample shape mismatch");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto params = net.params();
  AdamState adam;
  ResidualNet::Cache cache;
  std::vector<double> epoch_loss;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t n = std::min(opts.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, n);
      net.zero_grad();
      const LossResult lr = residual_loss(net, dataset, batch, cache);
      net.backward(cache, lr.grad);
      adam_step(params, adam, opts);
      total += lr.loss * static_cast<double>(n);
    }
    epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  net.check_finite();
  net.set_trained(true);
  return epoch_loss;
}

double classification_accuracy(const SkillClassifier& net, std::span<const ClassifierSample> samples) {
  if (samples.empty()) return 0.0;
  const std::size_t d = net.dim();
  constexpr std::size_t kChunk = 64;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = net.forward(stack_images(samples, idx, d));
    const std::size_t t = logits.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      if (argmax(std::span<const double>(logits.data() + i * t, t)) == samples[start + i].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

ClassifierTrainResult train_classifier(SkillClassifier& net, std::span<const ClassifierSample> dataset,
                                       const TrainOptions& opts, Rng& rng) {
  opts.validate();
  const std::size_t d = net.dim();
  const std::size_t num_tasks = net.num_tasks();
  std::vector<std::vector<std::size_t>> by_class(num_tasks);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].image.size() != d * d) throw DimensionError("train_classifier: image shape mismatch");
    if (dataset[i].label >= num_tasks) throw InvalidInputError("train_classifier: label out of range");
    by_class[dataset[i].label].push_back(i);
  }

  // Stratified split: each class with >= 2 samples contributes at least one validation sample.
  std::vector<ClassifierSample> train;
  std::vector<ClassifierSample> val;
  std::size_t train_classes = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    std::size_t n_val = 0;
    if (members.size() >= 2) {
      n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(members.size() * opts.validation_fraction)));
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < n_val ? val : train).push_back(dataset[members[k]]);
    }
    if (members.size() > n_val) ++train_classes;
  }
  if (train_classes < 2) throw DegenerateLabelsError("train_classifier: fewer than two classes in the training split");
  if (val.empty()) val = train;

  const auto params = net.params();
  AdamState adam;
  SkillClassifier::Cache cache;
  ClassifierTrainResult result;
  result.best_accuracy = -1.0;
  std::vector<std::vector<double>> best = snapshot(params);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> labels;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t n = std::min(opts.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, n);
      labels.resize(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = train[batch[i]].label;
      net.zero_grad();
      const Tensor logits = net.forward(stack_images(train, batch, d), cache);
      const LossResult lr = cross_entropy_loss(logits, labels);
      net.backward(cache, lr.grad);
      adam_step(params, adam, opts);
      total += lr.loss * static_cast<double>(n);
    }
    result.train_loss.push_back(total / static_cast<double>(train.size()));
    const double acc = classification_accuracy(net, val);
    result.val_accuracy.push_back(acc);
    if (acc > result.best_accuracy) {
      result.best_accuracy = acc;
      result.best_epoch = epoch;
      best = snapshot(params);
      stale = 0;
    } else if (++stale >= opts.patience) {
      result.stopped_early = true;
      break;
    }
  }
  restore(params, best);
  net.check_finite();
  net.set_trained(true);
  return result;
}

double gradient_check(std::span<Param* const> params, const std::function<double()>& loss,
                      const std::function<void()>& backprop, std::size_t max_checks, Rng& rng, double h) {
  for (Param* p : params) p->zero_grad();
  backprop();

  struct Coord {
    std::size_t param;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p]->value.size(); ++i) coords.push_back({p, i});
  if (coords.size() > max_checks) {
    rng.shuffle(coords);
    coords.resize(max_checks);
  }

  double worst = 0.0;
  for (const auto& c : coords) {
    double& w = params[c.param]->value[c.index];
    const double saved = w;
    w = saved + h;
    const double up = loss();
    w = saved - h;
    const double down = loss();
    w = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = params[c.param]->grad[c.index];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

double gradient_check(ResidualNet& net, const Tensor& genomes, const Tensor& targets, std::size_t max_checks,
                      Rng& rng) {
  const std::size_t b = genomes.dim(0);
  const std::size_t d = net.dim();
  if (targets.size() != b * d * d) throw DimensionError("gradient_check: target shape mismatch");
  std::vector<ResidualSample> data(b);
  for (std::size_t i = 0; i < b; ++i) {
    data[i].x.assign(genomes.data() + i * d, genomes.data() + (i + 1) * d);
    data[i].target.assign(targets.data() + i * d * d, targets.data() + (i + 1) * d * d);
  }
  std::vector<std::size_t> idx(b);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  ResidualNet::Cache cache;
  const auto loss = [&] { return residual_loss(net, data, idx, cache).loss; };
  const auto backprop = [&] {
    const LossResult lr = residual_loss(net, data, idx, cache);
    net.backward(cache, lr.grad);
  };
  const auto params = net.params();
  return gradient_check(params, loss, backprop, max_checks, rng);
}

double gradient_check(SkillClassifier& net, const Tensor& images, std::span<const std::size_t> labels,
                      std::size_t max_checks, Rng& rng) {
  SkillClassifier::Cache cache;
  const auto loss = [&] { return cross_entropy_loss(net.forward(images, cache), labels).loss; };
  const auto backprop = [&] {
    const LossResult lr = cross_entropy_loss(net.forward(images, cache), labels);
    net.backward(cache, lr.grad);
  };
  const auto params = net.params();
  return gradient_check(params, loss, backprop, max_checks, rng);
}

}  // namespace emt
