#include "emt/networks.hpp"

#include <cmath>

#include "emt/error.hpp"

namespace emt {

namespace {

void check_params_finite(const std::vector<const Param*>& params, const char* what) {
  for (const Param* p : params) {
    if (!p->value.all_finite()) throw NumericError(std::string(what) + ": non-finite parameter");
  }
}

std::size_t count_params(const std::vector<const Param*>& params) {
  std::size_t n = 0;
  for (const Param* p : params) n += p->value.size();
  return n;
}

void add_inplace(Tensor& a, const Tensor& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

Tensor broadcast_rows(const Tensor& genomes) {
  if (genomes.rank() != 2) throw DimensionError("broadcast_rows: expected (B, D) genomes");
  const std::size_t b = genomes.dim(0);
  const std::size_t d = genomes.dim(1);
  Tensor img({1, b, d, d});
  for (std::size_t s = 0; s < b; ++s) {
    const double* x = genomes.data() + s * d;
    double* out = img.data() + s * d * d;
    for (std::size_t r = 0; r < d; ++r) std::copy(x, x + d, out + r * d);
  }
  return img;
}

ResidualNet::ResidualNet(std::size_t dim, std::size_t depth, std::size_t hidden_channels)
    : dim_(dim), hidden_(hidden_channels) {
  if (dim == 0 || depth == 0 || hidden_channels == 0) throw InvalidInputError("residual net: sizes must be positive");
  if (depth == 1) {
    layers_.emplace_back(1, 1);
    return;
  }
  layers_.emplace_back(1, hidden_);
  for (std::size_t i = 0; i + 2 < depth; ++i) layers_.emplace_back(hidden_, hidden_);
  layers_.emplace_back(hidden_, 1);
}

void ResidualNet::init(Rng& rng, double head_gain) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool head = i + 1 == layers_.size();
    layers_[i].init_he(rng, head ? head_gain : 1.0);
  }
  trained_ = false;
}

void ResidualNet::zero_head() {
  layers_.back().weight().value.fill(0.0);
  layers_.back().bias().value.fill(0.0);
}

std::vector<Param*> ResidualNet::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

std::vector<const Param*> ResidualNet::params() const {
  std::vector<const Param*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

std::size_t ResidualNet::num_params() const { return count_params(params()); }

void ResidualNet::zero_grad() {
  for (Param* p : params()) p->zero_grad();
}

void ResidualNet::check_finite() const { check_params_finite(params(), "residual net"); }

Tensor ResidualNet::forward(const Tensor& genomes) const {
  Cache scratch;
  return forward(genomes, scratch);
}

Tensor ResidualNet::forward(const Tensor& genomes, Cache& cache) const {
  if (genomes.rank() != 2 || genomes.dim(1) != dim_) throw DimensionError("residual net: genome length mismatch");
  check_finite();
  cache.inputs.clear();
  Tensor act = broadcast_rows(genomes);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Tensor next = layers_[i].forward(act);
    cache.inputs.push_back(std::move(act));
    if (i + 1 < layers_.size()) relu_inplace(next);
    act = std::move(next);
  }
  if (!act.all_finite()) throw NumericError("residual net: non-finite output");
  return act.reshaped({genomes.dim(0), dim_, dim_});
}

void ResidualNet::backward(const Cache& cache, const Tensor& grad_residual) {
  if (cache.inputs.size() != layers_.size()) throw InvalidInputError("residual net backward: stale cache");
  const std::size_t b = cache.inputs.front().dim(1);
  if (grad_residual.size() != b * dim_ * dim_) throw DimensionError("residual net backward: gradient shape mismatch");
  Tensor grad = grad_residual.reshaped({1, b, dim_, dim_});
  for (std::size_t i = layers_.size(); i-- > 0;) {
    Tensor grad_in;
    layers_[i].backward(cache.inputs[i], grad, i > 0 ? &grad_in : nullptr);
    if (i == 0) break;
    // cache.inputs[i] is the ReLU output of layer i-1.
    relu_backward_inplace(grad_in, cache.inputs[i]);
    grad = std::move(grad_in);
  }
}

Tensor vdsr_forward(const ResidualNet& net, std::span<const double> x) {
  if (x.size() != net.dim()) throw DimensionError("vdsr_forward: genome length mismatch");
  Tensor g({1, x.size()});
  std::copy(x.begin(), x.end(), g.data());
  return net.forward(g).reshaped({net.dim(), net.dim()});
}

Tensor residual_compose(std::span<const double> x, const Tensor& residual) {
  const std::size_t d = x.size();
  if (residual.rank() != 2 || residual.dim(0) != d || residual.dim(1) != d) {
    throw DimensionError("residual_compose: residual must be D x D for a length-D genome");
  }
  Tensor out({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = x[j] + residual.at(i, j);
  return out;
}

SkillClassifier::SkillClassifier(std::size_t dim, std::size_t num_tasks, std::size_t blocks, std::size_t channels)
    : dim_(dim), channels_(channels), stem_(1, channels), head_(channels, num_tasks) {
  if (dim == 0 || channels == 0) throw InvalidInputError("skill classifier: sizes must be positive");
  if (num_tasks < 2) throw InvalidInputError("skill classifier: needs at least two tasks");
  for (std::size_t i = 0; i < blocks; ++i) blocks_.push_back(Block{Conv2d(channels, channels), Conv2d(channels, channels)});
}

void SkillClassifier::init(Rng& rng) {
  stem_.init_he(rng);
  for (auto& b : blocks_) {
    b.first.init_he(rng);
    // Small second conv keeps each block close to identity at start.
    b.second.init_he(rng, 0.5);
  }
  head_.init_xavier(rng);
  trained_ = false;
}

std::vector<Param*> SkillClassifier::params() {
  std::vector<Param*> out{&stem_.weight(), &stem_.bias()};
  for (auto& b : blocks_) {
    out.insert(out.end(), {&b.first.weight(), &b.first.bias(), &b.second.weight(), &b.second.bias()});
  }
  out.insert(out.end(), {&head_.weight(), &head_.bias()});
  return out;
}

std::vector<const Param*> SkillClassifier::params() const {
  std::vector<const Param*> out{&stem_.weight(), &stem_.bias()};
  for (const auto& b : blocks_) {
    out.insert(out.end(), {&b.first.weight(), &b.first.bias(), &b.second.weight(), &b.second.bias()});
  }
  out.insert(out.end(), {&head_.weight(), &head_.bias()});
  return out;
}

std::size_t SkillClassifier::num_params() const { return count_params(params()); }

void SkillClassifier::zero_grad() {
  for (Param* p : params()) p->zero_grad();
}

void SkillClassifier::check_finite() const { check_params_finite(params(), "skill classifier"); }

Tensor SkillClassifier::forward(const Tensor& images) const {
  Cache scratch;
  return forward(images, scratch);
}

Tensor SkillClassifier::forward(const Tensor& images, Cache& cache) const {
  if (images.rank() != 3 || images.dim(1) != dim_ || images.dim(2) != dim_) {
    throw DimensionError("skill classifier: expected (B, D, D) images");
  }
  check_finite();
  const std::size_t b = images.dim(0);
  cache.stem_input = images.reshaped({1, b, dim_, dim_});
  cache.stem_output = stem_.forward(cache.stem_input);
  relu_inplace(cache.stem_output);
  cache.blocks.clear();
  const Tensor* act = &cache.stem_output;
  for (const auto& blk : blocks_) {
    BlockCache bc;
    bc.input = *act;
    bc.hidden = blk.first.forward(bc.input);
    relu_inplace(bc.hidden);
    bc.output = blk.second.forward(bc.hidden);
    add_inplace(bc.output, bc.input);
    relu_inplace(bc.output);
    cache.blocks.push_back(std::move(bc));
    act = &cache.blocks.back().output;
  }
  const std::size_t plane = dim_ * dim_;
  cache.pooled = Tensor({b, channels_});
  for (std::size_t c = 0; c < channels_; ++c) {
    for (std::size_t s = 0; s < b; ++s) {
      const double* p = act->data() + (c * b + s) * plane;
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      cache.pooled.at(s, c) = sum / static_cast<double>(plane);
    }
  }
  Tensor logits = head_.forward(cache.pooled);
  if (!logits.all_finite()) throw NumericError("skill classifier: non-finite logits");
  return logits;
}

void SkillClassifier::backward(const Cache& cache, const Tensor& grad_logits) {
  const std::size_t b = cache.pooled.dim(0);
  Tensor grad_pooled;
  head_.backward(cache.pooled, grad_logits, &grad_pooled);
  const std::size_t plane = dim_ * dim_;
  Tensor grad({channels_, b, dim_, dim_});
  for (std::size_t c = 0; c < channels_; ++c) {
    for (std::size_t s = 0; s < b; ++s) {
      const double g = grad_pooled.at(s, c) / static_cast<double>(plane);
      double* p = grad.data() + (c * b + s) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = g;
    }
  }
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    const BlockCache& bc = cache.blocks[i];
    relu_backward_inplace(grad, bc.output);
    Tensor grad_hidden;
    blocks_[i].second.backward(bc.hidden, grad, &grad_hidden);
    relu_backward_inplace(grad_hidden, bc.hidden);
    Tensor grad_input;
    blocks_[i].first.backward(bc.input, grad_hidden, &grad_input);
    add_inplace(grad, grad_input);  // skip path carries `grad` through unchanged
  }
  relu_backward_inplace(grad, cache.stem_output);
  stem_.backward(cache.stem_input, grad, nullptr);
}

std::vector<double> SkillClassifier::logits(const Tensor& image) const {
  if (image.size() != dim_ * dim_) throw DimensionError("skill classifier: image must be D x D");
  const Tensor out = forward(image.reshaped({1, dim_, dim_}));
  return {out.values().begin(), out.values().end()};
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw EmptyInputError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace emt
