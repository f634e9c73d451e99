#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emt/rng.hpp"
#include "emt/tensor.hpp"

namespace emt {

/// A trainable tensor and its accumulated gradient.
struct Param {
  Tensor value;
  Tensor grad;

  explicit Param(std::vector<std::size_t> shape) : value(shape), grad(std::move(shape)) {}
  void zero_grad() { grad.fill(0.0); }
};

/// Same-padded 3x3 convolution (cross-correlation) with bias.
///
/// Activations use channel-major batch layout (C, B, H, W) so that one GEMM
/// covers a whole chunk of the batch.
class Conv2d {
 public:
  static constexpr std::size_t kKernel = 3;

  Conv2d(std::size_t in_channels, std::size_t out_channels);

  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }

  Param& weight() noexcept { return weight_; }  // (out, in, 3, 3)
  Param& bias() noexcept { return bias_; }      // (out)
  const Param& weight() const noexcept { return weight_; }
  const Param& bias() const noexcept { return bias_; }

  /// He-normal weights scaled by `gain`, zero bias.
  void init_he(Rng& rng, double gain = 1.0);

  Tensor forward(const Tensor& input) const;

  /// Accumulates weight/bias gradients; writes dL/dinput when `grad_input` is non-null.
  void backward(const Tensor& input, const Tensor& grad_output, Tensor* grad_input);

 private:
  std::size_t in_;
  std::size_t out_;
  Param weight_;
  Param bias_;
};

/// Standalone convolution of a (C, H, W) or (C, B, H, W) input with a (Cout, Cin, 3, 3) kernel.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, std::span<const double> bias);

/// Fully connected layer on (B, in) rows.
class Linear {
 public:
  Linear(std::size_t in_features, std::size_t out_features);

  Param& weight() noexcept { return weight_; }  // (out, in)
  Param& bias() noexcept { return bias_; }
  const Param& weight() const noexcept { return weight_; }
  const Param& bias() const noexcept { return bias_; }

  void init_xavier(Rng& rng);
  Tensor forward(const Tensor& input) const;
  void backward(const Tensor& input, const Tensor& grad_output, Tensor* grad_input);

 private:
  std::size_t in_;
  std::size_t out_;
  Param weight_;
  Param bias_;
};

void relu_inplace(Tensor& t);
/// grad *= (activation > 0), where activation is a ReLU output.
void relu_backward_inplace(Tensor& grad, const Tensor& activation);

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // dL/dprediction
};

/// Mean of squared differences over all elements.
LossResult mse_loss(const Tensor& prediction, const Tensor& target);

/// Mean softmax cross-entropy over the rows of a (B, T) logit tensor.
LossResult cross_entropy_loss(const Tensor& logits, std::span<const std::size_t> labels);

std::vector<double> softmax(std::span<const double> logits);

/// Optimizer settings and loop bounds shared by both training loops.
struct TrainOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 20;
  std::size_t epochs = 5;
  std::size_t patience = 5;            // classifier early stopping
  double validation_fraction = 0.2;    // classifier split
  std::size_t max_time_steps = 1000;   // carried for configuration parity; not used by the loops

  void validate() const;

  /// Residual-network defaults: lr 1e-3, batch 20, 5 epochs, betas (0.9, 0.999).
  static TrainOptions residual_defaults();
  /// Classifier defaults: lr 1e-3, batch 32, 50 epochs, betas (0.9, 0.9999), patience 5.
  static TrainOptions classifier_defaults();
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update over a flat parameter block; `step` is 1-based.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 std::size_t step, const TrainOptions& opts);

/// Adam over a parameter list; lazily sizes `state` on first use.
void adam_step(std::span<Param* const> params, AdamState& state, const TrainOptions& opts);

}  // namespace emt
