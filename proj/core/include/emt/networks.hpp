#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "emt/nn.hpp"

namespace emt {

/// VDSR-style residual generator: a 1 x D genome, broadcast into a D x D
/// single-channel image, passes through `depth` same-padded 3x3 convolutions
/// (1 -> hidden, hidden -> hidden ..., hidden -> 1, ReLU between) and comes
/// out as a D x D residual. Depth 1 is a single linear 1 -> 1 convolution.
class ResidualNet {
 public:
  static constexpr std::size_t kDefaultDepth = 8;
  static constexpr std::size_t kDefaultHidden = 64;

  ResidualNet(std::size_t dim, std::size_t depth = kDefaultDepth, std::size_t hidden_channels = kDefaultHidden);

  /// He init for hidden layers; the output layer is scaled by `head_gain`.
  void init(Rng& rng, double head_gain = 0.1);
  /// Output layer kernels and bias set to zero, which makes every residual zero.
  void zero_head();

  std::size_t dim() const noexcept { return dim_; }
  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t hidden_channels() const noexcept { return hidden_; }
  std::size_t num_params() const;

  bool trained() const noexcept { return trained_; }
  void set_trained(bool v) noexcept { trained_ = v; }

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  std::vector<Conv2d>& layers() noexcept { return layers_; }
  const std::vector<Conv2d>& layers() const noexcept { return layers_; }
  void zero_grad();

  /// Residuals for a (B, D) batch of genomes, shaped (B, D, D).
  Tensor forward(const Tensor& genomes) const;

  struct Cache {
    std::vector<Tensor> inputs;  // input of every conv layer, (C, B, D, D)
  };
  Tensor forward(const Tensor& genomes, Cache& cache) const;
  /// Accumulates parameter gradients from dL/dresidual (B, D, D).
  void backward(const Cache& cache, const Tensor& grad_residual);

  /// Throws NumericError when any parameter is NaN or infinite.
  void check_finite() const;

 private:
  std::size_t dim_;
  std::size_t hidden_;
  std::vector<Conv2d> layers_;
  bool trained_ = false;
};

/// (B, D) genomes -> (1, B, D, D) image with every row equal to the genome.
Tensor broadcast_rows(const Tensor& genomes);

/// Residual of a single genome as a D x D matrix.
Tensor vdsr_forward(const ResidualNet& net, std::span<const double> x);

/// X_new[i][j] = x[j] + R[i][j].
Tensor residual_compose(std::span<const double> x, const Tensor& residual);

/// ResNet-style skill classifier: stem conv (1 -> C), `blocks` residual blocks
/// of two 3x3 convolutions with a parameter-free identity skip, global average
/// pooling and a linear head to one logit per task.
class SkillClassifier {
 public:
  static constexpr std::size_t kDefaultBlocks = 3;
  static constexpr std::size_t kDefaultChannels = 16;

  SkillClassifier(std::size_t dim, std::size_t num_tasks, std::size_t blocks = kDefaultBlocks,
                  std::size_t channels = kDefaultChannels);

  void init(Rng& rng);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_tasks() const noexcept { return head_.bias().value.size(); }
  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t num_params() const;

  bool trained() const noexcept { return trained_; }
  void set_trained(bool v) noexcept { trained_ = v; }

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  void zero_grad();

  /// Logits (B, T) for a (B, D, D) batch of images.
  Tensor forward(const Tensor& images) const;
  std::vector<double> logits(const Tensor& image) const;

  struct BlockCache {
    Tensor input;   // block input (also the skip path)
    Tensor hidden;  // relu(conv1(input))
    Tensor output;  // relu(input + conv2(hidden))
  };
  struct Cache {
    Tensor stem_input;
    Tensor stem_output;
    std::vector<BlockCache> blocks;
    Tensor pooled;  // (B, C)
  };
  Tensor forward(const Tensor& images, Cache& cache) const;
  void backward(const Cache& cache, const Tensor& grad_logits);

  void check_finite() const;

 private:
  struct Block {
    Conv2d first;
    Conv2d second;
  };

  std::size_t dim_;
  std::size_t channels_;
  Conv2d stem_;
  std::vector<Block> blocks_;
  Linear head_;
  bool trained_ = false;
};

/// Index of the largest logit; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace emt
