#include "emt/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

#if defined(__FMA__)
#include <immintrin.h>
#endif

#include "emt/error.hpp"

namespace emt {
namespace {

// Upper bound on im2col buffer elements per chunk (512 KiB, sized for L2).
constexpr std::size_t kColBudget = std::size_t{1} << 16;

struct Geometry {
  std::size_t channels;
  std::size_t batch;
  std::size_t height;
  std::size_t width;
  std::size_t plane() const { return height * width; }
};

Geometry geometry_of(const Tensor& t) {
  if (t.rank() != 4) throw DimensionError("conv2d expects a (C, B, H, W) tensor");
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

// Column buffers use a panel layout: columns are grouped in panels of kLanes,
// and inside a panel row kk is kLanes contiguous values. The last panel is
// zero-padded. Every kernel below computes each output element with the same
// sequence of operations, so a sample's result does not depend on its batch,
// its position in the batch or buffer alignment.
constexpr std::size_t kLanes = 16;

std::size_t panels(std::size_t cols) { return (cols + kLanes - 1) / kLanes; }

std::size_t chunk_size(std::size_t k, std::size_t plane, std::size_t batch) {
  const std::size_t per_sample = std::max<std::size_t>(1, k * plane);
  return std::clamp<std::size_t>(kColBudget / per_sample, 1, batch);
}

// Four doubles; GCC/Clang vector extension, lowered to whatever SIMD the target has.
using Vec4 = double __attribute__((vector_size(32)));
constexpr std::size_t kVecs = kLanes / 4;

inline Vec4 load4(const double* p) {
  Vec4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(double* p, Vec4 v) { std::memcpy(p, &v, sizeof v); }

// c + a * b, fused when the target has FMA. Either way every lane of every
// output goes through this same operation.
inline Vec4 madd(Vec4 a, Vec4 b, Vec4 c) {
#if defined(__FMA__)
  return _mm256_fmadd_pd(a, b, c);
#else
  return c + a * b;
#endif
}

inline std::size_t panel_index(std::size_t row, std::size_t col, std::size_t rows) {
  return (col / kLanes) * rows * kLanes + row * kLanes + col % kLanes;
}

// For each 3x3 tap s = ky*3 + kx and padded column j of a chunk, the offset of
// the source pixel inside one channel's (nb, H, W) block. Padding taps point at
// index nb*H*W, one past the block, where callers keep a zero.
std::vector<std::uint32_t> tap_offsets(const Geometry& g, std::size_t nb) {
  const std::size_t p = nb * g.plane();
  const std::size_t padded = panels(p) * kLanes;
  std::vector<std::uint32_t> off(9 * padded, static_cast<std::uint32_t>(p));
  for (std::size_t j = 0; j < p; ++j) {
    const std::size_t bl = j / g.plane();
    const std::size_t y = (j % g.plane()) / g.width;
    const std::size_t x = j % g.width;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        if (y + ky < 1 || x + kx < 1 || y + ky > g.height || x + kx > g.width) continue;
        off[(ky * 3 + kx) * padded + j] =
            static_cast<std::uint32_t>(bl * g.plane() + (y + ky - 1) * g.width + (x + kx - 1));
      }
    }
  }
  return off;
}

// col(ci*9 + s, j) = in[ci, b0 + bl(j), y(j) + ky - 1, x(j) + kx - 1], zero outside.
void im2col(const Tensor& in, const Geometry& g, std::size_t b0, std::size_t nb,
            const std::vector<std::uint32_t>& taps, std::vector<double>& col) {
  const std::size_t k = g.channels * 9;
  const std::size_t p = nb * g.plane();
  const std::size_t np = panels(p);
  const std::size_t padded = np * kLanes;
  col.resize(np * k * kLanes);
  std::vector<double> src(p + 1, 0.0);
  for (std::size_t ci = 0; ci < g.channels; ++ci) {
    const double* block = in.data() + (ci * g.batch + b0) * g.plane();
    std::copy(block, block + p, src.begin());
    for (std::size_t q = 0; q < np; ++q) {
      for (std::size_t s = 0; s < 9; ++s) {
        const std::uint32_t* o = taps.data() + s * padded + q * kLanes;
        double* dst = col.data() + (q * k + ci * 9 + s) * kLanes;
        for (std::size_t t = 0; t < kLanes; ++t) dst[t] = src[o[t]];
      }
    }
  }
}

// Adds col back onto the input gradient. Each tap accumulates into its own
// buffer and a pixel then sums its taps in order s = 0..8, independent of
// where panel boundaries fall.
void col2im_add(const std::vector<double>& col, const Geometry& g, std::size_t b0, std::size_t nb,
                const std::vector<std::uint32_t>& taps, Tensor& grad_in) {
  const std::size_t k = g.channels * 9;
  const std::size_t p = nb * g.plane();
  const std::size_t np = panels(p);
  const std::size_t padded = np * kLanes;
  std::vector<double> acc(9 * (p + 1));
  for (std::size_t ci = 0; ci < g.channels; ++ci) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t q = 0; q < np; ++q) {
      const double* src = col.data() + (q * k + ci * 9) * kLanes;
      for (std::size_t s = 0; s < 9; ++s) {
        const std::uint32_t* o = taps.data() + s * padded + q * kLanes;
        double* a = acc.data() + s * (p + 1);
        for (std::size_t t = 0; t < kLanes; ++t) a[o[t]] += src[s * kLanes + t];
      }
    }
    double* block = grad_in.data() + (ci * g.batch + b0) * g.plane();
    for (std::size_t s = 0; s < 9; ++s) {
      const double* a = acc.data() + s * (p + 1);
      for (std::size_t j = 0; j < p; ++j) block[j] += a[j];
    }
  }
}

// Rows [co, co+R) of out = init + a * panel, with a row-major (rows x depth)
// and `panel` a depth x kLanes block; only the first `width` lanes are stored.
template <std::size_t R>
void panel_rows(const double* a, std::size_t depth, const double* init, const double* panel, double* out,
                std::size_t ostride, std::size_t width) {
  Vec4 acc[R][kVecs];
#pragma GCC unroll 4
  for (std::size_t r = 0; r < R; ++r) {
    const double i0 = init ? init[r] : 0.0;
#pragma GCC unroll 4
    for (std::size_t v = 0; v < kVecs; ++v) acc[r][v] = Vec4{i0, i0, i0, i0};
  }
  for (std::size_t kk = 0; kk < depth; ++kk) {
    Vec4 p[kVecs];
#pragma GCC unroll 4
    for (std::size_t v = 0; v < kVecs; ++v) p[v] = load4(panel + kk * kLanes + 4 * v);
#pragma GCC unroll 4
    for (std::size_t r = 0; r < R; ++r) {
      const double w = a[r * depth + kk];
      const Vec4 wv{w, w, w, w};
#pragma GCC unroll 4
      for (std::size_t v = 0; v < kVecs; ++v) acc[r][v] = madd(wv, p[v], acc[r][v]);
    }
  }
  double lanes[R][kLanes];
#pragma GCC unroll 4
  for (std::size_t r = 0; r < R; ++r) {
#pragma GCC unroll 4
    for (std::size_t v = 0; v < kVecs; ++v) store4(lanes[r] + 4 * v, acc[r][v]);
  }
  for (std::size_t r = 0; r < R; ++r) std::copy(lanes[r], lanes[r] + width, out + r * ostride);
}

// out[m][j] = init[m] + sum_kk a[m][kk] b(kk, j) with b in panel layout; out is
// row-major with row stride `ostride` (plain layout) or written back in panel
// layout when `ostride` is 0.
void gemm_panels(const double* a, std::size_t rows, std::size_t depth, const double* init, const double* b,
                 std::size_t cols, double* out, std::size_t ostride) {
  const std::size_t np = panels(cols);
  for (std::size_t q = 0; q < np; ++q) {
    const double* panel = b + q * depth * kLanes;
    const bool paneled = ostride == 0;
    const std::size_t width = paneled ? kLanes : std::min(kLanes, cols - q * kLanes);
    double* obase = paneled ? out + q * rows * kLanes : out + q * kLanes;
    const std::size_t os = paneled ? kLanes : ostride;
    std::size_t m = 0;
    for (; m + 4 <= rows; m += 4) {
      panel_rows<4>(a + m * depth, depth, init ? init + m : nullptr, panel, obase + m * os, os, width);
    }
    for (; m < rows; ++m) {
      panel_rows<1>(a + m * depth, depth, init ? init + m : nullptr, panel, obase + m * os, os, width);
    }
  }
}

template <std::size_t RM, std::size_t RN>
void nt_tile(const double* x, std::size_t xrows, const double* y, std::size_t yrows, std::size_t np, double* c) {
  Vec4 acc[RM][RN] = {};
  for (std::size_t q = 0; q < np; ++q) {
    const double* xp = x + q * xrows * kLanes;
    const double* yp = y + q * yrows * kLanes;
#pragma GCC unroll 4
    for (std::size_t v = 0; v < kVecs; ++v) {
      Vec4 yv[RN];
#pragma GCC unroll 4
      for (std::size_t j = 0; j < RN; ++j) yv[j] = load4(yp + j * kLanes + 4 * v);
#pragma GCC unroll 4
      for (std::size_t i = 0; i < RM; ++i) {
        const Vec4 xv = load4(xp + i * kLanes + 4 * v);
#pragma GCC unroll 4
        for (std::size_t j = 0; j < RN; ++j) acc[i][j] = madd(xv, yv[j], acc[i][j]);
      }
    }
  }
  for (std::size_t i = 0; i < RM; ++i) {
    for (std::size_t j = 0; j < RN; ++j) c[i * yrows + j] += (acc[i][j][0] + acc[i][j][1]) + (acc[i][j][2] + acc[i][j][3]);
  }
}

// c[m][n] += sum_j x(m, j) y(n, j), x and y in panel layout with xrows and yrows
// rows. Lane sums accumulate over panels and are reduced in a fixed order.
void gemm_nt_panels(const double* x, std::size_t xrows, const double* y, std::size_t yrows, std::size_t cols,
                    double* c) {
  const std::size_t np = panels(cols);
  std::size_t m = 0;
  for (; m + 4 <= xrows; m += 4) {
    std::size_t n = 0;
    for (; n + 4 <= yrows; n += 4) nt_tile<4, 4>(x + m * kLanes, xrows, y + n * kLanes, yrows, np, c + m * yrows + n);
    for (; n < yrows; ++n) nt_tile<4, 1>(x + m * kLanes, xrows, y + n * kLanes, yrows, np, c + m * yrows + n);
  }
  for (; m < xrows; ++m) {
    for (std::size_t n = 0; n < yrows; ++n) {
      nt_tile<1, 1>(x + m * kLanes, xrows, y + n * kLanes, yrows, np, c + m * yrows + n);
    }
  }
}

// Rows of a (rows, B*HW) block with row stride `stride` copied into panel layout.
void pack_rows(const double* src, std::size_t rows, std::size_t stride, std::size_t cols, std::vector<double>& out) {
  out.assign(panels(cols) * rows * kLanes, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[panel_index(r, j, rows)] = src[r * stride + j];
  }
}

Tensor conv_forward_impl(const Tensor& input, const Tensor& kernel, std::span<const double> bias) {
  const Geometry g = geometry_of(input);
  const std::size_t cout = kernel.dim(0);
  if (kernel.rank() != 4 || kernel.dim(1) != g.channels || kernel.dim(2) != 3 || kernel.dim(3) != 3) {
    throw DimensionError("conv2d: kernel must be (Cout, Cin, 3, 3) matching the input channels");
  }
  if (bias.size() != cout) throw DimensionError("conv2d: bias length must equal output channels");
  const std::size_t k = g.channels * 9;
  Tensor out({cout, g.batch, g.height, g.width});
  const std::size_t stride = g.batch * g.plane();
  const std::size_t chunk = chunk_size(k, g.plane(), g.batch);
  std::vector<double> col;
  std::vector<std::uint32_t> taps;
  std::size_t taps_nb = 0;
  for (std::size_t b0 = 0; b0 < g.batch; b0 += chunk) {
    const std::size_t nb = std::min(chunk, g.batch - b0);
    const std::size_t p = nb * g.plane();
    if (nb != taps_nb) {
      taps = tap_offsets(g, nb);
      taps_nb = nb;
    }
    im2col(input, g, b0, nb, taps, col);
    gemm_panels(kernel.data(), cout, k, bias.data(), col.data(), p, out.data() + b0 * g.plane(), stride);
  }
  return out;
}

}  // namespace

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels)
    : in_(in_channels),
      out_(out_channels),
      weight_({out_channels, in_channels, kKernel, kKernel}),
      bias_({out_channels}) {
  if (in_channels == 0 || out_channels == 0) throw InvalidInputError("conv2d: channel counts must be positive");
}

void Conv2d::init_he(Rng& rng, double gain) {
  const double stddev = gain * std::sqrt(2.0 / static_cast<double>(in_ * 9));
  for (double& w : weight_.value.values()) w = rng.normal(0.0, stddev);
  bias_.value.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& input) const { return conv_forward_impl(input, weight_.value, bias_.value.values()); }

void Conv2d::backward(const Tensor& input, const Tensor& grad_output, Tensor* grad_input) {
  const Geometry g = geometry_of(input);
  if (g.channels != in_) throw DimensionError("conv2d backward: input channels mismatch");
  if (grad_output.rank() != 4 || grad_output.dim(0) != out_ || grad_output.dim(1) != g.batch ||
      grad_output.dim(2) != g.height || grad_output.dim(3) != g.width) {
    throw DimensionError("conv2d backward: grad_output shape mismatch");
  }
  const std::size_t k = in_ * 9;
  const std::size_t stride = g.batch * g.plane();
  const std::size_t chunk = chunk_size(k, g.plane(), g.batch);
  if (grad_input != nullptr) *grad_input = Tensor(input.shape());

  // W^T, so dcol = W^T go can be produced in panel layout.
  std::vector<double> wt(grad_input != nullptr ? k * out_ : 0);
  for (std::size_t co = 0; co < out_ && grad_input != nullptr; ++co) {
    for (std::size_t kk = 0; kk < k; ++kk) wt[kk * out_ + co] = weight_.value.data()[co * k + kk];
  }
  std::vector<double> col;
  std::vector<std::uint32_t> taps;
  std::size_t taps_nb = 0;
  std::vector<double> dcol;
  std::vector<double> go_panels;
  for (std::size_t b0 = 0; b0 < g.batch; b0 += chunk) {
    const std::size_t nb = std::min(chunk, g.batch - b0);
    const std::size_t p = nb * g.plane();
    if (nb != taps_nb) {
      taps = tap_offsets(g, nb);
      taps_nb = nb;
    }
    im2col(input, g, b0, nb, taps, col);
    const double* go = grad_output.data() + b0 * g.plane();
    pack_rows(go, out_, stride, p, go_panels);
    gemm_nt_panels(go_panels.data(), out_, col.data(), k, p, weight_.grad.data());
    for (std::size_t co = 0; co < out_; ++co) {
      const double* gorow = go + co * stride;
      double bsum = 0.0;
      for (std::size_t j = 0; j < p; ++j) bsum += gorow[j];
      bias_.grad[co] += bsum;
    }
    if (grad_input != nullptr) {
      dcol.resize(panels(p) * k * kLanes);
      gemm_panels(wt.data(), k, out_, nullptr, go_panels.data(), p, dcol.data(), 0);
      col2im_add(dcol, g, b0, nb, taps, *grad_input);
    }
  }
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, std::span<const double> bias) {
  if (input.rank() == 3) {
    const Tensor in4 = input.reshaped({input.dim(0), 1, input.dim(1), input.dim(2)});
    const Tensor out = conv_forward_impl(in4, kernel, bias);
    return out.reshaped({out.dim(0), out.dim(2), out.dim(3)});
  }
  if (input.rank() != 4) throw DimensionError("conv2d_forward: input must be (C, H, W) or (C, B, H, W)");
  return conv_forward_impl(input, kernel, bias);
}

Linear::Linear(std::size_t in_features, std::size_t out_features)
    : in_(in_features), out_(out_features), weight_({out_features, in_features}), bias_({out_features}) {}

void Linear::init_xavier(Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_ + out_));
  for (double& w : weight_.value.values()) w = rng.normal(0.0, stddev);
  bias_.value.fill(0.0);
}

Tensor Linear::forward(const Tensor& input) const {
  if (input.rank() != 2 || input.dim(1) != in_) throw DimensionError("linear: input must be (B, in_features)");
  const std::size_t b = input.dim(0);
  Tensor out({b, out_});
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t o = 0; o < out_; ++o) {
      double s = bias_.value[o];
      for (std::size_t i = 0; i < in_; ++i) s += weight_.value.at(o, i) * input.at(r, i);
      out.at(r, o) = s;
    }
  }
  return out;
}

void Linear::backward(const Tensor& input, const Tensor& grad_output, Tensor* grad_input) {
  const std::size_t b = input.dim(0);
  if (grad_output.rank() != 2 || grad_output.dim(0) != b || grad_output.dim(1) != out_) {
    throw DimensionError("linear backward: grad_output shape mismatch");
  }
  if (grad_input != nullptr) *grad_input = Tensor({b, in_});
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t o = 0; o < out_; ++o) {
      const double go = grad_output.at(r, o);
      bias_.grad[o] += go;
      for (std::size_t i = 0; i < in_; ++i) {
        weight_.grad.at(o, i) += go * input.at(r, i);
        if (grad_input != nullptr) grad_input->at(r, i) += go * weight_.value.at(o, i);
      }
    }
  }
}

void relu_inplace(Tensor& t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(Tensor& grad, const Tensor& activation) {
  if (grad.size() != activation.size()) throw DimensionError("relu backward: size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
  }
}

LossResult mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.size() != target.size()) throw DimensionError("mse: prediction/target size mismatch");
  if (prediction.empty()) throw EmptyInputError("mse: empty tensors");
  LossResult r{0.0, Tensor(prediction.shape())};
  const double n = static_cast<double>(prediction.size());
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    r.loss += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

LossResult cross_entropy_loss(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) throw DimensionError("cross entropy: logits/labels mismatch");
  if (labels.empty()) throw EmptyInputError("cross entropy: empty batch");
  const std::size_t b = logits.dim(0);
  const std::size_t t = logits.dim(1);
  LossResult r{0.0, Tensor(logits.shape())};
  for (std::size_t row = 0; row < b; ++row) {
    if (labels[row] >= t) throw InvalidInputError("cross entropy: label out of range");
    const std::span<const double> l(logits.data() + row * t, t);
    const double mx = *std::max_element(l.begin(), l.end());
    double z = 0.0;
    for (double v : l) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    r.loss += log_z - l[labels[row]];
    for (std::size_t c = 0; c < t; ++c) {
      const double p = std::exp(l[c] - log_z);
      r.grad.at(row, c) = (p - (c == labels[row] ? 1.0 : 0.0)) / static_cast<double>(b);
    }
  }
  r.loss /= static_cast<double>(b);
  return r;
}

void TrainOptions::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw InvalidInputError("train options: betas must lie in (0, 1)");
  }
  if (batch_size == 0) throw InvalidInputError("train options: batch size must be at least 1");
  if (learning_rate < 0.0) throw InvalidInputError("train options: negative learning rate");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InvalidInputError("train options: validation fraction must lie in (0, 1)");
  }
}

TrainOptions TrainOptions::residual_defaults() { return TrainOptions{}; }

TrainOptions TrainOptions::classifier_defaults() {
  TrainOptions o;
  o.beta2 = 0.9999;
  o.batch_size = 32;
  o.epochs = 50;
  return o;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 std::size_t step, const TrainOptions& opts) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw DimensionError("adam: parameter/gradient/state sizes differ");
  }
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * grads[i];
    v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= opts.learning_rate * m_hat / (std::sqrt(v_hat) + opts.epsilon);
  }
}

void adam_step(std::span<Param* const> params, AdamState& state, const TrainOptions& opts) {
  if (state.m.empty()) {
    for (const Param* p : params) {
      state.m.emplace_back(p->value.size(), 0.0);
      state.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam: state does not match parameter list");
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.value.same_shape(p.grad)) throw DimensionError("adam: gradient shape differs from parameter");
    adam_update(p.value.values(), p.grad.values(), state.m[i], state.v[i], state.step, opts);
  }
}

}  // namespace emt
