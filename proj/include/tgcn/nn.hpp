#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tgcn/dense_array.hpp"
#include "tgcn/graph.hpp"
#include "tgcn/rng.hpp"

namespace tgcn {

// Trainable tensor with its gradient and Adam moment buffers.
struct Param {
  std::string name;
  DenseArray value;
  DenseArray grad;
  DenseArray m;
  DenseArray v;

  Param() = default;
  Param(std::string n, std::vector<std::int64_t> shape)
      : name(std::move(n)), value(shape), grad(shape), m(shape), v(shape) {}

  void zero_grad() { grad.fill(0.0); }
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void glorot_init(Param& p, std::int64_t fan_in, std::int64_t fan_out,
                 RngStream& rng);

// C += A * B for row-major A (rows x kdim), B (kdim x cols). Rows are
// partitioned over workers; every output element accumulates in a fixed
// serial order, so results do not depend on the worker count.
void gemm_accum(const double* a, const double* b, double* c, std::int64_t rows,
                std::int64_t kdim, std::int64_t cols);

// C += A^T * B for row-major A (rows x kdim), B (rows x cols), C (kdim x cols).
void gemm_at_b_accum(const double* a, const double* b, double* c,
                     std::int64_t rows, std::int64_t kdim, std::int64_t cols);

enum class Activation { glu, sigmoid, linear };

class Layer {
 public:
  virtual ~Layer() = default;
  virtual DenseArray forward(const DenseArray& x) = 0;
  // grad_out has the forward output's shape; returns the input gradient
  // (empty when need_input_grad is false). Parameter gradients accumulate.
  virtual DenseArray backward(const DenseArray& grad_out,
                              bool need_input_grad) = 0;
  virtual void collect_params(std::vector<Param*>& out) = 0;
  virtual const std::string& name() const = 0;
};

// 3D graph convolution: one contraction over input channels, temporal taps
// and graph-filter orders, followed by GLU, sigmoid or no activation.
// Output at time t reads input times t .. t+K_t-1 (valid convolution, no
// padding), with tap t' weighting input step t+K_t-1-t'.
class GConv3DLayer : public Layer {
 public:
  // korder == 1 collapses the graph term to the identity, which is exactly
  // the 1D temporal convolution; `lap` may be null in that case.
  GConv3DLayer(std::string name, std::int64_t c_in, std::int64_t c_out, int kt,
               int korder, Activation act, const ScaledLaplacian* lap,
               ChebBasis basis, RngStream& rng);

  DenseArray forward(const DenseArray& x) override;
  DenseArray backward(const DenseArray& grad_out, bool need_input_grad) override;
  void collect_params(std::vector<Param*>& out) override;
  const std::string& name() const override { return name_; }

  Param& theta() { return theta_; }
  Param& bias() { return bias_; }
  std::int64_t c_raw() const { return c_raw_; }

 private:
  std::string name_;
  std::int64_t c_in_, c_out_, c_raw_;
  int kt_, korder_;
  Activation act_;
  const ScaledLaplacian* lap_;
  ChebBasis basis_;
  Param theta_;  // C_i x C_raw x K_t x K
  Param bias_;   // C_raw

  bool have_forward_ = false;
  std::vector<std::int64_t> in_shape_;
  DenseArray ych_;    // B x T x K x n x C_i: graph-filtered input stack
  DenseArray acol_;   // rows x (K_t*K*C_i): gathered convolution inputs
  DenseArray z_;      // B x T_out x n x C_raw: pre-activation
  DenseArray dz_, dacol_, dych_;  // backward scratch, reused across batches
};

// Normalizes each (batch, time) slice over the joint node x channel axes,
// then rescales with gamma and shifts with beta (both n x C).
class LayerNormLayer : public Layer {
 public:
  LayerNormLayer(std::string name, std::int64_t n, std::int64_t channels);

  DenseArray forward(const DenseArray& x) override;
  DenseArray backward(const DenseArray& grad_out, bool need_input_grad) override;
  void collect_params(std::vector<Param*>& out) override;
  const std::string& name() const override { return name_; }

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }

 private:
  std::string name_;
  std::int64_t n_, c_;
  Param gamma_, beta_;
  bool have_forward_ = false;
  DenseArray xhat_;     // B x T x n x C
  DenseArray inv_std_;  // B x T
};

// One conv block: two GLU graph convolutions, an identity skip connection
// (input cropped to each output's newest time step, channels zero-padded),
// then layer normalization. The skip keeps deep stacks trainable.
class GConvBlock : public Layer {
 public:
  GConvBlock(std::string name, std::int64_t n, std::int64_t c_in,
             std::int64_t channels, int layers, int kt, int korder,
             const ScaledLaplacian* lap, ChebBasis basis, RngStream& rng);

  DenseArray forward(const DenseArray& x) override;
  DenseArray backward(const DenseArray& grad_out, bool need_input_grad) override;
  void collect_params(std::vector<Param*>& out) override;
  const std::string& name() const override { return name_; }

 private:
  std::string name_;
  std::int64_t c_in_, channels_;
  std::vector<std::unique_ptr<GConv3DLayer>> convs_;
  std::unique_ptr<LayerNormLayer> norm_;
  std::vector<std::int64_t> in_shape_;
};

// Per-node readout with one shared weight vector: out[b,i] = w . X[b,i,:] + b.
class SharedFCLayer : public Layer {
 public:
  SharedFCLayer(std::string name, std::int64_t channels, RngStream& rng);

  DenseArray forward(const DenseArray& x) override;  // B x n x C -> B x n
  DenseArray backward(const DenseArray& grad_out, bool need_input_grad) override;
  void collect_params(std::vector<Param*>& out) override;
  const std::string& name() const override { return name_; }

  Param& weight() { return w_; }
  Param& bias() { return b_; }

 private:
  std::string name_;
  std::int64_t c_;
  Param w_, b_;
  bool have_forward_ = false;
  DenseArray input_;
};

// Mean over the batch of (1/2)||e_b||_2^2 + ||e_b||_1. The gradient is
// ((pred - target) + sign(pred - target)) / B with sign(0) := 0.
double combined_loss(const DenseArray& pred, const DenseArray& target,
                     DenseArray* grad = nullptr);

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam step; `t` is the 1-based step count.
void adam_update(std::span<Param* const> params, int t, const AdamConfig& cfg);

}  // namespace tgcn
