// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward and hand-derived backward passes for every layer of the network.
// Layers own their parameters, gradients and forward caches; backward
// consumes the upstream gradient, accumulates parameter gradients and
// returns the input gradient. Everything runs in double precision.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faultear/nn/tensor.hpp"
#include "faultear/rng.hpp"

namespace faultear::nn {

enum class Mode { Train, Infer };

// Named view of one learnable plus its gradient, used by the optimizer,
// the gradient checker and checkpointing.
struct ParamRef {
  const char* name;
  Tensor* value;
  Tensor* grad;
};

// 1xK convolution along the W axis of [R, H, W, C] activations (R = folded
// batch rows). Stride 1, 'same' zero padding split floor/ceil of (K-1)/2.
class Conv1xK {
 public:
  Conv1xK(std::size_t kernel, std::size_t in_channels, std::size_t out_channels);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& upstream);

  std::vector<ParamRef> params();
  void zero_grad();

  std::size_t kernel() const { return kernel_; }
  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }

  Tensor weights;  // [1, K, Cin, Cout]
  Tensor bias;     // [1, 1, Cout]
  Tensor weights_grad;
  Tensor bias_grad;

 private:
  std::size_t kernel_, in_channels_, out_channels_;
  Tensor x_cache_;
};

// Per-channel batch normalization over all rows and spatial positions of
// [R, H, W, C]. Train mode uses batch statistics (population variance) and
// updates running stats with momentum; Infer normalizes with running stats.
class BatchNorm {
 public:
  explicit BatchNorm(std::size_t channels, double epsilon = 1e-5,
                     double momentum = 0.1, bool freeze_offset = false);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& upstream);

  std::vector<ParamRef> params();
  void zero_grad();

  std::size_t channels() const { return channels_; }
  double epsilon() const { return epsilon_; }
  double momentum() const { return momentum_; }

  Tensor scale;   // gamma, [1, 1, C]
  Tensor offset;  // beta, [1, 1, C]
  Tensor scale_grad;
  Tensor offset_grad;
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]

 private:
  std::size_t channels_;
  double epsilon_, momentum_;
  bool freeze_offset_;
  // Train-mode caches
  Tensor xhat_cache_;
  std::vector<double> inv_std_cache_;
  std::size_t per_channel_count_ = 0;
};

// Elementwise max(0, x). Gradient at exactly 0 is taken as 0.
class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& upstream);

 private:
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> shape_;
};

// 1x2 max pooling with stride 2 along W: [R, H, W, C] -> [R, H, W/2, C].
// Ties take the left element; the winning offset is kept for backward.
class MaxPool1x2 {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& upstream);

 private:
  std::vector<std::uint8_t> argmax_;  // 0 = left, 1 = right
  std::vector<std::size_t> in_shape_;
};

// LSTM over [B, T, D] sequences, returning the last hidden state [B, H].
// Gate blocks are stacked (i, f, g, o) in the 4H parameter rows; h0 and c0
// are zero.
class Lstm {
 public:
  Lstm(std::size_t input_dim, std::size_t hidden);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& upstream);

  std::vector<ParamRef> params();
  void zero_grad();

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }

  Tensor input_weights;      // [4H, D]
  Tensor recurrent_weights;  // [4H, H]
  Tensor bias;               // [4H]
  Tensor input_weights_grad;
  Tensor recurrent_weights_grad;
  Tensor bias_grad;

 private:
  std::size_t input_dim_, hidden_;
  // Caches for backward, laid out [B, T, *].
  Tensor x_cache_;
  Tensor gates_cache_;   // [B, T, 4H] post-activation (i, f, g, o)
  Tensor cell_cache_;    // [B, T, H]
  Tensor tanh_c_cache_;  // [B, T, H]
  Tensor hidden_cache_;  // [B, T, H]
};

// Inverted dropout on [B, F]: Train zeroes each element with probability
// rate and scales survivors by 1/(1-rate); Infer is the identity. The rng
// is only consulted (and required) in Train mode.
class Dropout {
 public:
  explicit Dropout(double rate);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng);
  Tensor backward(const Tensor& upstream);

  double rate() const { return rate_; }

 private:
  double rate_;
  std::vector<double> mask_;
  bool identity_ = true;
};

// Fully connected [B, In] -> [B, Out]: y = W x + b.
class FullyConnected {
 public:
  FullyConnected(std::size_t in_dim, std::size_t out_dim);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& upstream);

  std::vector<ParamRef> params();
  void zero_grad();

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }

  Tensor weights;  // [Out, In]
  Tensor bias;     // [Out]
  Tensor weights_grad;
  Tensor bias_grad;

 private:
  std::size_t in_dim_, out_dim_;
  Tensor x_cache_;
};

// Numerically stable fused softmax + cross-entropy for one sample.
struct SoftmaxXent {
  double loss = 0.0;
  std::vector<double> probs;    // sums to 1 within 1e-12
  std::vector<double> dlogits;  // probs - onehot(target)
};

SoftmaxXent softmax_crossentropy(std::span<const double> logits, int target);

// Softmax alone (Infer-time probabilities).
std::vector<double> softmax(std::span<const double> logits);

}  // namespace faultear::nn
