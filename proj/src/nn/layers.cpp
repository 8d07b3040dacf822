// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#include "faultear/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace faultear::nn {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_rank4(const Tensor& t, const char* what) {
  if (t.shape.size() != 4) {
    throw Error(Errc::ShapeMismatch,
                std::string(what) + ": expected rank-4 activations, got " +
                    shape_string(t.shape));
  }
}

}  // namespace

// --- Conv1xK ---------------------------------------------------------------

Conv1xK::Conv1xK(std::size_t kernel, std::size_t in_channels, std::size_t out_channels)
    : weights({1, kernel, in_channels, out_channels}),
      bias({1, 1, out_channels}),
      weights_grad({1, kernel, in_channels, out_channels}),
      bias_grad({1, 1, out_channels}),
      kernel_(kernel),
      in_channels_(in_channels),
      out_channels_(out_channels) {
  if (kernel == 0 || in_channels == 0 || out_channels == 0) {
    throw Error(Errc::ShapeMismatch, "conv dimensions must be positive");
  }
}

Tensor Conv1xK::forward(const Tensor& x) {
  require_rank4(x, "conv forward");
  if (x.shape[3] != in_channels_) {
    throw Error(Errc::ShapeMismatch, "conv input channels " + std::to_string(x.shape[3]) +
                                         " != " + std::to_string(in_channels_));
  }
  const std::size_t rows = x.shape[0] * x.shape[1];  // R*H rows, processed alike
  const std::size_t width = x.shape[2];
  const std::size_t pad_left = (kernel_ - 1) / 2;

  Tensor y({x.shape[0], x.shape[1], width, out_channels_});
  const double* xd = x.data.data();
  const double* wd = weights.data.data();
  const double* bd = bias.data.data();
  double* yd = y.data.data();

  for (std::size_t row = 0; row < rows; ++row) {
    const double* xrow = xd + row * width * in_channels_;
    double* yrow = yd + row * width * out_channels_;
    for (std::size_t w = 0; w < width; ++w) {
      double* yout = yrow + w * out_channels_;
      for (std::size_t co = 0; co < out_channels_; ++co) yout[co] = bd[co];
      for (std::size_t k = 0; k < kernel_; ++k) {
        // 'same' padding: taps outside [0, width) read as zero.
        const std::ptrdiff_t xi =
            static_cast<std::ptrdiff_t>(w + k) - static_cast<std::ptrdiff_t>(pad_left);
        if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(width)) continue;
        const double* xin = xrow + static_cast<std::size_t>(xi) * in_channels_;
        const double* wk = wd + k * in_channels_ * out_channels_;
        for (std::size_t ci = 0; ci < in_channels_; ++ci) {
          const double xv = xin[ci];
          const double* wrow = wk + ci * out_channels_;
          for (std::size_t co = 0; co < out_channels_; ++co) {
            yout[co] += xv * wrow[co];
          }
        }
      }
    }
  }
  x_cache_ = x;
  return y;
}

Tensor Conv1xK::backward(const Tensor& upstream) {
  const Tensor& x = x_cache_;
  require_shape(upstream, {x.shape[0], x.shape[1], x.shape[2], out_channels_},
                "conv backward");
  const std::size_t rows = x.shape[0] * x.shape[1];
  const std::size_t width = x.shape[2];
  const std::size_t pad_left = (kernel_ - 1) / 2;

  Tensor dx(x.shape);
  const double* xd = x.data.data();
  const double* wd = weights.data.data();
  const double* dyd = upstream.data.data();
  double* dxd = dx.data.data();
  double* dwd = weights_grad.data.data();
  double* dbd = bias_grad.data.data();

  for (std::size_t row = 0; row < rows; ++row) {
    const double* xrow = xd + row * width * in_channels_;
    const double* dyrow = dyd + row * width * out_channels_;
    double* dxrow = dxd + row * width * in_channels_;
    for (std::size_t w = 0; w < width; ++w) {
      const double* dyo = dyrow + w * out_channels_;
      for (std::size_t co = 0; co < out_channels_; ++co) dbd[co] += dyo[co];
      for (std::size_t k = 0; k < kernel_; ++k) {
        const std::ptrdiff_t xi =
            static_cast<std::ptrdiff_t>(w + k) - static_cast<std::ptrdiff_t>(pad_left);
        if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(width)) continue;
        const double* xin = xrow + static_cast<std::size_t>(xi) * in_channels_;
        double* dxin = dxrow + static_cast<std::size_t>(xi) * in_channels_;
        const double* wk = wd + k * in_channels_ * out_channels_;
        double* dwk = dwd + k * in_channels_ * out_channels_;
        for (std::size_t ci = 0; ci < in_channels_; ++ci) {
          const double* wrow = wk + ci * out_channels_;
          double* dwrow = dwk + ci * out_channels_;
          const double xv = xin[ci];
          double acc = 0.0;
          for (std::size_t co = 0; co < out_channels_; ++co) {
            acc += dyo[co] * wrow[co];
            dwrow[co] += xv * dyo[co];
          }
          dxin[ci] += acc;
        }
      }
    }
  }
  return dx;
}

std::vector<ParamRef> Conv1xK::params() {
  return {{"weights", &weights, &weights_grad}, {"bias", &bias, &bias_grad}};
}

void Conv1xK::zero_grad() {
  weights_grad.fill(0.0);
  bias_grad.fill(0.0);
}

// --- BatchNorm ---------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t channels, double epsilon, double momentum,
                     bool freeze_offset)
    : scale({1, 1, channels}),
      offset({1, 1, channels}),
      scale_grad({1, 1, channels}),
      offset_grad({1, 1, channels}),
      running_mean({channels}),
      running_var({channels}),
      channels_(channels),
      epsilon_(epsilon),
      momentum_(momentum),
      freeze_offset_(freeze_offset) {
  scale.fill(1.0);
  running_var.fill(1.0);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  require_rank4(x, "batchnorm forward");
  if (x.shape[3] != channels_) {
    throw Error(Errc::ShapeMismatch, "batchnorm channels mismatch");
  }
  const std::size_t positions = x.shape[0] * x.shape[1] * x.shape[2];
  Tensor y(x.shape);

  if (mode == Mode::Infer) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const double inv = 1.0 / std::sqrt(running_var.data[c] + epsilon_);
      const double g = scale.data[c] * inv;
      const double b = offset.data[c] - running_mean.data[c] * g;
      for (std::size_t p = 0; p < positions; ++p) {
        y.data[p * channels_ + c] = x.data[p * channels_ + c] * g + b;
      }
    }
    return y;
  }

  if (x.shape[0] < 2) {
    throw Error(Errc::TinyBatch, "batchnorm training needs a batch of at least 2");
  }

  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  for (std::size_t p = 0; p < positions; ++p) {
    const double* xp = x.data.data() + p * channels_;
    for (std::size_t c = 0; c < channels_; ++c) mean[c] += xp[c];
  }
  const double inv_count = 1.0 / static_cast<double>(positions);
  for (std::size_t c = 0; c < channels_; ++c) mean[c] *= inv_count;
  for (std::size_t p = 0; p < positions; ++p) {
    const double* xp = x.data.data() + p * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      const double d = xp[c] - mean[c];
      var[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) var[c] *= inv_count;

  inv_std_cache_.assign(channels_, 0.0);
  for (std::size_t c = 0; c < channels_; ++c) {
    inv_std_cache_[c] = 1.0 / std::sqrt(var[c] + epsilon_);
  }
  xhat_cache_ = Tensor(x.shape);
  per_channel_count_ = positions;
  for (std::size_t p = 0; p < positions; ++p) {
    const double* xp = x.data.data() + p * channels_;
    double* hp = xhat_cache_.data.data() + p * channels_;
    double* yp = y.data.data() + p * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      hp[c] = (xp[c] - mean[c]) * inv_std_cache_[c];
      yp[c] = hp[c] * scale.data[c] + offset.data[c];
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    running_mean.data[c] = (1.0 - momentum_) * running_mean.data[c] + momentum_ * mean[c];
    running_var.data[c] = (1.0 - momentum_) * running_var.data[c] + momentum_ * var[c];
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& upstream) {
  require_shape(upstream, xhat_cache_.shape, "batchnorm backward");
  const std::size_t positions = per_channel_count_;
  std::vector<double> sum_dy(channels_, 0.0), sum_dy_xhat(channels_, 0.0);
  for (std::size_t p = 0; p < positions; ++p) {
    const double* dyp = upstream.data.data() + p * channels_;
    const double* hp = xhat_cache_.data.data() + p * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      sum_dy[c] += dyp[c];
      sum_dy_xhat[c] += dyp[c] * hp[c];
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    scale_grad.data[c] += sum_dy_xhat[c];
    if (!freeze_offset_) offset_grad.data[c] += sum_dy[c];
  }

  // dx = gamma * inv_std / M * (M*dy - sum(dy) - xhat * sum(dy*xhat))
  Tensor dx(xhat_cache_.shape);
  const double inv_count = 1.0 / static_cast<double>(positions);
  for (std::size_t p = 0; p < positions; ++p) {
    const double* dyp = upstream.data.data() + p * channels_;
    const double* hp = xhat_cache_.data.data() + p * channels_;
    double* dxp = dx.data.data() + p * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      dxp[c] = scale.data[c] * inv_std_cache_[c] *
               (dyp[c] - inv_count * (sum_dy[c] + hp[c] * sum_dy_xhat[c]));
    }
  }
  return dx;
}

std::vector<ParamRef> BatchNorm::params() {
  return {{"scale", &scale, &scale_grad}, {"offset", &offset, &offset_grad}};
}

void BatchNorm::zero_grad() {
  scale_grad.fill(0.0);
  offset_grad.fill(0.0);
}

// --- Relu ---------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  Tensor y(x.shape);
  mask_.assign(x.numel(), 0);
  shape_ = x.shape;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (x.data[i] > 0.0) {
      y.data[i] = x.data[i];
      mask_[i] = 1;
    }
  }
  return y;
}

Tensor Relu::backward(const Tensor& upstream) {
  require_shape(upstream, shape_, "relu backward");
  Tensor dx(shape_);
  for (std::size_t i = 0; i < dx.numel(); ++i) {
    dx.data[i] = mask_[i] ? upstream.data[i] : 0.0;
  }
  return dx;
}

// --- MaxPool1x2 ---------------------------------------------------------------

Tensor MaxPool1x2::forward(const Tensor& x) {
  require_rank4(x, "maxpool forward");
  const std::size_t width = x.shape[2];
  if (width % 2 != 0) {
    throw Error(Errc::OddWidth, "maxpool width " + std::to_string(width) + " is odd");
  }
  const std::size_t channels = x.shape[3];
  const std::size_t rows = x.shape[0] * x.shape[1];
  const std::size_t out_width = width / 2;

  in_shape_ = x.shape;
  Tensor y({x.shape[0], x.shape[1], out_width, channels});
  argmax_.assign(y.numel(), 0);

  for (std::size_t row = 0; row < rows; ++row) {
    const double* xrow = x.data.data() + row * width * channels;
    double* yrow = y.data.data() + row * out_width * channels;
    std::uint8_t* arow = argmax_.data() + row * out_width * channels;
    for (std::size_t j = 0; j < out_width; ++j) {
      const double* left = xrow + (2 * j) * channels;
      const double* right = left + channels;
      for (std::size_t c = 0; c < channels; ++c) {
        // Ties take the left element.
        if (right[c] > left[c]) {
          yrow[j * channels + c] = right[c];
          arow[j * channels + c] = 1;
        } else {
          yrow[j * channels + c] = left[c];
        }
      }
    }
  }
  return y;
}

Tensor MaxPool1x2::backward(const Tensor& upstream) {
  const std::size_t channels = in_shape_[3];
  const std::size_t out_width = in_shape_[2] / 2;
  require_shape(upstream, {in_shape_[0], in_shape_[1], out_width, channels},
                "maxpool backward");
  Tensor dx(in_shape_);
  const std::size_t rows = in_shape_[0] * in_shape_[1];
  for (std::size_t row = 0; row < rows; ++row) {
    const double* dyrow = upstream.data.data() + row * out_width * channels;
    const std::uint8_t* arow = argmax_.data() + row * out_width * channels;
    double* dxrow = dx.data.data() + row * in_shape_[2] * channels;
    for (std::size_t j = 0; j < out_width; ++j) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t offset = arow[j * channels + c];
        dxrow[(2 * j + offset) * channels + c] += dyrow[j * channels + c];
      }
    }
  }
  return dx;
}

// --- Lstm ---------------------------------------------------------------

Lstm::Lstm(std::size_t input_dim, std::size_t hidden)
    : input_weights({4 * hidden, input_dim}),
      recurrent_weights({4 * hidden, hidden}),
      bias({4 * hidden}),
      input_weights_grad({4 * hidden, input_dim}),
      recurrent_weights_grad({4 * hidden, hidden}),
      bias_grad({4 * hidden}),
      input_dim_(input_dim),
      hidden_(hidden) {}

Tensor Lstm::forward(const Tensor& x) {
  if (x.shape.size() != 3 || x.shape[2] != input_dim_) {
    throw Error(Errc::ShapeMismatch, "lstm expects [B, T, " +
                                         std::to_string(input_dim_) + "], got " +
                                         shape_string(x.shape));
  }
  const std::size_t batch = x.shape[0];
  const std::size_t steps = x.shape[1];
  const std::size_t h4 = 4 * hidden_;

  x_cache_ = x;
  gates_cache_ = Tensor({batch, steps, h4});
  cell_cache_ = Tensor({batch, steps, hidden_});
  tanh_c_cache_ = Tensor({batch, steps, hidden_});
  hidden_cache_ = Tensor({batch, steps, hidden_});

  Tensor out({batch, hidden_});
  std::vector<double> z(h4);

  for (std::size_t b = 0; b < batch; ++b) {
    const double* h_prev = nullptr;  // null means zeros (t = 0)
    const double* c_prev = nullptr;
    for (std::size_t t = 0; t < steps; ++t) {
      const double* xt = x.data.data() + (b * steps + t) * input_dim_;
      // z = W_in * x_t + W_rec * h_prev + bias
      for (std::size_t r = 0; r < h4; ++r) {
        const double* wrow = input_weights.data.data() + r * input_dim_;
        double acc = bias.data[r];
        for (std::size_t d = 0; d < input_dim_; ++d) acc += wrow[d] * xt[d];
        if (h_prev != nullptr) {
          const double* rrow = recurrent_weights.data.data() + r * hidden_;
          for (std::size_t u = 0; u < hidden_; ++u) acc += rrow[u] * h_prev[u];
        }
        z[r] = acc;
      }
      double* gates = gates_cache_.data.data() + (b * steps + t) * h4;
      double* cell = cell_cache_.data.data() + (b * steps + t) * hidden_;
      double* tanh_c = tanh_c_cache_.data.data() + (b * steps + t) * hidden_;
      double* hidden = hidden_cache_.data.data() + (b * steps + t) * hidden_;
      for (std::size_t u = 0; u < hidden_; ++u) {
        const double gi = sigmoid(z[u]);
        const double gf = sigmoid(z[hidden_ + u]);
        const double gg = std::tanh(z[2 * hidden_ + u]);
        const double go = sigmoid(z[3 * hidden_ + u]);
        gates[u] = gi;
        gates[hidden_ + u] = gf;
        gates[2 * hidden_ + u] = gg;
        gates[3 * hidden_ + u] = go;
        const double c = gf * (c_prev ? c_prev[u] : 0.0) + gi * gg;
        cell[u] = c;
        tanh_c[u] = std::tanh(c);
        hidden[u] = go * tanh_c[u];
      }
      h_prev = hidden;
      c_prev = cell;
    }
    const double* h_last = hidden_cache_.data.data() + (b * steps + (steps - 1)) * hidden_;
    std::copy(h_last, h_last + hidden_, out.data.data() + b * hidden_);
  }
  return out;
}

Tensor Lstm::backward(const Tensor& upstream) {
  const std::size_t batch = x_cache_.shape[0];
  const std::size_t steps = x_cache_.shape[1];
  require_shape(upstream, {batch, hidden_}, "lstm backward");
  const std::size_t h4 = 4 * hidden_;

  Tensor dx(x_cache_.shape);
  std::vector<double> dh(hidden_), dc(hidden_), dz(h4), dh_next(hidden_);

  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(upstream.data.data() + b * hidden_,
              upstream.data.data() + (b + 1) * hidden_, dh.begin());
    std::fill(dc.begin(), dc.end(), 0.0);

    for (std::size_t t = steps; t-- > 0;) {
      const double* gates = gates_cache_.data.data() + (b * steps + t) * h4;
      const double* cell = cell_cache_.data.data() + (b * steps + t) * hidden_;
      const double* tanh_c = tanh_c_cache_.data.data() + (b * steps + t) * hidden_;
      const double* c_prev =
          t > 0 ? cell_cache_.data.data() + (b * steps + t - 1) * hidden_ : nullptr;
      const double* h_prev =
          t > 0 ? hidden_cache_.data.data() + (b * steps + t - 1) * hidden_ : nullptr;
      const double* xt = x_cache_.data.data() + (b * steps + t) * input_dim_;

      for (std::size_t u = 0; u < hidden_; ++u) {
        const double gi = gates[u];
        const double gf = gates[hidden_ + u];
        const double gg = gates[2 * hidden_ + u];
        const double go = gates[3 * hidden_ + u];
        const double tc = tanh_c[u];

        const double dcell = dc[u] + dh[u] * go * (1.0 - tc * tc);
        const double d_i = dcell * gg;
        const double d_f = dcell * (c_prev ? c_prev[u] : 0.0);
        const double d_g = dcell * gi;
        const double d_o = dh[u] * tc;

        dz[u] = d_i * gi * (1.0 - gi);
        dz[hidden_ + u] = d_f * gf * (1.0 - gf);
        dz[2 * hidden_ + u] = d_g * (1.0 - gg * gg);
        dz[3 * hidden_ + u] = d_o * go * (1.0 - go);

        dc[u] = dcell * gf;  // flows to c_{t-1}
        (void)cell;
      }

      double* dxt = dx.data.data() + (b * steps + t) * input_dim_;
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (std::size_t r = 0; r < h4; ++r) {
        const double dzr = dz[r];
        bias_grad.data[r] += dzr;
        double* dwrow = input_weights_grad.data.data() + r * input_dim_;
        const double* wrow = input_weights.data.data() + r * input_dim_;
        for (std::size_t d = 0; d < input_dim_; ++d) {
          dwrow[d] += dzr * xt[d];
          dxt[d] += dzr * wrow[d];
        }
        if (h_prev != nullptr) {
          double* drrow = recurrent_weights_grad.data.data() + r * hidden_;
          const double* rrow = recurrent_weights.data.data() + r * hidden_;
          for (std::size_t u = 0; u < hidden_; ++u) {
            drrow[u] += dzr * h_prev[u];
            dh_next[u] += dzr * rrow[u];
          }
        }
      }
      std::copy(dh_next.begin(), dh_next.end(), dh.begin());
    }
  }
  return dx;
}

std::vector<ParamRef> Lstm::params() {
  return {{"input_weights", &input_weights, &input_weights_grad},
          {"recurrent_weights", &recurrent_weights, &recurrent_weights_grad},
          {"bias", &bias, &bias_grad}};
}

void Lstm::zero_grad() {
  input_weights_grad.fill(0.0);
  recurrent_weights_grad.fill(0.0);
  bias_grad.fill(0.0);
}

// --- Dropout ---------------------------------------------------------------

Dropout::Dropout(double rate) : rate_(rate) {
  if (rate < 0.0 || rate >= 1.0) {
    throw Error(Errc::BadRate, "dropout rate must be in [0, 1)");
  }
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (mode == Mode::Infer) {
    identity_ = true;
    return x;
  }
  if (rng == nullptr) {
    throw Error(Errc::BadRate, "dropout in Train mode needs an rng");
  }
  identity_ = false;
  const double keep_scale = 1.0 / (1.0 - rate_);
  mask_.assign(x.numel(), 0.0);
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (rng->uniform01() >= rate_) {
      mask_[i] = keep_scale;
      y.data[i] = x.data[i] * keep_scale;
    }
  }
  return y;
}

Tensor Dropout::backward(const Tensor& upstream) {
  if (identity_) return upstream;
  Tensor dx(upstream.shape);
  for (std::size_t i = 0; i < dx.numel(); ++i) {
    dx.data[i] = upstream.data[i] * mask_[i];
  }
  return dx;
}

// --- FullyConnected ---------------------------------------------------------

FullyConnected::FullyConnected(std::size_t in_dim, std::size_t out_dim)
    : weights({out_dim, in_dim}),
      bias({out_dim}),
      weights_grad({out_dim, in_dim}),
      bias_grad({out_dim}),
      in_dim_(in_dim),
      out_dim_(out_dim) {}

Tensor FullyConnected::forward(const Tensor& x) {
  if (x.shape.size() != 2 || x.shape[1] != in_dim_) {
    throw Error(Errc::ShapeMismatch, "fc expects [B, " + std::to_string(in_dim_) +
                                         "], got " + shape_string(x.shape));
  }
  const std::size_t batch = x.shape[0];
  Tensor y({batch, out_dim_});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.data.data() + b * in_dim_;
    double* yb = y.data.data() + b * out_dim_;
    for (std::size_t o = 0; o < out_dim_; ++o) {
      const double* wrow = weights.data.data() + o * in_dim_;
      double acc = bias.data[o];
      for (std::size_t i = 0; i < in_dim_; ++i) acc += wrow[i] * xb[i];
      yb[o] = acc;
    }
  }
  x_cache_ = x;
  return y;
}

Tensor FullyConnected::backward(const Tensor& upstream) {
  const std::size_t batch = x_cache_.shape[0];
  require_shape(upstream, {batch, out_dim_}, "fc backward");
  Tensor dx(x_cache_.shape);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x_cache_.data.data() + b * in_dim_;
    const double* dyb = upstream.data.data() + b * out_dim_;
    double* dxb = dx.data.data() + b * in_dim_;
    for (std::size_t o = 0; o < out_dim_; ++o) {
      const double dyo = dyb[o];
      bias_grad.data[o] += dyo;
      double* dwrow = weights_grad.data.data() + o * in_dim_;
      const double* wrow = weights.data.data() + o * in_dim_;
      for (std::size_t i = 0; i < in_dim_; ++i) {
        dwrow[i] += dyo * xb[i];
        dxb[i] += dyo * wrow[i];
      }
    }
  }
  return dx;
}

std::vector<ParamRef> FullyConnected::params() {
  return {{"weights", &weights, &weights_grad}, {"bias", &bias, &bias_grad}};
}

void FullyConnected::zero_grad() {
  weights_grad.fill(0.0);
  bias_grad.fill(0.0);
}

// --- Softmax / cross-entropy --------------------------------------------------

std::vector<double> softmax(std::span<const double> logits) {
  double max_logit = logits[0];
  for (double v : logits) max_logit = std::max(max_logit, v);
  std::vector<double> probs(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    z += probs[i];
  }
  for (double& p : probs) p /= z;
  return probs;
}

SoftmaxXent softmax_crossentropy(std::span<const double> logits, int target) {
  if (logits.size() < 2) {
    throw Error(Errc::ShapeMismatch, "softmax needs at least 2 classes");
  }
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw Error(Errc::BadTarget, "target " + std::to_string(target) + " out of range");
  }
  double max_logit = logits[0];
  for (double v : logits) max_logit = std::max(max_logit, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - max_logit);

  SoftmaxXent out;
  out.probs.resize(logits.size());
  out.dlogits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.probs[i] = std::exp(logits[i] - max_logit) / z;
    out.dlogits[i] = out.probs[i];
  }
  out.dlogits[static_cast<std::size_t>(target)] -= 1.0;
  // loss = log(sum exp) - logit[target], evaluated without forming p first
  out.loss = std::log(z) + max_logit - logits[static_cast<std::size_t>(target)];
  return out;
}

}  // namespace faultear::nn
