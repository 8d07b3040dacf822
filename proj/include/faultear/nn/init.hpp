// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// Weight initialization: uniform Glorot for feed-forward weights,
// orthogonal blocks for recurrent weights, zero biases except the LSTM
// forget gate (set to 1 by the model builder).

#pragma once

#include <cmath>
#include <span>

#include "faultear/nn/tensor.hpp"
#include "faultear/rng.hpp"

namespace faultear::nn {

inline void glorot_uniform(std::span<double> values, std::size_t fan_in,
                           std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : values) v = rng.uniform(-bound, bound);
}

// Fills a square n x n row-major block with an orthogonal matrix, produced
// by modified Gram-Schmidt on Gaussian rows.
inline void orthogonal_square(std::span<double> block, std::size_t n, Rng& rng) {
  for (double& v : block) v = rng.gaussian();
  for (std::size_t r = 0; r < n; ++r) {
    double* row = block.data() + r * n;
    for (std::size_t prev = 0; prev < r; ++prev) {
      const double* q = block.data() + prev * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += row[i] * q[i];
      for (std::size_t i = 0; i < n; ++i) row[i] -= dot * q[i];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += row[i] * row[i];
    norm = std::sqrt(norm);
    // A random Gaussian matrix is full rank with probability 1; if a row
    // still collapses numerically, fall back to a unit vector.
    if (norm < 1e-12) {
      for (std::size_t i = 0; i < n; ++i) row[i] = (i == r % n) ? 1.0 : 0.0;
    } else {
      for (std::size_t i = 0; i < n; ++i) row[i] /= norm;
    }
  }
}

}  // namespace faultear::nn
