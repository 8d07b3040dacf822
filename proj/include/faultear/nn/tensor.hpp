// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "faultear/errors.hpp"

namespace faultear::nn {

// Dense row-major tensor of doubles (last axis fastest). All layer code
// indexes the flat buffer directly; this struct only owns storage and shape.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }

  static std::size_t numel_of(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  std::size_t numel() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  void fill(double value) { std::fill(data.begin(), data.end(), value); }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& want,
                          const char* what) {
  if (t.shape != want) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": expected " +
                                         shape_string(want) + " got " +
                                         shape_string(t.shape));
  }
}

}  // namespace faultear::nn
