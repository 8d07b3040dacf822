// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "faultear/nn/layers.hpp"
#include "faultear/nn/tensor.hpp"

namespace faultear::nn {

// One SGD update on a flat parameter block. With momentum mu:
//   v <- mu * v + g,  p <- p - lr * v
// and plain p <- p - lr * g when mu == 0 (velocity still tracked so the two
// formulas agree).
inline void sgd_step(std::span<double> param, std::span<const double> grad,
                     std::span<double> velocity, double lr, double momentum) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw Error(Errc::ShapeMismatch, "sgd_step size mismatch");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

// Owns one velocity buffer per registered parameter.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void attach(const std::vector<ParamRef>& params) {
    for (const ParamRef& p : params) {
      params_.push_back(p);
      velocities_.emplace_back(p.value->numel(), 0.0);
    }
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      sgd_step(params_[i].value->data, params_[i].grad->data, velocities_[i], lr_,
               momentum_);
    }
  }

  double lr() const { return lr_; }

 private:
  double lr_, momentum_;
  std::vector<ParamRef> params_;
  std::vector<std::vector<double>> velocities_;
};

}  // namespace faultear::nn
