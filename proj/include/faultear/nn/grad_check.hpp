// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference verification of analytic gradients. The caller
// evaluates a scalar-valued composite (layer -> sum), stores the analytic
// gradients, and hands over mutable views of every coordinate; the checker
// perturbs each one and compares.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace faultear::nn {

// One flat block of coordinates (an input or a parameter tensor) paired
// with a snapshot of its analytic gradient.
struct GradCheckBlock {
  std::span<double> values;
  std::vector<double> analytic;
};

// Max over all coordinates of |analytic - numeric| / max(1e-8, |analytic| +
// |numeric|), with numeric = (f(x+eps) - f(x-eps)) / (2 eps). `eval` must
// recompute the scalar from the current coordinate values and must not
// touch the stored analytic gradients.
double grad_check_max_rel_error(const std::function<double()>& eval,
                                std::vector<GradCheckBlock>& blocks,
                                double eps = 1e-5);

// One row of the verification report: a layer kind (or the full model),
// its measured error and the bound it must stay under.
struct GradCheckRow {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  bool passed() const { return max_rel_error < threshold; }
};

// Runs the finite-difference suite over every layer kind (conv, batchnorm,
// relu, maxpool, lstm, fc, softmax_xent) at the given step, plus the
// reduced end-to-end model at frame_len 48 with its own pinned step. Seeds
// are fixed at evaluation points clear of relu/maxpool kinks.
std::vector<GradCheckRow> run_gradcheck_suite(double eps = 1e-5);

}  // namespace faultear::nn
