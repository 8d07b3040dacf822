// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference verification of every backward pass. Each check builds
// a scalar composite (layer -> weighted sum, the weights fixed and random
// so no gradient direction degenerates), runs the analytic backward once,
// then compares against central differences coordinate by coordinate.

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "faultear/model.hpp"
#include "faultear/nn/grad_check.hpp"
#include "faultear/nn/layers.hpp"
#include "faultear/rng.hpp"

using namespace faultear;
using nn::GradCheckBlock;
using nn::Mode;
using nn::Tensor;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

double weighted_sum(const Tensor& t, const Tensor& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i) acc += t.data[i] * w.data[i];
  return acc;
}

// Runs one backward pass with a fixed random upstream and snapshots
// analytic gradients for the input plus all layer parameters.
template <typename Forward, typename Backward>
std::vector<GradCheckBlock> analytic_blocks(Tensor& x, std::vector<nn::ParamRef> params,
                                            Forward&& forward, Backward&& backward,
                                            const Tensor& loss_weights) {
  (void)forward();
  for (auto& p : params) p.grad->fill(0.0);
  Tensor dx = backward(loss_weights);

  std::vector<GradCheckBlock> blocks;
  blocks.push_back({std::span<double>(x.data), dx.data});
  for (auto& p : params) {
    blocks.push_back({std::span<double>(p.value->data), p.grad->data});
  }
  return blocks;
}

}  // namespace

TEST_CASE("fully connected gradients are exact up to rounding") {
  Rng rng(101);
  nn::FullyConnected fc(7, 4);
  for (double& v : fc.weights.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : fc.bias.data) v = rng.uniform(-1.0, 1.0);
  Tensor x = random_tensor({3, 7}, rng);
  const Tensor w = random_tensor({3, 4}, rng);

  auto blocks = analytic_blocks(
      x, fc.params(), [&] { return fc.forward(x); },
      [&](const Tensor& dy) { return fc.backward(dy); }, w);
  const double err = nn::grad_check_max_rel_error(
      [&] { return weighted_sum(fc.forward(x), w); }, blocks);
  CHECK(err < 1e-9);
}

TEST_CASE("conv gradients pass, alone and composed with relu") {
  Rng rng(102);
  nn::Conv1xK conv(8, 2, 3);
  for (double& v : conv.weights.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : conv.bias.data) v = rng.uniform(-1.0, 1.0);
  Tensor x = random_tensor({2, 2, 6, 2}, rng);
  const Tensor w = random_tensor({2, 2, 6, 3}, rng);

  auto blocks = analytic_blocks(
      x, conv.params(), [&] { return conv.forward(x); },
      [&](const Tensor& dy) { return conv.backward(dy); }, w);
  const double err = nn::grad_check_max_rel_error(
      [&] { return weighted_sum(conv.forward(x), w); }, blocks);
  CHECK(err < 1e-6);  // linear map; rounding only

  // conv -> relu composite, evaluated away from kinks: biases pushed to
  // +-0.5 keep pre-activations off zero.
  nn::Conv1xK conv2(4, 1, 2);
  nn::Relu relu;
  for (double& v : conv2.weights.data) v = rng.uniform(-1.0, 1.0);
  conv2.bias.data = {0.5, -0.5};
  Tensor x2 = random_tensor({1, 2, 5, 1}, rng);
  const Tensor w2 = random_tensor({1, 2, 5, 2}, rng);
  auto fwd = [&] { return relu.forward(conv2.forward(x2)); };
  auto blocks2 = analytic_blocks(
      x2, conv2.params(), fwd,
      [&](const Tensor& dy) { return conv2.backward(relu.backward(dy)); }, w2);
  const double err2 = nn::grad_check_max_rel_error(
      [&] { return weighted_sum(fwd(), w2); }, blocks2);
  CHECK(err2 < 1e-6);
}

TEST_CASE("batchnorm Train-mode gradients pass") {
  Rng rng(103);
  nn::BatchNorm bn(3);
  for (double& v : bn.scale.data) v = rng.uniform(0.5, 1.5);
  for (double& v : bn.offset.data) v = rng.uniform(-0.5, 0.5);
  Tensor x = random_tensor({3, 2, 4, 3}, rng, -2.0, 2.0);
  const Tensor w = random_tensor({3, 2, 4, 3}, rng);

  auto blocks = analytic_blocks(
      x, bn.params(), [&] { return bn.forward(x, Mode::Train); },
      [&](const Tensor& dy) { return bn.backward(dy); }, w);
  const double err = nn::grad_check_max_rel_error(
      [&] { return weighted_sum(bn.forward(x, Mode::Train), w); }, blocks);
  CHECK(err < 1e-6);
}

TEST_CASE("relu and maxpool gradients pass away from kinks") {
  Rng rng(104);
  nn::Relu relu;
  // Keep values away from 0 so the finite difference never crosses the kink.
  Tensor x = random_tensor({1, 2, 6, 2}, rng);
  for (double& v : x.data) v += (v >= 0.0 ? 0.2 : -0.2);
  const Tensor w = random_tensor({1, 2, 6, 2}, rng);

  auto blocks = analytic_blocks(
      x, {}, [&] { return relu.forward(x); },
      [&](const Tensor& dy) { return relu.backward(dy); }, w);
  const double err = nn::grad_check_max_rel_error(
      [&] { return weighted_sum(relu.forward(x), w); }, blocks);
  CHECK(err < 1e-4);

  nn::MaxPool1x2 pool;
  // Distinct values in every pooling pair keep the argmax stable under
  // perturbation.
  Tensor xp({1, 2, 6, 2});
  for (std::size_t i = 0; i < xp.numel(); ++i) {
    xp.data[i] = static_cast<double>(i % 7) + 0.3 * static_cast<double>(i % 3);
  }
  const Tensor wp = random_tensor({1, 2, 3, 2}, rng);
  auto blocks2 = analytic_blocks(
      xp, {}, [&] { return pool.forward(xp); },
      [&](const Tensor& dy) { return pool.backward(dy); }, wp);
  const double err2 = nn::grad_check_max_rel_error(
      [&] { return weighted_sum(pool.forward(xp), wp); }, blocks2);
  CHECK(err2 < 1e-4);
}

TEST_CASE("lstm gradients pass through multiple time steps") {
  Rng rng(105);
  nn::Lstm lstm(3, 4);
  for (double& v : lstm.input_weights.data) v = rng.uniform(-0.7, 0.7);
  for (double& v : lstm.recurrent_weights.data) v = rng.uniform(-0.7, 0.7);
  for (double& v : lstm.bias.data) v = rng.uniform(-0.3, 0.3);
  Tensor x = random_tensor({2, 3, 3}, rng);
  const Tensor w = random_tensor({2, 4}, rng);

  auto blocks = analytic_blocks(
      x, lstm.params(), [&] { return lstm.forward(x); },
      [&](const Tensor& dy) { return lstm.backward(dy); }, w);
  const double err = nn::grad_check_max_rel_error(
      [&] { return weighted_sum(lstm.forward(x), w); }, blocks);
  CHECK(err < 1e-6);
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  Rng rng(106);
  std::vector<double> logits(5);
  for (double& v : logits) v = rng.uniform(-2.0, 2.0);
  const int target = 3;

  const auto sx = nn::softmax_crossentropy(logits, target);
  std::vector<GradCheckBlock> blocks;
  blocks.push_back({std::span<double>(logits), sx.dlogits});
  const double err = nn::grad_check_max_rel_error(
      [&] { return nn::softmax_crossentropy(logits, target).loss; }, blocks, 1e-6);
  CHECK(err < 1e-6);
}

TEST_CASE("dropout backward respects the frozen mask") {
  Rng rng(107);
  nn::Dropout drop(0.5);
  Tensor x = random_tensor({2, 10}, rng);
  const Tensor w = random_tensor({2, 10}, rng);
  // Fix the mask by reseeding identically on every evaluation.
  auto fwd = [&] {
    Rng mask_rng(4242);
    return drop.forward(x, Mode::Train, &mask_rng);
  };
  auto blocks = analytic_blocks(
      x, {}, fwd, [&](const Tensor& dy) { return drop.backward(dy); }, w);
  const double err = nn::grad_check_max_rel_error(
      [&] { return weighted_sum(fwd(), w); }, blocks);
  CHECK(err < 1e-9);  // linear given the mask
}

TEST_CASE("the full reduced model passes an end-to-end gradient check") {
  // frame_len 48 with a small hidden size keeps this test quick; the
  // acceptance suite runs the same check with the default hidden width.
  //
  // Two numerical constraints shape the setup. The conv biases are exactly
  // canceled by the following batch norm, so their true gradient is zero
  // and the finite difference measures pure loss rounding: eps 1e-4 and a
  // loss scale of 0.25 keep one ulp of that rounding under the 1e-4
  // relative threshold. The seeds are fixed at a point whose relu inputs
  // and pooling pairs all clear the perturbation radius (no kink
  // crossings).
  const std::uint64_t init_seed = 11;
  const std::uint64_t input_seed = 10;
  const double eps = 1e-4;
  const double loss_scale = 0.25;

  ModelConfig cfg;
  cfg.frame_len = 48;
  cfg.lstm_hidden = 6;
  Model model(cfg, init_seed);
  Rng rng(input_seed);

  Tensor x = random_tensor({2, 1, 2, 48}, rng);
  const std::vector<int> targets = {1, 3};

  auto eval = [&] {
    Rng mask_rng(777);  // frozen dropout mask
    Tensor logits = model.forward(x, Mode::Train, &mask_rng);
    double loss = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
      loss += nn::softmax_crossentropy(
                  std::span<const double>(logits.data.data() + r * cfg.classes,
                                          cfg.classes),
                  targets[r])
                  .loss;
    }
    return loss_scale * loss / 2.0;
  };

  // Analytic pass.
  model.zero_grad();
  Rng mask_rng(777);
  Tensor logits = model.forward(x, Mode::Train, &mask_rng);
  Tensor dlogits(logits.shape);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto sx = nn::softmax_crossentropy(
        std::span<const double>(logits.data.data() + r * cfg.classes, cfg.classes),
        targets[r]);
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      dlogits.data[r * cfg.classes + c] = loss_scale * sx.dlogits[c] / 2.0;
    }
  }
  Tensor dx = model.backward(dlogits);

  std::vector<GradCheckBlock> blocks;
  blocks.push_back({std::span<double>(x.data), dx.data});
  for (auto& p : model.params()) {
    blocks.push_back({std::span<double>(p.value->data), p.grad->data});
  }
  const double err = nn::grad_check_max_rel_error(eval, blocks, eps);
  CHECK(err < 1e-4);
}
