// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// The 17-layer convolutional LSTM: Input -> Fold -> Conv1 -> BatchNorm1 ->
// ReLU1 -> MaxPool1 -> Conv2 -> BatchNorm2 -> ReLU2 -> MaxPool2 -> Unfold ->
// Flatten -> Lstm -> Dropout -> FC -> Softmax -> Output. The convolutional
// stack runs independently on each of the T frames of a sample (fold /
// unfold); the LSTM consumes the T flattened vectors and emits its last
// hidden state.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faultear/dsp_features.hpp"
#include "faultear/nn/layers.hpp"
#include "faultear/nn/tensor.hpp"

namespace faultear {

struct ModelConfig {
  std::size_t frame_len = 4800;  // must be divisible by 4 (two halving pools)
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 24;
  std::size_t kernel_width = 8;
  std::size_t lstm_hidden = 100;
  std::size_t classes = 5;
  std::size_t seq_len = 1;

  void validate() const;

  // Width after the two pools times height times conv2 channels.
  std::size_t lstm_input_dim() const {
    return 2 * (frame_len / 4) * conv2_channels;
  }

  bool operator==(const ModelConfig&) const = default;
};

struct ParamSummaryEntry {
  std::string layer;
  std::string name;
  std::vector<std::size_t> shape;  // as Table-style display shapes
  std::size_t count = 0;
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed);

  // batch: [B, T, 2, N]. Returns logits [B, classes]. Train mode needs a
  // dropout rng and caches everything backward() consumes.
  nn::Tensor forward(const nn::Tensor& batch, nn::Mode mode, Rng* dropout_rng = nullptr);

  // Upstream gradient on the logits; propagates to every parameter
  // gradient. Returns the input gradient.
  nn::Tensor backward(const nn::Tensor& dlogits);

  // Infer-mode class probabilities, row per sample.
  nn::Tensor probabilities(const nn::Tensor& batch);

  std::vector<nn::ParamRef> params();
  void zero_grad();

  std::vector<ParamSummaryEntry> param_summary() const;
  std::size_t learnable_count() const;
  static std::string format_param_summary(const std::vector<ParamSummaryEntry>& entries);

  // Per-sample activation shape of each of the 17 layers, recorded during
  // the most recent forward pass (batch axes stripped).
  const std::vector<std::pair<std::string, std::vector<std::size_t>>>& activation_trace()
      const {
    return trace_;
  }

  static constexpr std::array<std::string_view, 17> kLayerNames = {
      "Input",     "Fold",       "Conv1",   "BatchNorm1", "ReLU1",  "MaxPool1",
      "Conv2",     "BatchNorm2", "ReLU2",   "MaxPool2",   "Unfold", "Flatten",
      "Lstm",      "Dropout",    "FC",      "Softmax",    "Output"};

  const ModelConfig& config() const { return cfg_; }

  nn::Conv1xK conv1;
  nn::BatchNorm bn1;
  nn::Relu relu1;
  nn::MaxPool1x2 pool1;
  nn::Conv1xK conv2;
  nn::BatchNorm bn2;
  nn::Relu relu2;
  nn::MaxPool1x2 pool2;
  nn::Lstm lstm;
  nn::Dropout dropout;
  nn::FullyConnected fc;

 private:
  ModelConfig cfg_;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> trace_;
  std::size_t last_batch_ = 0;
};

// --- Checkpointing ----------------------------------------------------------

struct TrainMeta {
  std::uint32_t epoch = 0;
  double val_accuracy = 0.0;
  std::uint64_t rng_seed = 0;
};

struct Checkpoint {
  ModelConfig config;
  StandardizationStats stats;
  TrainMeta meta;
  Model model;
};

// Binary format: magic "CLSTMCK1", u32 version, config block, feature
// standardization stats, training metadata, then named tensor records
// (u32 name length, name bytes, u32 rank, u64 dims, f64 little-endian
// payload). save -> load -> save is byte-identical.
void save_checkpoint(const Model& model, const StandardizationStats& stats,
                     const TrainMeta& meta, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// The same tensor-record encoding with magic "CLSTMTN1", used for feature
// dumps.
void write_tensor_file(const std::string& path,
                       const std::vector<std::pair<std::string, nn::Tensor>>& tensors);
std::vector<std::pair<std::string, nn::Tensor>> read_tensor_file(const std::string& path);

}  // namespace faultear
