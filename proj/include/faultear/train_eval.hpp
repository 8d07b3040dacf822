// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch SGD training with per-epoch validation, plus evaluation
// metrics: confusion matrix, accuracy and the Normal-class false-positive
// rate.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faultear/model.hpp"
#include "faultear/synth.hpp"

namespace faultear {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  double momentum = 0.0;
  std::uint64_t shuffle_seed = 0;
  double val_accuracy_save_threshold = 0.99;

  void validate() const;
};

struct TrainHistory {
  struct Iteration {
    std::size_t epoch = 0;      // 1-based
    std::size_t iteration = 0;  // global, 1-based
    double train_loss = 0.0;
  };
  struct Epoch {
    std::size_t epoch = 0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
  };
  std::vector<Iteration> iterations;
  std::vector<Epoch> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch reached the save threshold
};

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kNumClasses);

  void add(int true_class, int predicted_class);
  std::uint64_t at(std::size_t true_class, std::size_t predicted_class) const;
  std::size_t classes() const { return classes_; }
  std::uint64_t total() const;
  std::uint64_t diagonal() const;
  double accuracy() const { return static_cast<double>(diagonal()) / total(); }
  std::uint64_t row_sum(std::size_t true_class) const;
  std::uint64_t col_sum(std::size_t predicted_class) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;  // row-major, rows = true class
};

struct EvalResult {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

struct TrainResult {
  TrainHistory history;
  // Snapshot taken whenever validation accuracy reaches the save threshold
  // and beats the previous best; absent when no epoch qualified.
  std::optional<Model> best_model;
  TrainMeta best_meta;
  TrainMeta final_meta;
};

// End offsets of the mini-batches covering n samples: full batches of
// batch_size, then the remainder as its own batch when it has >= 2 samples
// (batch norm needs two), otherwise folded into the previous batch.
std::vector<std::size_t> batch_partition(std::size_t n, std::size_t batch_size);

// Sample helpers: a sample is a run of seq_len consecutive features. All
// frames of a sample share a clip and a split by construction.
std::size_t sample_count(const SplitDataset& data);
std::vector<std::size_t> sample_indices_of(const SplitDataset& data, Split split);
int sample_target(const SplitDataset& data, std::size_t sample);
// Copies sample `sample` into batch row `row` of a [B, T, 2, N] tensor.
void fill_batch_row(nn::Tensor& batch, std::size_t row, const SplitDataset& data,
                    std::size_t sample);

// Runs the full training loop: per epoch, shuffled full mini-batches (a
// final ragged batch is kept if it has >= 2 samples, otherwise folded into
// the previous one), SGD updates, then a validation pass in Infer mode.
// Throws NumericDivergence as soon as a batch loss is not finite.
TrainResult train(Model& model, const SplitDataset& data, const TrainConfig& cfg);

// Infer-mode metrics over one split. Never mutates parameters or running
// statistics. Argmax ties resolve to the lowest class code.
EvalResult evaluate(Model& model, const SplitDataset& data, Split split);

// Fraction of truly faulty samples that were predicted Normal (the
// missed-fault rate). Errors with NoNegatives when no faulty samples exist.
double fpr_normal(const ConfusionMatrix& cm);

// The complementary reading: fraction of truly Normal samples predicted as
// any fault.
double normal_misclass_rate(const ConfusionMatrix& cm);

// CSV columns: epoch,iteration,train_loss,train_acc,val_loss,val_acc.
// Iteration rows carry the loss; epoch summary rows leave iteration blank.
void export_history(const TrainHistory& history, const std::string& path);

// 5x5 integer grid with a header row and column of class names.
void export_confusion(const ConfusionMatrix& cm, const std::string& path);

}  // namespace faultear
