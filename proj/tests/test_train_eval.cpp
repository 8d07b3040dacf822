// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#include "faultear/train_eval.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "faultear/errors.hpp"
#include "test_util.hpp"

using namespace faultear;
using nn::Mode;
using nn::Tensor;

namespace {

// Tiny synthetic dataset with per-class structure: the time row of class k
// is biased by 0.5*k plus noise, which a small model separates quickly.
SplitDataset toy_dataset(std::size_t per_class, std::size_t width, std::uint64_t seed) {
  SplitDataset data;
  Rng rng(seed);
  for (int code = 0; code < kNumClasses; ++code) {
    for (std::size_t i = 0; i < per_class; ++i) {
      TimeFreqFeature f;
      f.width = width;
      f.matrix.resize(2 * width);
      for (std::size_t j = 0; j < width; ++j) {
        f.matrix[j] = 1.0 * code + 0.2 * rng.uniform(-1.0, 1.0);
        f.matrix[width + j] = -0.7 * code + 0.2 * rng.uniform(-1.0, 1.0);
      }
      f.label = label_from_code(code);
      f.source_id = "toy" + std::to_string(code);
      f.frame_index = i;
      data.features.push_back(std::move(f));
      // Every 10th sample goes to val, the next to test, rest to train.
      const std::size_t slot = i % 10;
      data.split_of.push_back(slot == 8   ? Split::Val
                              : slot == 9 ? Split::Test
                                          : Split::Train);
    }
  }
  return data;
}

ModelConfig toy_config(std::size_t width) {
  ModelConfig cfg;
  cfg.frame_len = width;
  cfg.lstm_hidden = 8;
  return cfg;
}

}  // namespace

TEST_CASE("batch partition: full batches plus a >=2 remainder, singles folded") {
  CHECK(batch_partition(8000, 128) ==
        std::vector<std::size_t>{128,  256,  384,  512,  640,  768,  896,  1024, 1152,
                                 1280, 1408, 1536, 1664, 1792, 1920, 2048, 2176, 2304,
                                 2432, 2560, 2688, 2816, 2944, 3072, 3200, 3328, 3456,
                                 3584, 3712, 3840, 3968, 4096, 4224, 4352, 4480, 4608,
                                 4736, 4864, 4992, 5120, 5248, 5376, 5504, 5632, 5760,
                                 5888, 6016, 6144, 6272, 6400, 6528, 6656, 6784, 6912,
                                 7040, 7168, 7296, 7424, 7552, 7680, 7808, 7936, 8000});
  // 8000 = 62 * 128 + 64: sixty-two full batches and one ragged batch.
  CHECK(batch_partition(8000, 128).size() == 63);
  CHECK(batch_partition(10, 4) == std::vector<std::size_t>{4, 8, 10});
  CHECK(batch_partition(9, 4) == std::vector<std::size_t>{4, 9});  // single folded
  CHECK(batch_partition(4, 4) == std::vector<std::size_t>{4});
  CHECK(batch_partition(128, 128) == std::vector<std::size_t>{128});
}

TEST_CASE("confusion matrix bookkeeping") {
  ConfusionMatrix cm;
  cm.add(0, 0);
  cm.add(0, 0);
  cm.add(1, 3);
  cm.add(4, 4);
  CHECK(cm.total() == 4);
  CHECK(cm.diagonal() == 3);
  CHECK(cm.accuracy() == doctest::Approx(0.75));
  CHECK(cm.row_sum(0) == 2);
  CHECK(cm.col_sum(3) == 1);
  CHECK_THROWS_AS(cm.add(5, 0), Error);

  // Randomized: accuracy == trace/total and row sums match true counts.
  Rng rng(55);
  ConfusionMatrix random_cm;
  std::vector<std::uint64_t> true_counts(5, 0);
  for (int i = 0; i < 500; ++i) {
    const int t = static_cast<int>(rng.below(5));
    const int p = static_cast<int>(rng.below(5));
    random_cm.add(t, p);
    true_counts[static_cast<std::size_t>(t)]++;
  }
  for (std::size_t r = 0; r < 5; ++r) CHECK(random_cm.row_sum(r) == true_counts[r]);
  CHECK(random_cm.accuracy() ==
        doctest::Approx(static_cast<double>(random_cm.diagonal()) / 500.0));
}

TEST_CASE("fpr_normal is the missed-fault rate") {
  ConfusionMatrix diag;
  for (int c = 0; c < 5; ++c) {
    diag.add(c, c);
  }
  CHECK(fpr_normal(diag) == 0.0);
  CHECK(normal_misclass_rate(diag) == 0.0);

  // 2 of 800 faulty samples predicted Normal -> 0.0025.
  ConfusionMatrix cm;
  for (int c = 1; c < 5; ++c) {
    for (int i = 0; i < (c == 1 ? 198 : 200); ++i) cm.add(c, c);
  }
  cm.add(1, 0);
  cm.add(1, 0);
  CHECK(fpr_normal(cm) == doctest::Approx(0.0025));

  // All faulty predicted Normal -> 1.0.
  ConfusionMatrix worst;
  for (int c = 1; c < 5; ++c) worst.add(c, 0);
  CHECK(fpr_normal(worst) == 1.0);

  // Only Normal rows -> NoNegatives.
  ConfusionMatrix none;
  none.add(0, 0);
  CHECK_THROWS_AS((void)fpr_normal(none), Error);
  ConfusionMatrix no_normals;
  no_normals.add(2, 2);
  CHECK_THROWS_AS((void)normal_misclass_rate(no_normals), Error);
}

TEST_CASE("evaluate tallies a rigged constant predictor") {
  const std::size_t width = 4;
  SplitDataset data = toy_dataset(10, width, 60);
  ModelConfig cfg = toy_config(width);
  Model model(cfg, 61);
  // Zero weights everywhere; fc bias favors class 2.
  for (auto& p : model.params()) p.value->fill(0.0);
  model.fc.bias.data = {0.0, 0.0, 1.0, 0.0, 0.0};

  const EvalResult result = evaluate(model, data, Split::Test);
  CHECK(result.confusion.total() == 5);  // one test sample per class
  CHECK(result.accuracy == doctest::Approx(0.2));
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(result.confusion.at(r, 2) == 1);  // everything lands in column 2
  }

  // A hand-built 10-sample split with known predictions: rig bias to class
  // 0 and tally by hand.
  model.fc.bias.data = {1.0, 0.0, 0.0, 0.0, 0.0};
  const EvalResult r2 = evaluate(model, data, Split::Val);
  CHECK(r2.confusion.total() == 5);
  CHECK(r2.confusion.col_sum(0) == 5);
  CHECK(r2.accuracy == doctest::Approx(0.2));

  // Evaluation mutates neither parameters nor running statistics.
  const auto before_mean = model.bn1.running_mean.data;
  const auto before_w = model.conv1.weights.data;
  (void)evaluate(model, data, Split::Test);
  CHECK(model.bn1.running_mean.data == before_mean);
  CHECK(model.conv1.weights.data == before_w);

  SplitDataset empty = data;
  empty.split_of.assign(empty.split_of.size(), Split::Train);
  CHECK_THROWS_AS((void)evaluate(model, empty, Split::Test), Error);
}

TEST_CASE("training improves the loss and starts near ln 5") {
  const std::size_t width = 4;
  SplitDataset data = toy_dataset(40, width, 62);
  ModelConfig cfg = toy_config(width);
  Model model(cfg, 63);

  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 16;
  tc.shuffle_seed = 64;
  const TrainResult result = train(model, data, tc);

  REQUIRE(!result.history.iterations.empty());
  const double first_loss = result.history.iterations.front().train_loss;
  CHECK(std::abs(first_loss - std::log(5.0)) < 0.3);
  CHECK(result.history.iterations.back().train_loss < first_loss);
  CHECK(result.history.epochs.size() == 5);
  // Iterations per epoch: 160 train samples / 16 per batch.
  CHECK(result.history.iterations.size() == 5 * 10);

  // The toy problem is separable; expect validation to catch on.
  CHECK(result.history.epochs.back().val_accuracy > 0.5);
}

TEST_CASE("a zero learning rate leaves parameters bit-identical") {
  const std::size_t width = 4;
  SplitDataset data = toy_dataset(10, width, 65);
  ModelConfig cfg = toy_config(width);
  Model model(cfg, 66);
  const auto before = model.lstm.input_weights.data;
  const auto before_fc = model.fc.weights.data;

  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.learning_rate = 0.0;
  const TrainResult result = train(model, data, tc);
  CHECK(model.lstm.input_weights.data == before);
  CHECK(model.fc.weights.data == before_fc);

  // The loss curve stays flat: parameters never move, so per-epoch losses
  // differ only through batch-norm running-state drift and batch
  // composition, both tiny effects here.
  CHECK(std::abs(result.history.epochs[0].val_loss -
                 result.history.epochs[1].val_loss) < 0.05);
  const double first = result.history.iterations.front().train_loss;
  for (const auto& it : result.history.iterations) {
    CHECK(std::abs(it.train_loss - first) < 0.2);
  }
}

TEST_CASE("identical seeds give byte-identical histories and checkpoints") {
  const std::size_t width = 4;
  TempDir dir("determinism");
  std::vector<std::string> history_paths, ckpt_paths;
  for (int run = 0; run < 2; ++run) {
    SplitDataset data = toy_dataset(20, width, 70);
    ModelConfig cfg = toy_config(width);
    Model model(cfg, 71);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    tc.shuffle_seed = 72;
    const TrainResult result = train(model, data, tc);

    const std::string hist = dir.file("hist" + std::to_string(run) + ".csv");
    export_history(result.history, hist);
    history_paths.push_back(hist);
    const std::string ckpt = dir.file("final" + std::to_string(run) + ".ckpt");
    save_checkpoint(model, data.stats, result.final_meta, ckpt);
    ckpt_paths.push_back(ckpt);
  }
  CHECK(read_file_bytes(history_paths[0]) == read_file_bytes(history_paths[1]));
  CHECK(read_file_bytes(ckpt_paths[0]) == read_file_bytes(ckpt_paths[1]));
}

TEST_CASE("train validates its inputs") {
  const std::size_t width = 4;
  SplitDataset data = toy_dataset(10, width, 75);
  ModelConfig cfg = toy_config(width);
  Model model(cfg, 76);

  TrainConfig too_big;
  too_big.batch_size = 1000;
  CHECK_THROWS_AS((void)train(model, data, too_big), Error);

  SplitDataset no_train = data;
  no_train.split_of.assign(no_train.split_of.size(), Split::Test);
  TrainConfig tc;
  tc.batch_size = 2;
  CHECK_THROWS_AS((void)train(model, no_train, tc), Error);
}

TEST_CASE("history CSV has iteration rows plus one summary row per epoch") {
  TrainHistory history;
  history.iterations = {{1, 1, 1.6}, {1, 2, 1.5}, {2, 3, 1.2}, {2, 4, 1.0}};
  history.epochs = {{1, 0.5, 1.4, 0.55}, {2, 0.8, 0.9, 0.85}};
  TempDir dir("history");
  const std::string path = dir.file("h.csv");
  export_history(history, path);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,iteration,train_loss,train_acc,val_loss,val_acc");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 6);  // 4 iteration rows + 2 epoch rows
  CHECK(rows[0].substr(0, 4) == "1,1,");
  CHECK(rows[2].substr(0, 4) == "1,,,");  // epoch summary: iteration blank
  CHECK(rows[5].substr(0, 4) == "2,,,");
}

TEST_CASE("confusion CSV round-trips through a parse") {
  ConfusionMatrix cm;
  Rng rng(80);
  for (int i = 0; i < 100; ++i) {
    cm.add(static_cast<int>(rng.below(5)), static_cast<int>(rng.below(5)));
  }
  TempDir dir("confusion");
  const std::string path = dir.file("cm.csv");
  export_confusion(cm, path);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line.substr(0, 11) == "true_class,");
  ConfusionMatrix parsed;
  int row = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // row label
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      const int count = std::stoi(cell);
      for (int i = 0; i < count; ++i) parsed.add(row, col);
      ++col;
    }
    ++row;
  }
  CHECK(row == 5);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(parsed.at(r, c) == cm.at(r, c));
    }
  }

  // All-zero matrix exports 25 zeros.
  ConfusionMatrix zero;
  export_confusion(zero, dir.file("zero.csv"));
  std::ifstream zin(dir.file("zero.csv"));
  std::getline(zin, line);
  int zero_count = 0;
  while (std::getline(zin, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) {
      CHECK(cell == "0");
      ++zero_count;
    }
  }
  CHECK(zero_count == 25);
}
