// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#include "faultear/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "faultear/errors.hpp"
#include "faultear/nn/sgd.hpp"
#include "faultear/rng.hpp"

namespace faultear {

using nn::Mode;
using nn::Tensor;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(Errc::BadConfig, "epochs must be at least 1");
  if (batch_size < 2) throw Error(Errc::BadConfig, "batch_size must be at least 2");
  // learning_rate 0 is allowed: it turns training into a no-op, which the
  // null-update tests rely on.
  if (learning_rate < 0.0) {
    throw Error(Errc::BadConfig, "learning_rate must be nonnegative");
  }
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(int true_class, int predicted_class) {
  if (true_class < 0 || predicted_class < 0 ||
      static_cast<std::size_t>(true_class) >= classes_ ||
      static_cast<std::size_t>(predicted_class) >= classes_) {
    throw Error(Errc::BadTarget, "confusion matrix index out of range");
  }
  ++counts_[static_cast<std::size_t>(true_class) * classes_ +
            static_cast<std::size_t>(predicted_class)];
}

std::uint64_t ConfusionMatrix::at(std::size_t true_class,
                                  std::size_t predicted_class) const {
  return counts_.at(true_class * classes_ + predicted_class);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (std::uint64_t c : counts_) sum += c;
  return sum;
}

std::uint64_t ConfusionMatrix::diagonal() const {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < classes_; ++i) sum += counts_[i * classes_ + i];
  return sum;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t true_class) const {
  std::uint64_t sum = 0;
  for (std::size_t c = 0; c < classes_; ++c) sum += at(true_class, c);
  return sum;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted_class) const {
  std::uint64_t sum = 0;
  for (std::size_t r = 0; r < classes_; ++r) sum += at(r, predicted_class);
  return sum;
}

std::vector<std::size_t> batch_partition(std::size_t n, std::size_t batch_size) {
  std::vector<std::size_t> ends;
  std::size_t pos = batch_size;
  while (pos < n) {
    ends.push_back(pos);
    pos += batch_size;
  }
  ends.push_back(n);
  if (ends.size() >= 2 && ends.back() - ends[ends.size() - 2] < 2) {
    ends.erase(ends.end() - 2);
  }
  return ends;
}

std::size_t sample_count(const SplitDataset& data) {
  return data.features.size() / data.seq_len;
}

std::vector<std::size_t> sample_indices_of(const SplitDataset& data, Split split) {
  std::vector<std::size_t> out;
  const std::size_t n = sample_count(data);
  for (std::size_t s = 0; s < n; ++s) {
    if (data.split_of[s * data.seq_len] == split) out.push_back(s);
  }
  return out;
}

int sample_target(const SplitDataset& data, std::size_t sample) {
  return label_code(data.features[sample * data.seq_len].label);
}

void fill_batch_row(Tensor& batch, std::size_t row, const SplitDataset& data,
                    std::size_t sample) {
  const std::size_t t = data.seq_len;
  const std::size_t width = batch.shape[3];
  double* dst = batch.data.data() + row * t * 2 * width;
  for (std::size_t step = 0; step < t; ++step) {
    const TimeFreqFeature& f = data.features[sample * t + step];
    if (f.width != width) {
      throw Error(Errc::ShapeMismatch, "feature width " + std::to_string(f.width) +
                                           " != batch width " + std::to_string(width));
    }
    std::copy(f.matrix.begin(), f.matrix.end(), dst + step * 2 * width);
  }
}

namespace {

int argmax_lowest_tie(const double* values, std::size_t n) {
  int best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

TrainResult train(Model& model, const SplitDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const std::vector<std::size_t> train_samples = sample_indices_of(data, Split::Train);
  if (train_samples.empty()) throw Error(Errc::EmptySplit, "training split is empty");
  if (cfg.batch_size > train_samples.size()) {
    throw Error(Errc::BatchTooLarge,
                "batch_size " + std::to_string(cfg.batch_size) + " exceeds " +
                    std::to_string(train_samples.size()) + " training samples");
  }

  nn::SgdOptimizer optimizer(cfg.learning_rate, cfg.momentum);
  optimizer.attach(model.params());

  const std::size_t width = model.config().frame_len;
  const std::size_t seq = model.config().seq_len;
  const std::size_t classes = model.config().classes;

  TrainResult result;
  double best_val = -1.0;
  std::size_t iteration = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_samples;
    Rng shuffle_rng(mix_seed(cfg.shuffle_seed, epoch, 0x5a5a5a5aULL));
    shuffle(order, shuffle_rng);

    const std::vector<std::size_t> batch_ends =
        batch_partition(order.size(), cfg.batch_size);

    std::uint64_t epoch_correct = 0;
    std::size_t batch_start = 0;
    for (std::size_t batch_idx = 0; batch_idx < batch_ends.size(); ++batch_idx) {
      const std::size_t batch_n = batch_ends[batch_idx] - batch_start;
      Tensor batch({batch_n, seq, 2, width});
      std::vector<int> targets(batch_n);
      for (std::size_t r = 0; r < batch_n; ++r) {
        const std::size_t sample = order[batch_start + r];
        fill_batch_row(batch, r, data, sample);
        targets[r] = sample_target(data, sample);
      }
      batch_start = batch_ends[batch_idx];

      model.zero_grad();
      Rng dropout_rng(mix_seed(cfg.shuffle_seed, epoch, batch_idx, 0xd20ULL));
      Tensor logits = model.forward(batch, Mode::Train, &dropout_rng);

      Tensor dlogits(logits.shape);
      double loss_sum = 0.0;
      for (std::size_t r = 0; r < batch_n; ++r) {
        const auto sx = nn::softmax_crossentropy(
            std::span<const double>(logits.data.data() + r * classes, classes),
            targets[r]);
        loss_sum += sx.loss;
        for (std::size_t c = 0; c < classes; ++c) {
          dlogits.data[r * classes + c] =
              sx.dlogits[c] / static_cast<double>(batch_n);
        }
        if (argmax_lowest_tie(sx.probs.data(), classes) == targets[r]) {
          ++epoch_correct;
        }
      }
      const double mean_loss = loss_sum / static_cast<double>(batch_n);
      if (!std::isfinite(mean_loss)) {
        throw Error(Errc::NumericDivergence,
                    "training loss is not finite at epoch " + std::to_string(epoch));
      }
      model.backward(dlogits);
      optimizer.step();
      result.history.iterations.push_back({epoch, ++iteration, mean_loss});
    }

    const EvalResult val = evaluate(model, data, Split::Val);
    const double train_acc =
        static_cast<double>(epoch_correct) / static_cast<double>(order.size());
    result.history.epochs.push_back({epoch, train_acc, val.mean_loss, val.accuracy});

    if (val.accuracy >= cfg.val_accuracy_save_threshold && val.accuracy > best_val) {
      best_val = val.accuracy;
      result.best_model = model;  // snapshot
      result.best_meta = {static_cast<std::uint32_t>(epoch), val.accuracy,
                          cfg.shuffle_seed};
      result.history.best_epoch = epoch;
    }
    result.final_meta = {static_cast<std::uint32_t>(epoch), val.accuracy,
                         cfg.shuffle_seed};
  }
  return result;
}

EvalResult evaluate(Model& model, const SplitDataset& data, Split split) {
  const std::vector<std::size_t> samples = sample_indices_of(data, split);
  if (samples.empty()) {
    throw Error(Errc::EmptySplit, std::string("split ") + split_name(split) + " is empty");
  }
  const std::size_t width = model.config().frame_len;
  const std::size_t seq = model.config().seq_len;
  const std::size_t classes = model.config().classes;
  constexpr std::size_t kChunk = 256;

  EvalResult result;
  result.confusion = ConfusionMatrix(classes);
  double loss_sum = 0.0;

  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - start);
    Tensor batch({n, seq, 2, width});
    for (std::size_t r = 0; r < n; ++r) {
      fill_batch_row(batch, r, data, samples[start + r]);
    }
    Tensor logits = model.forward(batch, Mode::Infer);
    for (std::size_t r = 0; r < n; ++r) {
      const int target = sample_target(data, samples[start + r]);
      const auto sx = nn::softmax_crossentropy(
          std::span<const double>(logits.data.data() + r * classes, classes), target);
      loss_sum += sx.loss;
      result.confusion.add(target, argmax_lowest_tie(sx.probs.data(), classes));
    }
  }
  result.mean_loss = loss_sum / static_cast<double>(samples.size());
  result.accuracy = result.confusion.accuracy();
  return result;
}

double fpr_normal(const ConfusionMatrix& cm) {
  const std::size_t normal = 0;
  std::uint64_t faulty_total = 0;
  std::uint64_t faulty_as_normal = 0;
  for (std::size_t r = 0; r < cm.classes(); ++r) {
    if (r == normal) continue;
    faulty_total += cm.row_sum(r);
    faulty_as_normal += cm.at(r, normal);
  }
  if (faulty_total == 0) {
    throw Error(Errc::NoNegatives, "no truly faulty samples in the matrix");
  }
  return static_cast<double>(faulty_as_normal) / static_cast<double>(faulty_total);
}

double normal_misclass_rate(const ConfusionMatrix& cm) {
  const std::uint64_t normal_total = cm.row_sum(0);
  if (normal_total == 0) {
    throw Error(Errc::NoNegatives, "no truly Normal samples in the matrix");
  }
  return static_cast<double>(normal_total - cm.at(0, 0)) /
         static_cast<double>(normal_total);
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& payload) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot open " + tmp);
    out << payload;
    if (!out) throw Error(Errc::IoFailure, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoFailure, "rename to " + path + ": " + ec.message());
}

}  // namespace

void export_history(const TrainHistory& history, const std::string& path) {
  std::string out = "epoch,iteration,train_loss,train_acc,val_loss,val_acc\n";
  std::size_t epoch_row = 0;
  for (std::size_t i = 0; i < history.iterations.size(); ++i) {
    const auto& it = history.iterations[i];
    out += std::to_string(it.epoch) + "," + std::to_string(it.iteration) + "," +
           fmt_double(it.train_loss) + ",,,\n";
    const bool epoch_done = (i + 1 == history.iterations.size()) ||
                            (history.iterations[i + 1].epoch != it.epoch);
    if (epoch_done && epoch_row < history.epochs.size()) {
      const auto& ep = history.epochs[epoch_row++];
      out += std::to_string(ep.epoch) + ",," + "," + fmt_double(ep.train_accuracy) +
             "," + fmt_double(ep.val_loss) + "," + fmt_double(ep.val_accuracy) + "\n";
    }
  }
  write_text_atomic(path, out);
}

void export_confusion(const ConfusionMatrix& cm, const std::string& path) {
  std::string out = "true_class";
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    out += ",";
    out += label_name(label_from_code(static_cast<int>(c)));
  }
  out += "\n";
  for (std::size_t r = 0; r < cm.classes(); ++r) {
    out += label_name(label_from_code(static_cast<int>(r)));
    for (std::size_t c = 0; c < cm.classes(); ++c) {
      out += "," + std::to_string(cm.at(r, c));
    }
    out += "\n";
  }
  write_text_atomic(path, out);
}

}  // namespace faultear
