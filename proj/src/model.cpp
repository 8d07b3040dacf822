// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#include "faultear/model.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "faultear/errors.hpp"
#include "faultear/nn/init.hpp"

namespace faultear {

using nn::Mode;
using nn::Tensor;

void ModelConfig::validate() const {
  if (frame_len == 0 || frame_len % 4 != 0) {
    throw Error(Errc::BadConfig, "frame_len must be a positive multiple of 4");
  }
  if (conv1_channels == 0 || conv2_channels == 0 || kernel_width == 0 ||
      lstm_hidden == 0 || classes < 2 || seq_len == 0) {
    throw Error(Errc::BadConfig, "model dimensions must be positive (classes >= 2)");
  }
}

namespace {

ModelConfig validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed)
    : conv1(validated(cfg).kernel_width, 1, cfg.conv1_channels),
      bn1(cfg.conv1_channels),
      conv2(cfg.kernel_width, cfg.conv1_channels, cfg.conv2_channels),
      bn2(cfg.conv2_channels),
      lstm(cfg.lstm_input_dim(), cfg.lstm_hidden),
      dropout(0.5),
      fc(cfg.lstm_hidden, cfg.classes),
      cfg_(cfg) {
  Rng rng(init_seed);
  const std::size_t k = cfg.kernel_width;
  nn::glorot_uniform(conv1.weights.data, k * 1, k * cfg.conv1_channels, rng);
  nn::glorot_uniform(conv2.weights.data, k * cfg.conv1_channels,
                     k * cfg.conv2_channels, rng);
  // Each gate block of the input weights is an H x D map.
  nn::glorot_uniform(lstm.input_weights.data, cfg.lstm_input_dim(), cfg.lstm_hidden,
                     rng);
  const std::size_t h = cfg.lstm_hidden;
  for (std::size_t gate = 0; gate < 4; ++gate) {
    nn::orthogonal_square(
        std::span<double>(lstm.recurrent_weights.data).subspan(gate * h * h, h * h), h,
        rng);
  }
  // Forget-gate bias starts at 1 so early training does not flush the cell.
  for (std::size_t u = 0; u < h; ++u) lstm.bias.data[h + u] = 1.0;
  nn::glorot_uniform(fc.weights.data, cfg.lstm_hidden, cfg.classes, rng);
}

nn::Tensor Model::forward(const nn::Tensor& batch, Mode mode, Rng* dropout_rng) {
  const std::size_t n = cfg_.frame_len;
  const std::size_t t = cfg_.seq_len;
  if (batch.shape.size() != 4 || batch.shape[1] != t || batch.shape[2] != 2 ||
      batch.shape[3] != n) {
    throw Error(Errc::ShapeMismatch,
                "model input must be [B, " + std::to_string(t) + ", 2, " +
                    std::to_string(n) + "], got " + nn::shape_string(batch.shape));
  }
  if (mode == Mode::Train && dropout_rng == nullptr) {
    throw Error(Errc::BadConfig, "training forward needs a dropout rng");
  }
  const std::size_t b = batch.shape[0];
  last_batch_ = b;

  trace_.clear();
  auto record = [this](std::string_view layer, std::vector<std::size_t> shape) {
    trace_.emplace_back(std::string(layer), std::move(shape));
  };
  record("Input", {2, n, 1});

  // Fold: run the conv stack on each frame independently as [B*T, 2, N, 1].
  Tensor x = batch;
  x.shape = {b * t, 2, n, 1};
  record("Fold", {2, n, 1});

  x = conv1.forward(x);
  record("Conv1", {2, n, cfg_.conv1_channels});
  x = bn1.forward(x, mode);
  record("BatchNorm1", {2, n, cfg_.conv1_channels});
  x = relu1.forward(x);
  record("ReLU1", {2, n, cfg_.conv1_channels});
  x = pool1.forward(x);
  record("MaxPool1", {2, n / 2, cfg_.conv1_channels});
  x = conv2.forward(x);
  record("Conv2", {2, n / 2, cfg_.conv2_channels});
  x = bn2.forward(x, mode);
  record("BatchNorm2", {2, n / 2, cfg_.conv2_channels});
  x = relu2.forward(x);
  record("ReLU2", {2, n / 2, cfg_.conv2_channels});
  x = pool2.forward(x);
  record("MaxPool2", {2, n / 4, cfg_.conv2_channels});
  record("Unfold", {2, n / 4, cfg_.conv2_channels});

  // Flatten each frame in (h, w, c) order, which is the buffer's row-major
  // layout, and restore the sequence axis for the LSTM.
  x.shape = {b, t, cfg_.lstm_input_dim()};
  record("Flatten", {cfg_.lstm_input_dim()});

  x = lstm.forward(x);
  record("Lstm", {cfg_.lstm_hidden});
  x = dropout.forward(x, mode, dropout_rng);
  record("Dropout", {cfg_.lstm_hidden});
  x = fc.forward(x);
  record("FC", {cfg_.classes});
  record("Softmax", {cfg_.classes});
  record("Output", {cfg_.classes});
  return x;  // logits; softmax is applied by the loss / probabilities()
}

nn::Tensor Model::backward(const nn::Tensor& dlogits) {
  Tensor g = fc.backward(dlogits);
  g = dropout.backward(g);
  g = lstm.backward(g);
  g.shape = {last_batch_ * cfg_.seq_len, 2, cfg_.frame_len / 4, cfg_.conv2_channels};
  g = pool2.backward(g);
  g = relu2.backward(g);
  g = bn2.backward(g);
  g = conv2.backward(g);
  g = pool1.backward(g);
  g = relu1.backward(g);
  g = bn1.backward(g);
  g = conv1.backward(g);
  g.shape = {last_batch_, cfg_.seq_len, 2, cfg_.frame_len};
  return g;
}

nn::Tensor Model::probabilities(const nn::Tensor& batch) {
  Tensor logits = forward(batch, Mode::Infer);
  Tensor probs(logits.shape);
  const std::size_t classes = cfg_.classes;
  for (std::size_t row = 0; row < logits.shape[0]; ++row) {
    const std::vector<double> p = nn::softmax(
        std::span<const double>(logits.data.data() + row * classes, classes));
    std::copy(p.begin(), p.end(), probs.data.data() + row * classes);
  }
  return probs;
}

std::vector<nn::ParamRef> Model::params() {
  std::vector<nn::ParamRef> out;
  for (auto& p : conv1.params()) out.push_back(p);
  for (auto& p : bn1.params()) out.push_back(p);
  for (auto& p : conv2.params()) out.push_back(p);
  for (auto& p : bn2.params()) out.push_back(p);
  for (auto& p : lstm.params()) out.push_back(p);
  for (auto& p : fc.params()) out.push_back(p);
  return out;
}

void Model::zero_grad() {
  conv1.zero_grad();
  bn1.zero_grad();
  conv2.zero_grad();
  bn2.zero_grad();
  lstm.zero_grad();
  fc.zero_grad();
}

std::vector<ParamSummaryEntry> Model::param_summary() const {
  const std::size_t c1 = cfg_.conv1_channels;
  const std::size_t c2 = cfg_.conv2_channels;
  const std::size_t k = cfg_.kernel_width;
  const std::size_t h = cfg_.lstm_hidden;
  const std::size_t d = cfg_.lstm_input_dim();
  const std::size_t cls = cfg_.classes;
  auto entry = [](std::string layer, std::string name, std::vector<std::size_t> shape) {
    ParamSummaryEntry e{std::move(layer), std::move(name), std::move(shape), 0};
    e.count = Tensor::numel_of(e.shape);
    return e;
  };
  return {
      entry("Conv1", "Weights", {1, k, 1, c1}),
      entry("Conv1", "Bias", {1, 1, c1}),
      entry("BatchNorm1", "Scale", {1, 1, c1}),
      entry("BatchNorm1", "Offset", {1, 1, c1}),
      entry("Conv2", "Weights", {1, k, c1, c2}),
      entry("Conv2", "Bias", {1, 1, c2}),
      entry("BatchNorm2", "Scale", {1, 1, c2}),
      entry("BatchNorm2", "Offset", {1, 1, c2}),
      entry("Lstm", "InputWeights", {4 * h, d}),
      entry("Lstm", "RecurrentWeights", {4 * h, h}),
      entry("Lstm", "Bias", {4 * h, 1}),
      entry("FC", "Weights", {cls, h}),
      entry("FC", "Bias", {cls, 1}),
  };
}

std::size_t Model::learnable_count() const {
  std::size_t total = 0;
  for (const auto& e : param_summary()) total += e.count;
  return total;
}

std::string Model::format_param_summary(const std::vector<ParamSummaryEntry>& entries) {
  std::ostringstream out;
  out << "Layer        Learnable          Shape           Count\n";
  for (const auto& e : entries) {
    std::string shape;
    for (std::size_t i = 0; i < e.shape.size(); ++i) {
      if (i) shape += "x";
      shape += std::to_string(e.shape[i]);
    }
    out << e.layer;
    out << std::string(e.layer.size() < 13 ? 13 - e.layer.size() : 1, ' ');
    out << e.name;
    out << std::string(e.name.size() < 19 ? 19 - e.name.size() : 1, ' ');
    out << shape;
    out << std::string(shape.size() < 16 ? 16 - shape.size() : 1, ' ');
    out << e.count << "\n";
  }
  return out.str();
}

// --- Serialization ------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[9] = "CLSTMCK1";
constexpr char kTensorMagic[9] = "CLSTMTN1";
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw Error(Errc::IoFailure, "cannot open " + path);
  }

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw Error(Errc::TruncatedFile, path_ + " ended early");
    }
  }

  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::uint64_t u64() {
    std::uint64_t v = 0;
    unsigned char b[8];
    bytes(b, 8);
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string str(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  bool at_end() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::ifstream in_;
  std::string path_;
};

void append_tensor_record(std::string& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (std::size_t d : t.shape) put_u64(out, d);
  for (double v : t.data) put_f64(out, v);
}

Tensor read_tensor_record(Reader& r, std::string& name) {
  const std::uint32_t name_len = r.u32();
  if (name_len > 4096) throw Error(Errc::TruncatedFile, "implausible tensor name length");
  name = r.str(name_len);
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw Error(Errc::TruncatedFile, "implausible tensor rank");
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
  Tensor t(shape);
  for (double& v : t.data) v = r.f64();
  return t;
}

void write_atomic(const std::string& path, const std::string& payload) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot open " + tmp);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error(Errc::IoFailure, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoFailure, "rename to " + path + ": " + ec.message());
}

// Fixed order of every persisted tensor, shared by save and load.
template <typename ModelT, typename TensorT>
std::vector<std::pair<std::string, TensorT*>> checkpoint_tensors(ModelT& m) {
  return {
      {"conv1.weights", &m.conv1.weights},
      {"conv1.bias", &m.conv1.bias},
      {"bn1.scale", &m.bn1.scale},
      {"bn1.offset", &m.bn1.offset},
      {"bn1.running_mean", &m.bn1.running_mean},
      {"bn1.running_var", &m.bn1.running_var},
      {"conv2.weights", &m.conv2.weights},
      {"conv2.bias", &m.conv2.bias},
      {"bn2.scale", &m.bn2.scale},
      {"bn2.offset", &m.bn2.offset},
      {"bn2.running_mean", &m.bn2.running_mean},
      {"bn2.running_var", &m.bn2.running_var},
      {"lstm.input_weights", &m.lstm.input_weights},
      {"lstm.recurrent_weights", &m.lstm.recurrent_weights},
      {"lstm.bias", &m.lstm.bias},
      {"fc.weights", &m.fc.weights},
      {"fc.bias", &m.fc.bias},
  };
}

}  // namespace

void save_checkpoint(const Model& model, const StandardizationStats& stats,
                     const TrainMeta& meta, const std::string& path) {
  std::string out;
  out.append(kCheckpointMagic, 8);
  put_u32(out, kFormatVersion);
  const ModelConfig& cfg = model.config();
  for (std::size_t v : {cfg.frame_len, cfg.conv1_channels, cfg.conv2_channels,
                        cfg.kernel_width, cfg.lstm_hidden, cfg.classes, cfg.seq_len}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_f64(out, stats.mean_time);
  put_f64(out, stats.std_time);
  put_f64(out, stats.mean_freq);
  put_f64(out, stats.std_freq);
  put_u32(out, meta.epoch);
  put_f64(out, meta.val_accuracy);
  put_u64(out, meta.rng_seed);

  const auto tensors = checkpoint_tensors<const Model, const Tensor>(model);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) append_tensor_record(out, name, *tensor);
  write_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw Error(Errc::BadMagic, path + " is not a checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw Error(Errc::VersionMismatch,
                path + " has format version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.frame_len = r.u32();
  cfg.conv1_channels = r.u32();
  cfg.conv2_channels = r.u32();
  cfg.kernel_width = r.u32();
  cfg.lstm_hidden = r.u32();
  cfg.classes = r.u32();
  cfg.seq_len = r.u32();
  cfg.validate();

  StandardizationStats stats;
  stats.mean_time = r.f64();
  stats.std_time = r.f64();
  stats.mean_freq = r.f64();
  stats.std_freq = r.f64();
  TrainMeta meta;
  meta.epoch = r.u32();
  meta.val_accuracy = r.f64();
  meta.rng_seed = r.u64();

  Checkpoint ckpt{cfg, stats, meta, Model(cfg, 0)};
  const auto expected = checkpoint_tensors<Model, Tensor>(ckpt.model);
  const std::uint32_t count = r.u32();
  if (count != expected.size()) {
    throw Error(Errc::ShapeMismatch, path + " holds " + std::to_string(count) +
                                         " tensors, expected " +
                                         std::to_string(expected.size()));
  }
  for (const auto& [name, tensor] : expected) {
    std::string got_name;
    Tensor got = read_tensor_record(r, got_name);
    if (got_name != name) {
      throw Error(Errc::ShapeMismatch, path + ": tensor " + got_name + ", expected " + name);
    }
    if (got.shape != tensor->shape) {
      throw Error(Errc::ShapeMismatch, path + ": " + name + " has shape " +
                                           nn::shape_string(got.shape) + ", expected " +
                                           nn::shape_string(tensor->shape));
    }
    tensor->data = std::move(got.data);
  }
  return ckpt;
}

void write_tensor_file(const std::string& path,
                       const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::string out;
  out.append(kTensorMagic, 8);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) append_tensor_record(out, name, tensor);
  write_atomic(path, out);
}

std::vector<std::pair<std::string, Tensor>> read_tensor_file(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kTensorMagic, 8) != 0) {
    throw Error(Errc::BadMagic, path + " is not a tensor file");
  }
  if (r.u32() != kFormatVersion) {
    throw Error(Errc::VersionMismatch, path + " has an unsupported version");
  }
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    Tensor t = read_tensor_record(r, name);
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace faultear
