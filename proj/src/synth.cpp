// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#include "faultear/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string_view>

#include "faultear/errors.hpp"
#include "faultear/rng.hpp"

namespace faultear {
namespace {

constexpr double kPeakTarget = 0.9;
constexpr double kPeriodJitter = 0.01;
// Rings are truncated once the envelope falls below this fraction of the
// impulse amplitude.
constexpr double kRingCutoff = 1e-4;

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

void validate(const SynthConfig& cfg) {
  if (cfg.rpm <= 0.0) throw Error(Errc::NonPositiveRpm, "rpm must be positive");
  if (cfg.clip_seconds <= 0.0) throw Error(Errc::BadConfig, "clip_seconds must be positive");
  if (cfg.sample_rate_hz <= 0) throw Error(Errc::BadConfig, "sample rate must be positive");
  if (cfg.positions <= 0) throw Error(Errc::BadConfig, "positions must be positive");
  if (cfg.noise_rms < 0.0) throw Error(Errc::BadConfig, "noise_rms must be nonnegative");
}

}  // namespace

double SynthConfig::distance_m(int position_index) const {
  if (position_index < 0 || position_index >= positions) {
    throw Error(Errc::BadPosition, "position index " + std::to_string(position_index) +
                                       " out of range for " + std::to_string(positions));
  }
  if (positions == 1) return min_distance_m;
  const double step = (max_distance_m - min_distance_m) / (positions - 1);
  return min_distance_m + step * position_index;
}

std::map<FaultLabel, double> default_class_rates(double rpm) {
  if (rpm <= 0.0) throw Error(Errc::NonPositiveRpm, "rpm must be positive");
  const double shaft_hz = rpm / 60.0;
  return {
      {FaultLabel::Normal, 0.0},
      {FaultLabel::DriveInnerSpall, 5.4 * shaft_hz},
      {FaultLabel::NonDriveInnerSpall, 4.9 * shaft_hz},
      {FaultLabel::DriveOuterSpall, 3.6 * shaft_hz},
      {FaultLabel::NonDriveOuterSpall, 3.1 * shaft_hz},
  };
}

AudioClip gen_clip(FaultLabel label, int position_index, const SynthConfig& cfg) {
  validate(cfg);
  const double distance = cfg.distance_m(position_index);  // checks the index

  const auto rates = cfg.impulse_rate_hz.empty() ? default_class_rates(cfg.rpm)
                                                 : cfg.impulse_rate_hz;
  const double rate = rates.count(label) ? rates.at(label) : 0.0;

  const std::size_t n =
      static_cast<std::size_t>(std::llround(cfg.clip_seconds * cfg.sample_rate_hz));
  const double sr = static_cast<double>(cfg.sample_rate_hz);

  Rng rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(label_code(label)),
                   static_cast<std::uint64_t>(position_index)));

  std::vector<double> signal(n);
  for (std::size_t i = 0; i < n; ++i) signal[i] = rng.gaussian() * cfg.noise_rms;

  if (rate > 0.0) {
    const double period_s = 1.0 / rate;
    const double amplitude = 1.0 / distance;
    const std::size_t ring_len = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::ceil(
               std::log(1.0 / kRingCutoff) / cfg.resonance_decay * sr)) + 1);
    const double omega = 2.0 * std::numbers::pi * cfg.resonance_hz / sr;
    const double decay_per_sample = std::exp(-cfg.resonance_decay / sr);

    double t = rng.uniform01() * period_s;  // random train phase
    while (t < cfg.clip_seconds) {
      const std::size_t start = static_cast<std::size_t>(std::llround(t * sr));
      if (start >= n) break;
      // Each strike excites the resonance at a random phase; otherwise the
      // rate and the resonance lock into a fixed interference pattern.
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double envelope = amplitude;
      for (std::size_t k = 0; k < ring_len && start + k < n; ++k) {
        signal[start + k] += envelope * std::sin(omega * static_cast<double>(k) + phase);
        envelope *= decay_per_sample;
      }
      t += period_s * (1.0 + kPeriodJitter * rng.uniform(-1.0, 1.0));
    }
  }

  double peak = 0.0;
  for (double v : signal) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double scale = kPeakTarget / peak;
    for (double& v : signal) v *= scale;
  }

  AudioClip clip;
  clip.samples = std::move(signal);
  clip.sample_rate_hz = cfg.sample_rate_hz;
  clip.source_id = std::string(label_name(label)) + "_" + std::to_string(position_index);
  clip.label = label;
  return clip;
}

std::vector<std::size_t> SplitDataset::indices_of(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_of.size(); ++i) {
    if (split_of[i] == split) out.push_back(i);
  }
  return out;
}

std::size_t SplitDataset::count_of(Split split) const {
  return static_cast<std::size_t>(
      std::count(split_of.begin(), split_of.end(), split));
}

SplitDataset build_dataset_from_clips(const std::vector<AudioClip>& clips,
                                      std::size_t frame_len, std::uint64_t split_seed,
                                      std::size_t seq_len,
                                      const StandardizationStats* stats_override) {
  if (clips.empty()) throw Error(Errc::EmptySet, "no clips to build a dataset from");
  if (seq_len == 0) throw Error(Errc::BadConfig, "seq_len must be positive");

  // Frame every clip; frames stay grouped by clip in frame order.
  std::vector<Frame> frames;
  std::vector<Split> split_of;
  for (const AudioClip& clip : clips) {
    if (!clip.label.has_value()) {
      throw Error(Errc::BadConfig, "clip " + clip.source_id + " has no label");
    }
    std::vector<Frame> clip_frames = frame_signal(clip, frame_len, frame_len);
    const std::size_t groups = clip_frames.size() / seq_len;
    clip_frames.resize(groups * seq_len);  // drop trailing partial group

    // Per-clip 8:1:1 split over groups, stable in (source_id, split_seed).
    const std::size_t n_train = static_cast<std::size_t>(
        std::lround(0.8 * static_cast<double>(groups)));
    const std::size_t n_val = static_cast<std::size_t>(
        std::lround(0.1 * static_cast<double>(groups)));
    std::vector<std::size_t> order(groups);
    for (std::size_t g = 0; g < groups; ++g) order[g] = g;
    Rng rng(mix_seed(split_seed, fnv1a64(clip.source_id)));
    shuffle(order, rng);
    std::vector<Split> group_split(groups, Split::Test);
    for (std::size_t r = 0; r < groups; ++r) {
      const Split split = r < n_train            ? Split::Train
                          : r < n_train + n_val  ? Split::Val
                                                 : Split::Test;
      group_split[order[r]] = split;
    }

    for (std::size_t f = 0; f < clip_frames.size(); ++f) {
      split_of.push_back(group_split[f / seq_len]);
      frames.push_back(std::move(clip_frames[f]));
    }
  }
  if (frames.empty()) throw Error(Errc::EmptySet, "clips yielded no frames");

  // One spectrum per frame, shared between the statistics and the features.
  std::vector<std::vector<double>> spectra(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    spectra[i] = magnitude_spectrum(frames[i]);
  }
  std::vector<std::size_t> train_indices;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (split_of[i] == Split::Train) train_indices.push_back(i);
  }
  if (train_indices.empty()) throw Error(Errc::EmptySet, "training split is empty");

  SplitDataset data;
  data.stats = stats_override != nullptr
                   ? *stats_override
                   : compute_standardization(frames, spectra, train_indices);
  data.split_of = std::move(split_of);
  data.seq_len = seq_len;
  data.features.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    data.features.push_back(build_feature(frames[i], spectra[i], data.stats));
  }
  return data;
}

SplitDataset build_dataset(const SynthConfig& cfg, std::size_t frame_len,
                           std::uint64_t split_seed, std::size_t seq_len) {
  validate(cfg);
  std::vector<AudioClip> clips;
  clips.reserve(static_cast<std::size_t>(kNumClasses) * cfg.positions);
  for (FaultLabel label : kAllLabels) {
    for (int pos = 0; pos < cfg.positions; ++pos) {
      clips.push_back(gen_clip(label, pos, cfg));
    }
  }
  return build_dataset_from_clips(clips, frame_len, split_seed, seq_len);
}

std::vector<DatasetEntry> write_dataset_wavs(const SynthConfig& cfg,
                                             const std::string& dir) {
  validate(cfg);
  std::filesystem::create_directories(dir);
  std::vector<DatasetEntry> entries;
  std::string manifest = "filename,label_code,position_index,distance_m\n";
  for (FaultLabel label : kAllLabels) {
    for (int pos = 0; pos < cfg.positions; ++pos) {
      const AudioClip clip = gen_clip(label, pos, cfg);
      const std::string filename = clip.source_id + ".wav";
      write_wav(clip, (std::filesystem::path(dir) / filename).string());
      DatasetEntry entry{filename, label_code(label), pos, cfg.distance_m(pos)};
      entries.push_back(entry);
      char dist[32];
      std::snprintf(dist, sizeof dist, "%.17g", entry.distance_m);
      manifest += filename + "," + std::to_string(entry.label_code) + "," +
                  std::to_string(pos) + "," + dist + "\n";
    }
  }
  std::ofstream out(std::filesystem::path(dir) / "manifest.csv",
                    std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write manifest.csv in " + dir);
  out << manifest;
  return entries;
}

std::vector<AudioClip> load_labeled_clips(const std::string& dir) {
  const std::string manifest_path =
      (std::filesystem::path(dir) / "manifest.csv").string();
  std::ifstream in(manifest_path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + manifest_path);
  std::vector<AudioClip> clips;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // filename,label_code,position_index,distance_m
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        cells.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cells.size() < 2) {
      throw Error(Errc::UnsupportedFormat, manifest_path + ": malformed row: " + line);
    }
    AudioClip clip = read_wav((std::filesystem::path(dir) / cells[0]).string());
    clip.label = label_from_code(std::stoi(cells[1]));
    clips.push_back(std::move(clip));
  }
  if (clips.empty()) throw Error(Errc::EmptySet, manifest_path + " lists no clips");
  return clips;
}

}  // namespace faultear
