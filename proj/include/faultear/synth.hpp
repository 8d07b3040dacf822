// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic bearing acoustics. Each fault class is a periodic impulse train
// (rate tied to shaft speed) exciting a damped resonance, on top of
// Gaussian background noise; the Normal class is noise only. Clips are
// deterministic functions of (label, position, seed).

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "faultear/audio_io.hpp"
#include "faultear/dsp_features.hpp"
#include "faultear/fault_label.hpp"

namespace faultear {

struct SynthConfig {
  double rpm = 2000.0;
  int sample_rate_hz = 48000;
  double clip_seconds = 40.0;
  int positions = 5;
  double min_distance_m = 0.5;
  double max_distance_m = 1.5;
  // Per-class impulse rates; empty means default_class_rates(rpm).
  std::map<FaultLabel, double> impulse_rate_hz;
  double resonance_hz = 4000.0;
  // Exponential decay constant in 1/s. The default gives a ~5 ms ring, so
  // consecutive rings overlap and every frame carries the inter-impulse
  // spacing, not just isolated transients.
  double resonance_decay = 200.0;
  double noise_rms = 0.05;
  std::uint64_t rng_seed = 0;

  // Microphone distance for a position index, evenly spaced over
  // [min_distance_m, max_distance_m].
  double distance_m(int position_index) const;
};

// Shaft-rate multiples per class: {0, 5.4, 4.9, 3.6, 3.1} * rpm/60. The
// multipliers are surrogate constants, distinct and ordered inner > outer.
std::map<FaultLabel, double> default_class_rates(double rpm);

// One synthetic clip, peak-normalized to 0.9. Bit-identical for identical
// (label, position_index, cfg.rng_seed).
AudioClip gen_clip(FaultLabel label, int position_index, const SynthConfig& cfg);

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

inline const char* split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

// Labeled features with a per-feature split assignment. Frames of one clip
// are stored consecutively in frame order, so seq_len-sized groups are
// contiguous runs sharing a split.
struct SplitDataset {
  std::vector<TimeFreqFeature> features;
  std::vector<Split> split_of;
  StandardizationStats stats;
  std::size_t seq_len = 1;

  std::vector<std::size_t> indices_of(Split split) const;
  std::size_t count_of(Split split) const;
};

// Frames every clip, assigns splits 8:1:1 per clip (train = round(0.8*F),
// val = round(0.1*F), test = remainder), computes standardization from the
// training split only, and builds every feature with those statistics.
// With seq_len > 1 the unit of splitting is a group of seq_len consecutive
// frames (trailing partial groups are dropped).
SplitDataset build_dataset(const SynthConfig& cfg, std::size_t frame_len,
                           std::uint64_t split_seed, std::size_t seq_len = 1);

// Same pipeline over caller-provided labeled clips (e.g. decoded WAVs).
// When stats_override is non-null those statistics are used instead of
// computing them from the training split — evaluation against a checkpoint
// must standardize with the checkpoint's stored training stats.
SplitDataset build_dataset_from_clips(const std::vector<AudioClip>& clips,
                                      std::size_t frame_len, std::uint64_t split_seed,
                                      std::size_t seq_len = 1,
                                      const StandardizationStats* stats_override = nullptr);

// One row of the dataset manifest CSV
// (filename,label_code,position_index,distance_m).
struct DatasetEntry {
  std::string filename;
  int label_code = 0;
  int position_index = 0;
  double distance_m = 0.0;
};

// Generates all 5 x positions clips into dir as <label>_<pos>.wav plus
// manifest.csv, returning the manifest rows.
std::vector<DatasetEntry> write_dataset_wavs(const SynthConfig& cfg,
                                             const std::string& dir);

// Reads manifest.csv in dir and decodes every listed WAV with its label.
std::vector<AudioClip> load_labeled_clips(const std::string& dir);

}  // namespace faultear
