// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// PCM WAV reading/writing and segmentation of clips into fixed-length
// labeled frames. Only 16-bit mono PCM is supported; anything else is an
// error rather than a silent down-mix.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "faultear/fault_label.hpp"

namespace faultear {

// A mono audio signal. Samples are the decoded PCM words divided by 32768,
// so every value lies in [-1, 1] and -32768 maps exactly to -1.0.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 48000;
  std::string source_id;
  std::optional<FaultLabel> label;

  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// One fixed-length window of a clip, the unit of classification.
struct Frame {
  std::vector<double> samples;
  std::size_t frame_index = 0;
  std::string source_id;
  FaultLabel label = FaultLabel::Normal;
};

// Reads a RIFF/WAVE file. Throws NotWav for bad magic, UnsupportedFormat
// for non-PCM / non-16-bit / multichannel data, TruncatedFile for short
// chunks.
AudioClip read_wav(const std::string& path);

// Writes clip as 16-bit mono PCM. Samples are rounded to the nearest PCM
// word and clamped, so read_wav(write_wav(clip)) matches the original
// within 1/32768 per sample.
void write_wav(const AudioClip& clip, const std::string& path);

// Splits the clip into windows starting at 0, hop, 2*hop, ... The trailing
// partial window is discarded. A clip shorter than frame_len yields an
// empty sequence. Frames inherit the clip's label (Normal when the clip is
// unlabeled) and source_id.
std::vector<Frame> frame_signal(const AudioClip& clip, std::size_t frame_len,
                                std::size_t hop);

}  // namespace faultear
