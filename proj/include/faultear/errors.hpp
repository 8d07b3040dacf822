// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace faultear {

// Every recoverable failure in the library throws Error with one of these
// codes. The CLI maps them onto process exit codes.
enum class Errc {
  // audio_io
  NotWav,
  UnsupportedFormat,
  TruncatedFile,
  IoFailure,
  // dsp_features
  EmptyInput,
  EmptySet,
  BadRange,
  // synth
  BadPosition,
  NonPositiveRpm,
  // nn_core
  ShapeMismatch,
  TinyBatch,
  OddWidth,
  BadRate,
  BadTarget,
  // model
  BadConfig,
  BadMagic,
  VersionMismatch,
  // train_eval
  EmptySplit,
  BatchTooLarge,
  NoNegatives,
  NumericDivergence,
  // cli
  BadFlag,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace faultear
