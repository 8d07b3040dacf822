// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#include "faultear/errors.hpp"

namespace faultear {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::NotWav: return "NotWav";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::IoFailure: return "IoFailure";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptySet: return "EmptySet";
    case Errc::BadRange: return "BadRange";
    case Errc::BadPosition: return "BadPosition";
    case Errc::NonPositiveRpm: return "NonPositiveRpm";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::TinyBatch: return "TinyBatch";
    case Errc::OddWidth: return "OddWidth";
    case Errc::BadRate: return "BadRate";
    case Errc::BadTarget: return "BadTarget";
    case Errc::BadConfig: return "BadConfig";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::BatchTooLarge: return "BatchTooLarge";
    case Errc::NoNegatives: return "NoNegatives";
    case Errc::NumericDivergence: return "NumericDivergence";
    case Errc::BadFlag: return "BadFlag";
  }
  return "UnknownError";
}

}  // namespace faultear
