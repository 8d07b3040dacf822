// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "faultear/errors.hpp"

namespace faultear {

// The five bearing conditions the classifier distinguishes. Codes are
// stable and used in file formats, so the order must never change.
enum class FaultLabel : std::uint8_t {
  Normal = 0,
  DriveInnerSpall = 1,
  NonDriveInnerSpall = 2,
  DriveOuterSpall = 3,
  NonDriveOuterSpall = 4,
};

inline constexpr int kNumClasses = 5;

inline constexpr std::array<FaultLabel, kNumClasses> kAllLabels = {
    FaultLabel::Normal,
    FaultLabel::DriveInnerSpall,
    FaultLabel::NonDriveInnerSpall,
    FaultLabel::DriveOuterSpall,
    FaultLabel::NonDriveOuterSpall,
};

inline int label_code(FaultLabel label) { return static_cast<int>(label); }

inline FaultLabel label_from_code(int code) {
  if (code < 0 || code >= kNumClasses) {
    throw Error(Errc::BadTarget, "label code out of range: " + std::to_string(code));
  }
  return static_cast<FaultLabel>(code);
}

inline std::string_view label_name(FaultLabel label) {
  switch (label) {
    case FaultLabel::Normal: return "normal";
    case FaultLabel::DriveInnerSpall: return "drive_inner_spall";
    case FaultLabel::NonDriveInnerSpall: return "nondrive_inner_spall";
    case FaultLabel::DriveOuterSpall: return "drive_outer_spall";
    case FaultLabel::NonDriveOuterSpall: return "nondrive_outer_spall";
  }
  return "unknown";
}

}  // namespace faultear
