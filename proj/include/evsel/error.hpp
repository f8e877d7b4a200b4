// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evsel {

// Every failure the library reports maps to exactly one of these kinds.
enum class ErrorKind {
  kShapeMismatch,
  kInvalidArgument,
  kNonFinite,
  kTractabilityGuard,
  kIo,
  kBadMagic,
  kBadVersion,
  kChecksumMismatch,
  kTruncated,
  kMalformedRecord,
  kValidation,
  kMissingTensor,
  kDuplicateTensor,
  kConfigMismatch,
  kUnusableDataset,
};

std::string_view error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace evsel
