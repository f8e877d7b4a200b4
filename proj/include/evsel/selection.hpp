// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

// Temporally-adaptive keyframe selection: split the timeline into B
// contiguous bins and keep the k_bin best-scoring frames of each. B = m with
// k_bin = 1 spreads the budget evenly; B = 1 with k_bin = m is global top-m.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evsel/training.hpp"

namespace evsel {

struct SelectionConfig {
  std::size_t bins = 1;
  std::size_t per_bin = 1;

  std::size_t budget() const noexcept { return bins * per_bin; }
  void validate() const;
};

struct Selection {
  std::vector<std::size_t> indices;  // strictly increasing
  std::vector<double> scores;        // scores[i] belongs to indices[i]

  friend bool operator==(const Selection&, const Selection&) = default;
};

/// Half-open frame range [begin, end).
struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

/// B contiguous ranges covering [0, n); the first n mod B ranges hold one
/// extra frame. Throws kInvalidArgument if B > n or either is zero.
std::vector<FrameRange> bin_partition(std::size_t n, std::size_t bins);

/// Top per_bin frames of each bin by score, ties to the lower index.
Selection select(std::span<const double> scores, const SelectionConfig& config);

/// Indices floor(i n / m) for i < m, deduplicated; scores left empty.
Selection uniform_select(std::size_t n, std::size_t m);

/// Attaches scores[index] to every selected index.
Selection with_scores(Selection selection, std::span<const double> scores);

/// True iff some selected frame's timestamp (index / fps) lies in a segment.
bool coverage(const Selection& selection, std::span<const EvidenceSegment> segments, double fps);

struct CoverageCase {
  Selection selection;
  std::vector<EvidenceSegment> segments;
  double fps = 1.0;
};

/// Fraction of cases with coverage. Throws kInvalidArgument when empty.
double coverage_rate(std::span<const CoverageCase> cases);

}  // namespace evsel
