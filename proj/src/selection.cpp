// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evsel/selection.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "evsel/error.hpp"

namespace evsel {

void SelectionConfig::validate() const {
  if (bins == 0) throw Error(ErrorKind::kInvalidArgument, "bins B must be >= 1");
  if (per_bin == 0) throw Error(ErrorKind::kInvalidArgument, "per-bin count must be >= 1");
}

std::vector<FrameRange> bin_partition(std::size_t n, std::size_t bins) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "cannot bin an empty sequence");
  if (bins == 0) throw Error(ErrorKind::kInvalidArgument, "bins B must be >= 1");
  if (bins > n) {
    throw Error(ErrorKind::kInvalidArgument, "B=" + std::to_string(bins) + " bins exceed n=" +
                                                 std::to_string(n) +
                                                 " frames; a bin would be empty");
  }
  const std::size_t base = n / bins;
  const std::size_t extra = n % bins;
  std::vector<FrameRange> out;
  out.reserve(bins);
  std::size_t begin = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    out.push_back({begin, begin + len});
    begin += len;
  }
  return out;
}

Selection select(std::span<const double> scores, const SelectionConfig& config) {
  config.validate();
  const auto ranges = bin_partition(scores.size(), config.bins);
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> idx;
  for (const FrameRange& r : ranges) {
    idx.resize(r.size());
    std::iota(idx.begin(), idx.end(), r.begin);
    const std::size_t take = std::min(config.per_bin, r.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      [&scores](std::size_t a, std::size_t b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return a < b;
                      });
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(chosen.begin(), chosen.end());
  return with_scores({std::move(chosen), {}}, scores);
}

Selection uniform_select(std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw Error(ErrorKind::kInvalidArgument, "uniform_select needs n, m >= 1");
  Selection s;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t idx = i * n / m;
    if (s.indices.empty() || s.indices.back() != idx) s.indices.push_back(idx);
  }
  return s;
}

Selection with_scores(Selection selection, std::span<const double> scores) {
  selection.scores.clear();
  for (std::size_t i : selection.indices) {
    if (i >= scores.size()) {
      throw Error(ErrorKind::kInvalidArgument, "selected index " + std::to_string(i) +
                                                   " beyond " + std::to_string(scores.size()) +
                                                   " scores");
    }
    selection.scores.push_back(scores[i]);
  }
  return selection;
}

bool coverage(const Selection& selection, std::span<const EvidenceSegment> segments, double fps) {
  if (!(fps > 0.0)) throw Error(ErrorKind::kInvalidArgument, "fps must be > 0");
  for (std::size_t i : selection.indices) {
    const double ts = static_cast<double>(i) / fps;
    for (const EvidenceSegment& s : segments)
      if (ts >= s.start_sec && ts <= s.end_sec) return true;
  }
  return false;
}

double coverage_rate(std::span<const CoverageCase> cases) {
  if (cases.empty()) throw Error(ErrorKind::kInvalidArgument, "coverage_rate of an empty dataset");
  std::size_t hit = 0;
  for (const CoverageCase& c : cases) hit += coverage(c.selection, c.segments, c.fps) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(cases.size());
}

}  // namespace evsel
