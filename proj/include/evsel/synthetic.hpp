// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

// Synthetic corpora with planted evidence, for training smoke tests, ranking
// diagnostics and coverage comparisons.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evsel/io.hpp"
#include "evsel/training.hpp"

namespace evsel::synth {

/// Isotropic Gaussians N(center -/+ separation * qhat, sigma^2 I) for the
/// negative/positive class, with center orthogonal to the unit query qhat.
/// The log density ratio is 2 * separation * <x, qhat> / sigma^2.
class GaussianTwoClass final : public TwoClassGenerator {
 public:
  GaussianTwoClass(std::size_t dim, double separation, double sigma, std::uint64_t seed);

  std::size_t dim() const override { return query_.size(); }
  const QueryEmbedding& query() const override { return query_; }
  std::vector<double> sample(bool positive, Prng& rng) const override;
  std::optional<double> log_ratio(std::span<const double> x) const override;

  /// A video of n frames whose positives form one contiguous block.
  TrainingExample sample_sequence(std::size_t n, std::size_t positives, Prng& rng) const;

 private:
  QueryEmbedding query_;
  std::vector<double> center_;
  double separation_;
  double sigma_;
};

struct PlantedCorpusConfig {
  std::size_t dim = 32;
  std::size_t videos = 64;
  std::size_t frames_per_video = 128;
  double fps = 1.0;
  std::size_t segment_min_frames = 4;
  std::size_t segment_max_frames = 6;
  // Number of scene changes per video; background frames drift between them.
  std::size_t scenes = 4;
  double signal = 0.8;  // weight of the query direction inside evidence frames
  double noise = 0.35;  // per-frame isotropic noise scale (whole-vector norm)
  std::uint64_t seed = 1;
};

struct PlantedVideo {
  io::AnnotationRecord annotation;
  FrameSequence frames;
  QueryEmbedding query;
};

/// Every video gets its own random query and one evidence segment of
/// [segment_min_frames, segment_max_frames] frames at a random offset.
std::vector<PlantedVideo> planted_corpus(const PlantedCorpusConfig& config);

/// Builds training examples (labels from the annotation's segments).
std::vector<TrainingExample> to_examples(const std::vector<PlantedVideo>& corpus);

/// Embedding file layout used by the command line tools.
std::filesystem::path frames_path(const std::filesystem::path& dir, const std::string& video_id);
std::filesystem::path query_path(const std::filesystem::path& dir, const std::string& query_id);

/// Writes <dir>/<video>.frames.evsb, <dir>/<query>.query.evsb and returns
/// the annotations (not written).
std::vector<io::AnnotationRecord> write_corpus(const std::filesystem::path& dir,
                                               const std::vector<PlantedVideo>& corpus);

}  // namespace evsel::synth
