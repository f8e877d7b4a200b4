// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evsel/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "evsel/error.hpp"

namespace evsel::synth {
namespace {

std::vector<double> random_unit(std::size_t d, Prng& rng) {
  std::vector<double> v(d);
  double sq = 0.0;
  for (double& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return v;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

}  // namespace

GaussianTwoClass::GaussianTwoClass(std::size_t dim, double separation, double sigma,
                                   std::uint64_t seed)
    : separation_(separation), sigma_(sigma) {
  if (dim < 2) throw Error(ErrorKind::kInvalidArgument, "generator needs dim >= 2");
  if (!(sigma > 0.0)) throw Error(ErrorKind::kInvalidArgument, "generator needs sigma > 0");
  Prng rng(seed);
  query_ = random_unit(dim, rng);
  // Center: a unit vector orthogonalized against the query.
  center_ = random_unit(dim, rng);
  const double proj = dot(center_, query_);
  for (std::size_t i = 0; i < dim; ++i) center_[i] -= proj * query_[i];
  const double nc = norm2(center_);
  for (double& x : center_) x /= nc;
}

std::vector<double> GaussianTwoClass::sample(bool positive, Prng& rng) const {
  const double sign = positive ? 1.0 : -1.0;
  std::vector<double> x(query_.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = center_[i] + sign * separation_ * query_[i] + sigma_ * rng.normal();
  return x;
}

std::optional<double> GaussianTwoClass::log_ratio(std::span<const double> x) const {
  if (separation_ == 0.0) return std::nullopt;
  return 2.0 * separation_ * dot(x, query_) / (sigma_ * sigma_);
}

TrainingExample GaussianTwoClass::sample_sequence(std::size_t n, std::size_t positives,
                                                  Prng& rng) const {
  if (positives > n) throw Error(ErrorKind::kInvalidArgument, "more positives than frames");
  TrainingExample ex;
  ex.frames = FrameSequence(n, dim());
  ex.query = query_;
  ex.positive.assign(n, false);
  const std::size_t start = positives == n ? 0 : static_cast<std::size_t>(rng.below(n - positives + 1));
  for (std::size_t t = 0; t < n; ++t) {
    const bool pos = t >= start && t < start + positives;
    ex.positive[t] = pos;
    const auto x = sample(pos, rng);
    std::copy(x.begin(), x.end(), ex.frames.row(t).begin());
  }
  return ex;
}

std::vector<PlantedVideo> planted_corpus(const PlantedCorpusConfig& config) {
  if (config.dim < 2) throw Error(ErrorKind::kInvalidArgument, "corpus needs dim >= 2");
  if (config.segment_min_frames == 0 || config.segment_min_frames > config.segment_max_frames ||
      config.segment_max_frames > config.frames_per_video) {
    throw Error(ErrorKind::kInvalidArgument,
                "segment length bounds must satisfy 1 <= min <= max <= frames per video");
  }
  if (config.scenes == 0) throw Error(ErrorKind::kInvalidArgument, "corpus needs >= 1 scene");
  if (!(config.fps > 0.0)) throw Error(ErrorKind::kInvalidArgument, "fps must be > 0");

  Prng rng(config.seed);
  const std::size_t n = config.frames_per_video;
  const std::size_t d = config.dim;
  const double noise_scale = config.noise / std::sqrt(static_cast<double>(d));
  std::vector<PlantedVideo> out;
  for (std::size_t v = 0; v < config.videos; ++v) {
    PlantedVideo pv;
    pv.query = random_unit(d, rng);
    std::vector<std::vector<double>> scenes;
    for (std::size_t s = 0; s < config.scenes; ++s) scenes.push_back(random_unit(d, rng));

    const std::size_t len =
        config.segment_min_frames +
        static_cast<std::size_t>(rng.below(config.segment_max_frames - config.segment_min_frames + 1));
    const std::size_t start = static_cast<std::size_t>(rng.below(n - len + 1));

    pv.frames = FrameSequence(n, d);
    for (std::size_t t = 0; t < n; ++t) {
      const auto& scene = scenes[t * config.scenes / n];
      const bool evidence = t >= start && t < start + len;
      auto row = pv.frames.row(t);
      for (std::size_t i = 0; i < d; ++i) {
        row[i] = scene[i] + noise_scale * rng.normal();
        if (evidence) row[i] += config.signal * pv.query[i];
      }
    }
    pv.annotation.query_id = numbered("q", v);
    pv.annotation.video_id = numbered("v", v);
    pv.annotation.fps = config.fps;
    pv.annotation.n_frames = n;
    pv.annotation.segments.push_back({static_cast<double>(start) / config.fps,
                                      static_cast<double>(start + len - 1) / config.fps});
    out.push_back(std::move(pv));
  }
  return out;
}

std::vector<TrainingExample> to_examples(const std::vector<PlantedVideo>& corpus) {
  std::vector<TrainingExample> out;
  for (const PlantedVideo& pv : corpus) {
    TrainingExample ex;
    ex.frames = pv.frames;
    ex.query = pv.query;
    ex.positive = label_frames(pv.annotation.segments, pv.frames.rows(), pv.annotation.fps);
    out.push_back(std::move(ex));
  }
  return out;
}

std::filesystem::path frames_path(const std::filesystem::path& dir, const std::string& video_id) {
  return dir / (video_id + ".frames.evsb");
}

std::filesystem::path query_path(const std::filesystem::path& dir, const std::string& query_id) {
  return dir / (query_id + ".query.evsb");
}

std::vector<io::AnnotationRecord> write_corpus(const std::filesystem::path& dir,
                                               const std::vector<PlantedVideo>& corpus) {
  std::filesystem::create_directories(dir);
  std::vector<io::AnnotationRecord> records;
  for (const PlantedVideo& pv : corpus) {
    io::save_embeddings(frames_path(dir, pv.annotation.video_id),
                        io::EmbeddingTable::from_dense(pv.frames));
    io::save_embeddings(query_path(dir, pv.annotation.query_id),
                        io::EmbeddingTable::from_dense(DenseMatrix(1, pv.query.size(), pv.query)));
    records.push_back(pv.annotation);
  }
  return records;
}

}  // namespace evsel::synth
