// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evsel/numerics.hpp"
#include "evsel/scoring.hpp"

namespace evsel {

/// Closed interval [start_sec, end_sec] on the video timeline.
struct EvidenceSegment {
  double start_sec = 0.0;
  double end_sec = 0.0;
  friend bool operator==(const EvidenceSegment&, const EvidenceSegment&) = default;
};

using PositiveMask = std::vector<bool>;

struct TrainingExample {
  FrameSequence frames;
  QueryEmbedding query;
  PositiveMask positive;

  std::size_t positives() const noexcept;
  /// At least one positive and one negative, and mask length matches.
  bool usable() const noexcept;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 5;
  std::size_t batch_size = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::optional<double> clip_norm;

  void validate() const;
};

/// Adaptive-moment state, one moment pair per ParamTensor in visit() order.
struct OptimizerState {
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_params(const ScorerParams& params);
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per-example loss, measured before each update
  std::size_t skipped = 0;         // examples without a positive or a negative
  std::size_t used = 0;
  std::uint64_t params_checksum = 0;
};

/// Frame i (timestamp i / fps) is positive iff it falls in any segment.
PositiveMask label_frames(std::span<const EvidenceSegment> segments, std::size_t n_frames,
                          double fps);

/// Multi-positive InfoNCE: lse(all scores) - lse(positive scores).
double infonce_loss(std::span<const double> scores, const PositiveMask& positive);

/// d loss / d score for every frame.
std::vector<double> infonce_grad(std::span<const double> scores, const PositiveMask& positive);

/// Deliberate gradient corruption for exercising the gradient checker.
enum class GradientFault { kNone, kNegateGateBias };

/// Adds the exact gradient of infonce_loss(score_frames(...)) to every
/// params.*.grad and returns the loss. Throws kNonFinite naming the stage
/// where a non-finite value first appears.
double backward(const TrainingExample& example, ScorerParams& params, const ScorerConfig& config,
                GradientFault fault = GradientFault::kNone);

/// Loss of one example under the current parameters, no gradients.
double example_loss(const TrainingExample& example, const ScorerParams& params,
                    const ScorerConfig& config);

/// Optional global-norm clipping, then a bias-corrected adaptive-moment update
/// using params.*.grad. Returns the pre-clipping gradient norm.
double adam_step(ScorerParams& params, OptimizerState& state, const TrainConfig& config);

/// FNV-1a over every tensor's name, shape and value bytes.
std::uint64_t params_checksum(const ScorerParams& params);

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

struct TrainResult {
  ScorerParams params;
  TrainReport report;
};

/// Seeded per-epoch shuffle, mini-batches of per-example mean loss. Throws
/// kUnusableDataset if no example is usable, kNonFinite on a non-finite loss.
TrainResult train(std::span<const TrainingExample> dataset, const ScorerConfig& sconf,
                  const TrainConfig& tconf, const EpochCallback& on_epoch = {});

/// Continues from given parameters.
TrainResult train_from(ScorerParams params, std::span<const TrainingExample> dataset,
                       const ScorerConfig& sconf, const TrainConfig& tconf,
                       const EpochCallback& on_epoch = {});

// Gradient verification.

/// |analytic - numeric| / max(|analytic|, |numeric|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-6;
double gradient_relative_error(double analytic, double numeric) noexcept;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double loss = 0.0;
  std::size_t checked = 0;  // parameters compared
};

/// Compares backward() against central differences of example_loss() on every
/// parameter of every tensor.
GradCheckReport gradient_check(const TrainingExample& example, const ScorerParams& params,
                               const ScorerConfig& config, double eps = 1e-5,
                               GradientFault fault = GradientFault::kNone);

struct GradCheckInstance {
  ScorerConfig config;
  ScorerParams params;
  TrainingExample example;
};

/// Random small instance: Gaussian frames and query, Xavier weights with
/// randomized gate bias, temperatures and blend, at least one positive and
/// one negative frame.
GradCheckInstance random_gradcheck_instance(std::size_t frames, std::size_t dim,
                                            std::size_t subspaces, std::size_t window,
                                            std::uint64_t seed);

// Ranking diagnostics.

/// Spearman rank correlation with average ranks for ties; nullopt when either
/// side is constant.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

/// Probability that a random positive outscores a random negative (ties
/// count half). nullopt without both classes.
std::optional<double> auc(std::span<const double> scores, const PositiveMask& positive);

/// A synthetic frame source whose class-conditional log density ratio is
/// known in closed form.
class TwoClassGenerator {
 public:
  virtual ~TwoClassGenerator() = default;
  virtual std::size_t dim() const = 0;
  virtual const QueryEmbedding& query() const = 0;
  virtual std::vector<double> sample(bool positive, Prng& rng) const = 0;
  /// log p(x | positive) - log p(x | negative); nullopt if the classes coincide.
  virtual std::optional<double> log_ratio(std::span<const double> x) const = 0;
};

struct ProbeResult {
  std::optional<double> spearman;
  std::optional<double> auc;
  std::size_t samples = 0;
};

/// Scores `samples_per_class` held-out draws of each class as single-frame
/// sequences and compares the scores to the generator's true log ratio.
ProbeResult density_ratio_probe(const ScorerParams& params, const ScorerConfig& config,
                                const TwoClassGenerator& generator,
                                std::size_t samples_per_class, std::uint64_t seed);

}  // namespace evsel
