// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

// Query-conditioned evidence scorer.
//
//   h_t = v_t + sum_{j in window(t)} softmax_j(<Aq v_t, Ak v_j> / sqrt(d)) Av v_j
//   u_t = h_t * sigmoid(Wh h_t + Wq q + b)
//   s_tk = cos(Hv_k u_t, Hq_k q) / gamma_k                 k = 1..K
//   score_t = lambda cos(v_t, q) + (1 - lambda) mean_k s_tk
//
// window(t) = {max(0, t - w + 1), ..., t}. gamma_k = exp(gamma_log_k) and
// lambda = sigmoid(lambda_logit), so both stay in range under any update.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "evsel/numerics.hpp"

namespace evsel {

/// n x d matrix, one frame embedding per row, in temporal order.
using FrameSequence = DenseMatrix;
using QueryEmbedding = std::vector<double>;
using ScoreVector = std::vector<double>;

struct ScorerConfig {
  std::size_t dim = 768;
  std::size_t subspaces = 8;
  std::size_t window = 8;
  double lambda_init = 0.5;
  std::uint64_t seed = 0;

  std::size_t subspace_dim() const noexcept { return subspaces == 0 ? 0 : dim / subspaces; }
  /// Throws kInvalidArgument naming the offending field.
  void validate() const;

  friend bool operator==(const ScorerConfig&, const ScorerConfig&) = default;
};

struct ScorerParams {
  ParamTensor attn_q, attn_k, attn_v;  // d x d
  ParamTensor gate_wh, gate_wq;        // d x d
  ParamTensor gate_b;                  // d x 1
  std::vector<ParamTensor> head_wv;    // K of d_k x d
  std::vector<ParamTensor> head_wq;    // K of d_k x d
  ParamTensor gamma_log;               // K x 1
  ParamTensor lambda_logit;            // 1 x 1

  std::size_t dim() const noexcept { return attn_q.value.rows(); }
  std::size_t subspaces() const noexcept { return head_wv.size(); }
  double gamma(std::size_t k) const;
  double lambda() const;

  /// Stable tensor names, in checkpoint and optimizer order.
  void visit(const std::function<void(const std::string&, ParamTensor&)>& fn);
  void visit(const std::function<void(const std::string&, const ParamTensor&)>& fn) const;
  std::size_t parameter_count() const;
  void zero_grad();

  friend bool operator==(const ScorerParams&, const ScorerParams&) = default;
};

/// Xavier matrices, zero gate bias, gamma = 1, lambda = lambda_init.
ScorerParams init_scorer(const ScorerConfig& config);

/// Empty params shaped for `config` (all zeros, gamma = 1, lambda = 1/2).
ScorerParams zero_scorer(const ScorerConfig& config);

/// Contextual vectors h (n x d). Throws on an empty sequence or w == 0.
DenseMatrix aggregate(const FrameSequence& frames, const ScorerParams& params, std::size_t window);

struct GateResult {
  std::vector<double> gate;   // sigmoid activations, each in (0, 1)
  std::vector<double> gated;  // u = h * gate
};
GateResult gate(std::span<const double> h, std::span<const double> q, const ScorerParams& params);

struct SubspaceScores {
  std::vector<double> values;   // K scores, already divided by gamma_k
  std::vector<bool> degenerate; // projected norm was zero; value is 0
};
SubspaceScores subspace_scores(std::span<const double> u, std::span<const double> q,
                               const ScorerParams& params);

double evidence_score(std::span<const double> v, std::span<const double> u,
                      std::span<const double> q, const ScorerParams& params);

/// Full pipeline. Throws kShapeMismatch naming the first frame or query whose
/// width differs from config.dim.
ScoreVector score_frames(const FrameSequence& frames, std::span<const double> q,
                         const ScorerParams& params, const ScorerConfig& config);

/// Throws kConfigMismatch if params are not shaped as config describes.
void check_params_match(const ScorerParams& params, const ScorerConfig& config);

}  // namespace evsel
