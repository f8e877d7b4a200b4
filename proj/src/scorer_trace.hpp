// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

// Forward-pass intermediates shared by scoring and backpropagation.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evsel/numerics.hpp"
#include "evsel/scoring.hpp"

namespace evsel::detail {

struct ScorerTrace {
  std::size_t n = 0, d = 0, heads = 0, head_dim = 0;

  DenseMatrix attn_query, attn_key, attn_value;  // n x d projections of v
  std::vector<std::size_t> window_start;         // first key index per position
  std::vector<std::vector<double>> attn_weight;  // softmax over the window

  DenseMatrix h;     // n x d
  DenseMatrix gate;  // n x d, sigmoid activations
  DenseMatrix u;     // n x d

  // Query side of each head, concatenated: K blocks of d_k.
  std::vector<double> head_query;
  std::vector<double> head_query_norm;  // K
  // Frame side, n x (K d_k) = n x d.
  DenseMatrix head_frame;
  DenseMatrix head_frame_norm;  // n x K
  DenseMatrix head_cos;         // n x K, raw cosine (0 when degenerate)
  std::vector<unsigned char> head_degenerate;  // n x K

  std::vector<double> base_cos;  // cos(v_t, q)
  std::vector<unsigned char> base_degenerate;
  std::vector<double> subspace_mean;  // mean_k s_tk
  std::vector<double> scores;
};

/// Evaluates the pipeline and records every intermediate. Validates shapes.
ScorerTrace trace_forward(const FrameSequence& frames, std::span<const double> q,
                          const ScorerParams& params, std::size_t window);

}  // namespace evsel::detail
