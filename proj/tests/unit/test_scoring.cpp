// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "evsel/error.hpp"
#include "evsel/io.hpp"
#include "evsel/scoring.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace evsel {
namespace {

using testing::random_matrix;
using testing::random_vector;

// --- Literal oracles, written with plain loops. ----------------------------

std::vector<double> mv(const DenseMatrix& a, std::span<const double> x) {
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) y[r] += a(r, c) * x[c];
  return y;
}

double plain_cos(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::vector<double> oracle_h(const DenseMatrix& v, const ScorerParams& p, std::size_t w,
                             std::size_t t) {
  const std::size_t d = v.cols();
  const std::size_t lo = t + 1 >= w ? t + 1 - w : 0;
  const auto qt = mv(p.attn_q.value, v.row(t));
  std::vector<double> logits;
  for (std::size_t j = lo; j <= t; ++j) {
    const auto kj = mv(p.attn_k.value, v.row(j));
    double s = 0;
    for (std::size_t c = 0; c < d; ++c) s += qt[c] * kj[c];
    logits.push_back(s / std::sqrt(static_cast<double>(d)));
  }
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double z = 0;
  for (double& l : logits) z += (l = std::exp(l - mx));
  std::vector<double> h(v.row(t).begin(), v.row(t).end());
  for (std::size_t j = lo; j <= t; ++j) {
    const auto vj = mv(p.attn_v.value, v.row(j));
    for (std::size_t c = 0; c < d; ++c) h[c] += logits[j - lo] / z * vj[c];
  }
  return h;
}

std::vector<double> oracle_gate(std::span<const double> h, std::span<const double> q,
                                const ScorerParams& p) {
  const auto a = mv(p.gate_wh.value, h), b = mv(p.gate_wq.value, q);
  std::vector<double> u(h.size());
  for (std::size_t c = 0; c < h.size(); ++c)
    u[c] = h[c] / (1.0 + std::exp(-(a[c] + b[c] + p.gate_b.value(c, 0))));
  return u;
}

std::vector<double> oracle_subspace(std::span<const double> u, std::span<const double> q,
                                    const ScorerParams& p) {
  std::vector<double> s;
  for (std::size_t k = 0; k < p.head_wv.size(); ++k)
    s.push_back(plain_cos(mv(p.head_wv[k].value, u), mv(p.head_wq[k].value, q)) /
                std::exp(p.gamma_log.value(k, 0)));
  return s;
}

ScorerParams random_params(const ScorerConfig& cfg, std::uint64_t seed) {
  ScorerParams p = init_scorer(cfg);
  Prng rng(seed);
  for (double& b : p.gate_b.value.values()) b = 0.5 * rng.normal();
  for (double& g : p.gamma_log.value.values()) g = 0.3 * rng.normal();
  p.lambda_logit.value(0, 0) = rng.normal();
  return p;
}

ScorerConfig small_config(std::size_t d = 8, std::size_t k = 2, std::size_t w = 2) {
  return {.dim = d, .subspaces = k, .window = w, .lambda_init = 0.5, .seed = 17};
}

// --- Config / init ---------------------------------------------------------

TEST(ScorerConfig, Validation) {
  EXPECT_NO_THROW(ScorerConfig{}.validate());
  EXPECT_EQ(ScorerConfig{}.dim, 768u);
  EXPECT_EQ(ScorerConfig{}.subspaces, 8u);
  EXPECT_EQ(ScorerConfig{}.window, 8u);
  EXPECT_THROW(small_config(10, 3).validate(), Error);
  EXPECT_THROW(small_config(8, 2, 0).validate(), Error);
  ScorerConfig bad = small_config();
  bad.lambda_init = 1.5;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(InitScorer, DeterministicWithUnitTemperatureAndHalfBlend) {
  const auto cfg = small_config();
  const ScorerParams a = init_scorer(cfg), b = init_scorer(cfg);
  EXPECT_EQ(a, b);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(a.gamma(k), 1.0);
  EXPECT_EQ(a.lambda_logit.value(0, 0), 0.0);
  EXPECT_EQ(a.lambda(), 0.5);
  for (double v : a.gate_b.value.values()) EXPECT_EQ(v, 0.0);
  auto other = cfg;
  other.seed = 18;
  EXPECT_NE(init_scorer(other), a);
  other = cfg;
  other.lambda_init = 0.8;
  EXPECT_NEAR(init_scorer(other).lambda(), 0.8, 1e-15);
}

TEST(InitScorer, ParameterCount) {
  const auto p = init_scorer(small_config());
  // 5 d*d + d + 2 K d_k d + K + 1
  EXPECT_EQ(p.parameter_count(), 5u * 64 + 8 + 2 * 2 * 4 * 8 + 2 + 1);
}

// --- aggregate -------------------------------------------------------------

TEST(Aggregate, WindowOneIsResidualPlusValue) {
  const auto cfg = small_config();
  const ScorerParams p = init_scorer(cfg);
  Prng rng(1);
  const DenseMatrix v = random_matrix(5, 8, rng);
  const DenseMatrix h = aggregate(v, p, 1);
  for (std::size_t t = 0; t < 5; ++t) {
    const auto av = mv(p.attn_v.value, v.row(t));
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(h(t, c), v(t, c) + av[c], 1e-14);
  }
}

TEST(Aggregate, ZeroValueProjectionIsIdentity) {
  ScorerParams p = init_scorer(small_config());
  p.attn_v.value.set_zero();
  Prng rng(2);
  const DenseMatrix v = random_matrix(6, 8, rng);
  EXPECT_EQ(aggregate(v, p, 3), v);
}

TEST(Aggregate, MatchesPerWindowSoftmaxOracle) {
  Prng rng(3);
  for (std::size_t w : {1u, 2u, 3u, 5u}) {
    const ScorerParams p = random_params(small_config(), 10 + w);
    const DenseMatrix v = random_matrix(3 + w, 8, rng);
    const DenseMatrix h = aggregate(v, p, w);
    for (std::size_t t = 0; t < v.rows(); ++t) {
      const auto want = oracle_h(v, p, w, t);
      for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(h(t, c), want[c], 1e-12);
    }
  }
}

TEST(Aggregate, EmptySequenceThrows) {
  const ScorerParams p = init_scorer(small_config());
  EXPECT_THROW(aggregate(DenseMatrix(0, 8), p, 2), Error);
  Prng rng(4);
  EXPECT_THROW(aggregate(random_matrix(2, 8, rng), p, 0), Error);
}

TEST(Aggregate, CausalAndWindowed) {
  const std::size_t n = 9, w = 3;
  const ScorerParams p = random_params(small_config(8, 2, w), 5);
  Prng rng(5);
  const DenseMatrix v = random_matrix(n, 8, rng);
  const auto q = random_vector(8, rng);
  const auto cfg = small_config(8, 2, w);
  const DenseMatrix h = aggregate(v, p, w);
  const ScoreVector s = score_frames(v, q, p, cfg);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j <= t && j + w > t) continue;  // inside the window of t
      DenseMatrix z = v;
      for (double& x : z.row(j)) x = 0.0;
      const DenseMatrix hz = aggregate(z, p, w);
      for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(hz(t, c), h(t, c));
      EXPECT_EQ(score_frames(z, q, p, cfg)[t], s[t]);
    }
  }
}

TEST(Aggregate, TruncatedSequenceGivesSamePrefix) {
  const auto cfg = small_config(8, 2, 2);
  const ScorerParams p = random_params(cfg, 6);
  Prng rng(6);
  const DenseMatrix v = random_matrix(7, 8, rng);
  const auto q = random_vector(8, rng);
  const ScoreVector full = score_frames(v, q, p, cfg);
  for (std::size_t len = 1; len <= 7; ++len) {
    DenseMatrix prefix(len, 8);
    for (std::size_t t = 0; t < len; ++t)
      std::copy(v.row(t).begin(), v.row(t).end(), prefix.row(t).begin());
    const ScoreVector part = score_frames(prefix, q, p, cfg);
    for (std::size_t t = 0; t < len; ++t) EXPECT_EQ(part[t], full[t]);
  }
}

// --- gate ------------------------------------------------------------------

TEST(Gate, ZeroWeightsHalveInput) {
  ScorerParams p = zero_scorer(small_config());
  Prng rng(7);
  const auto h = random_vector(8, rng), q = random_vector(8, rng);
  const auto r = gate(h, q, p);
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(r.gated[c], h[c] / 2);
    EXPECT_EQ(r.gate[c], 0.5);
  }
}

TEST(Gate, SaturatedBiasPassesInput) {
  ScorerParams p = init_scorer(small_config());
  for (double& b : p.gate_b.value.values()) b = 1000.0;
  Prng rng(8);
  const auto h = random_vector(8, rng), q = random_vector(8, rng);
  const auto r = gate(h, q, p);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(r.gated[c], h[c], 1e-12);
}

TEST(Gate, MatchesLoopOracleAndStaysInOpenInterval) {
  Prng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const ScorerParams p = random_params(small_config(), 100 + trial);
    const auto h = random_vector(8, rng), q = random_vector(8, rng);
    const auto r = gate(h, q, p);
    const auto want = oracle_gate(h, q, p);
    for (std::size_t c = 0; c < 8; ++c) {
      EXPECT_NEAR(r.gated[c], want[c], 1e-14);
      EXPECT_GT(r.gate[c], 0.0);
      EXPECT_LT(r.gate[c], 1.0);
    }
  }
}

// --- subspace scores -------------------------------------------------------

TEST(SubspaceScores, IdenticalProjectionsScoreOne) {
  ScorerParams p = init_scorer(small_config());
  for (std::size_t k = 0; k < 2; ++k) p.head_wq[k] = p.head_wv[k];
  Prng rng(10);
  const auto q = random_vector(8, rng);
  const auto s = subspace_scores(q, q, p);
  for (double x : s.values) EXPECT_NEAR(x, 1.0, 1e-15);
}

TEST(SubspaceScores, TemperatureScalesExactly) {
  ScorerParams p = init_scorer(small_config());
  Prng rng(11);
  const auto u = random_vector(8, rng), q = random_vector(8, rng);
  const auto base = subspace_scores(u, q, p);
  p.gamma_log.value(1, 0) = std::log(2.0);
  const auto halved = subspace_scores(u, q, p);
  EXPECT_EQ(halved.values[0], base.values[0]);
  EXPECT_EQ(halved.values[1], base.values[1] / 2.0);
}

TEST(SubspaceScores, MatchesFormulaOracle) {
  Prng rng(12);
  const ScorerConfig cfg{.dim = 4, .subspaces = 2, .window = 1, .lambda_init = 0.5, .seed = 3};
  for (int trial = 0; trial < 10; ++trial) {
    const ScorerParams p = random_params(cfg, 200 + trial);
    const auto u = random_vector(4, rng), q = random_vector(4, rng);
    const auto got = subspace_scores(u, q, p);
    const auto want = oracle_subspace(u, q, p);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_NEAR(got.values[k], want[k], 1e-14);
      EXPECT_FALSE(got.degenerate[k]);
    }
  }
}

TEST(SubspaceScores, ZeroProjectionIsDegenerate) {
  ScorerParams p = init_scorer(small_config());
  p.head_wv[0].value.set_zero();
  Prng rng(13);
  const auto u = random_vector(8, rng), q = random_vector(8, rng);
  const auto s = subspace_scores(u, q, p);
  EXPECT_EQ(s.values[0], 0.0);
  EXPECT_TRUE(s.degenerate[0]);
  EXPECT_FALSE(s.degenerate[1]);
}

// --- blend -----------------------------------------------------------------

TEST(EvidenceScore, BlendEndpoints) {
  ScorerParams p = random_params(small_config(), 14);
  Prng rng(14);
  const auto v = random_vector(8, rng), u = random_vector(8, rng), q = random_vector(8, rng);
  p.lambda_logit.value(0, 0) = 1000.0;
  EXPECT_EQ(p.lambda(), 1.0);
  EXPECT_NEAR(evidence_score(v, u, q, p), plain_cos(v, q), 1e-12);
  p.lambda_logit.value(0, 0) = -1000.0;
  const auto s = oracle_subspace(u, q, p);
  EXPECT_NEAR(evidence_score(v, u, q, p), (s[0] + s[1]) / 2, 1e-12);
}

TEST(EvidenceScore, HalfBlendWithOrthogonalHeads) {
  // v = q unit vectors; every head projection of u is zero, so s_k = 0.
  ScorerParams p = init_scorer(small_config());
  std::vector<double> q(8, 0.0);
  q[0] = 1.0;
  const std::vector<double> u(8, 0.0);
  EXPECT_EQ(evidence_score(q, u, q, p), 0.5);
}

// --- full pipeline ---------------------------------------------------------

TEST(ScoreFrames, SingleFrameAtFullBlendIsCosine) {
  const auto cfg = small_config();
  ScorerParams p = init_scorer(cfg);
  p.lambda_logit.value(0, 0) = 1000.0;
  Prng rng(15);
  const DenseMatrix v = random_matrix(1, 8, rng);
  const auto q = random_vector(8, rng);
  const auto s = score_frames(v, q, p, cfg);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0], plain_cos(v.row(0), q), 1e-12);
}

TEST(ScoreFrames, FullBlendIsScaleInvariant) {
  const auto cfg = small_config();
  ScorerParams p = init_scorer(cfg);
  p.lambda_logit.value(0, 0) = 1000.0;
  Prng rng(16);
  DenseMatrix v = random_matrix(4, 8, rng);
  const auto q = random_vector(8, rng);
  const auto s = score_frames(v, q, p, cfg);
  for (double& x : v.values()) x *= 37.5;
  const auto t = score_frames(v, q, p, cfg);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s[i], t[i], 1e-9);
}

TEST(ScoreFrames, ComposesTheStages) {
  const auto cfg = small_config(8, 2, 3);
  const ScorerParams p = random_params(cfg, 17);
  Prng rng(17);
  const DenseMatrix v = random_matrix(6, 8, rng);
  const auto q = random_vector(8, rng);
  const auto s = score_frames(v, q, p, cfg);
  for (std::size_t t = 0; t < 6; ++t) {
    const auto h = oracle_h(v, p, 3, t);
    const auto u = oracle_gate(h, q, p);
    const auto sub = oracle_subspace(u, q, p);
    const double lam = 1.0 / (1.0 + std::exp(-p.lambda_logit.value(0, 0)));
    EXPECT_NEAR(s[t], lam * plain_cos(v.row(t), q) + (1 - lam) * (sub[0] + sub[1]) / 2, 1e-12);
  }
}

TEST(ScoreFrames, DimensionMismatchNamesFrame) {
  const auto cfg = small_config();
  const ScorerParams p = init_scorer(cfg);
  Prng rng(18);
  try {
    score_frames(random_matrix(3, 6, rng), random_vector(8, rng), p, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("frame 0"), std::string::npos);
  }
  EXPECT_THROW(score_frames(random_matrix(3, 8, rng), random_vector(6, rng), p, cfg), Error);
}

nlohmann::json golden() {
  std::ifstream in(testing::source_path("tests/data/golden_scores.json"));
  return nlohmann::json::parse(in);
}

TEST(ScoreFrames, GoldenVectorFromInitialisation) {
  const ScorerConfig cfg{.dim = 8, .subspaces = 2, .window = 2, .lambda_init = 0.5, .seed = 7};
  const DenseMatrix v =
      io::load_embeddings(testing::source_path("tests/data/golden_frames.evsb")).to_dense();
  const auto qt = io::load_embeddings(testing::source_path("tests/data/golden_query.evsb"));
  const std::vector<double> q(qt.values.begin(), qt.values.end());
  const auto s = score_frames(v, q, init_scorer(cfg), cfg);
  const auto want = golden()["init_seed_7"].get<std::vector<double>>();
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s[i], want[i], 1e-12);
}

TEST(ScoreFrames, GoldenCheckpointSharesInitialWeights) {
  const auto ck = io::load_checkpoint(testing::source_path("tests/data/golden_tiny.evck"));
  const ScorerParams init = init_scorer(ck.config);
  EXPECT_EQ(ck.params.attn_q, init.attn_q);
  EXPECT_EQ(ck.params.head_wq[1], init.head_wq[1]);
  EXPECT_NE(ck.params.gate_b, init.gate_b);
}

}  // namespace
}  // namespace evsel
