// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evsel/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evsel/error.hpp"
#include "evsel/kernels.hpp"
#include "scorer_trace.hpp"

namespace evsel {
namespace {

std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_width(std::span<const double> x, std::size_t d, const char* what) {
  if (x.size() != d) {
    throw Error(ErrorKind::kShapeMismatch, std::string(what) + " has width " +
                                               std::to_string(x.size()) + ", expected " +
                                               std::to_string(d));
  }
}

// Attention weights and h_t for position t from precomputed projections.
void attend(std::size_t t, std::size_t start, const DenseMatrix& frames,
            const DenseMatrix& query, const DenseMatrix& key, const DenseMatrix& value,
            std::vector<double>& weight, std::span<double> h_out) {
  const auto& k = kernels::active();
  const std::size_t d = frames.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> logits(t - start + 1);
  for (std::size_t j = start; j <= t; ++j)
    logits[j - start] = scale * k.dot(query.row(t).data(), key.row(j).data(), d);
  weight = softmax(logits);
  std::copy(frames.row(t).begin(), frames.row(t).end(), h_out.begin());
  for (std::size_t j = start; j <= t; ++j)
    k.axpy(weight[j - start], value.row(j).data(), h_out.data(), d);
}

DenseMatrix project_rows(const DenseMatrix& frames, const DenseMatrix& w) {
  DenseMatrix out(frames.rows(), w.rows());
  const auto& k = kernels::active();
  for (std::size_t t = 0; t < frames.rows(); ++t)
    k.gemv(w.data(), w.rows(), w.cols(), frames.row(t).data(), out.row(t).data());
  return out;
}

// Fills gate activations and u given the query-side pre-activation Wq q + b.
void apply_gate(std::span<const double> h, std::span<const double> query_bias,
                const ScorerParams& params, std::span<double> gate_out,
                std::span<double> u_out) {
  const std::size_t d = h.size();
  const DenseMatrix& wh = params.gate_wh.value;
  kernels::active().gemv(wh.data(), d, d, h.data(), gate_out.data());
  for (std::size_t c = 0; c < d; ++c) {
    gate_out[c] = sigmoid(gate_out[c] + query_bias[c]);
    u_out[c] = h[c] * gate_out[c];
  }
}

std::vector<double> gate_query_bias(std::span<const double> q, const ScorerParams& params) {
  std::vector<double> z = matvec(params.gate_wq.value, q);
  const auto b = params.gate_b.value.values();
  for (std::size_t c = 0; c < z.size(); ++c) z[c] += b[c];
  return z;
}

// Concatenated per-head projections of x, K blocks of d_k.
std::vector<double> project_heads(std::span<const double> x,
                                  const std::vector<ParamTensor>& heads) {
  std::vector<double> out;
  for (const ParamTensor& w : heads) {
    const auto block = matvec(w.value, x);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

ParamTensor scalar_tensor(double v) { return ParamTensor(DenseMatrix(1, 1, v)); }

}  // namespace

void ScorerConfig::validate() const {
  if (dim == 0) throw Error(ErrorKind::kInvalidArgument, "scorer dim must be >= 1");
  if (subspaces == 0) throw Error(ErrorKind::kInvalidArgument, "subspaces K must be >= 1");
  if (dim % subspaces != 0) {
    throw Error(ErrorKind::kInvalidArgument, "subspaces K=" + std::to_string(subspaces) +
                                                 " must divide dim d=" + std::to_string(dim));
  }
  if (window == 0) throw Error(ErrorKind::kInvalidArgument, "window w must be >= 1");
  if (!(lambda_init >= 0.0 && lambda_init <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "lambda_init must lie in [0, 1]");
  }
}

double ScorerParams::gamma(std::size_t k) const { return std::exp(gamma_log.value(k, 0)); }

double ScorerParams::lambda() const { return sigmoid(lambda_logit.value(0, 0)); }

void ScorerParams::visit(const std::function<void(const std::string&, ParamTensor&)>& fn) {
  fn("attn.q", attn_q);
  fn("attn.k", attn_k);
  fn("attn.v", attn_v);
  fn("gate.wh", gate_wh);
  fn("gate.wq", gate_wq);
  fn("gate.b", gate_b);
  for (std::size_t k = 0; k < head_wv.size(); ++k) fn("head.wv." + std::to_string(k), head_wv[k]);
  for (std::size_t k = 0; k < head_wq.size(); ++k) fn("head.wq." + std::to_string(k), head_wq[k]);
  fn("gamma.log", gamma_log);
  fn("lambda.logit", lambda_logit);
}

void ScorerParams::visit(
    const std::function<void(const std::string&, const ParamTensor&)>& fn) const {
  const_cast<ScorerParams*>(this)->visit(
      [&fn](const std::string& name, ParamTensor& t) { fn(name, t); });
}

std::size_t ScorerParams::parameter_count() const {
  std::size_t total = 0;
  visit([&total](const std::string&, const ParamTensor& t) { total += t.value.size(); });
  return total;
}

void ScorerParams::zero_grad() {
  visit([](const std::string&, ParamTensor& t) { t.zero_grad(); });
}

ScorerParams zero_scorer(const ScorerConfig& config) {
  config.validate();
  const std::size_t d = config.dim;
  const std::size_t dk = config.subspace_dim();
  ScorerParams p;
  p.attn_q = p.attn_k = p.attn_v = ParamTensor(DenseMatrix(d, d));
  p.gate_wh = p.gate_wq = ParamTensor(DenseMatrix(d, d));
  p.gate_b = ParamTensor(DenseMatrix(d, 1));
  p.head_wv.assign(config.subspaces, ParamTensor(DenseMatrix(dk, d)));
  p.head_wq.assign(config.subspaces, ParamTensor(DenseMatrix(dk, d)));
  p.gamma_log = ParamTensor(DenseMatrix(config.subspaces, 1));
  p.lambda_logit = scalar_tensor(0.0);
  return p;
}

ScorerParams init_scorer(const ScorerConfig& config) {
  config.validate();
  const std::size_t d = config.dim;
  const std::size_t dk = config.subspace_dim();
  Prng rng(config.seed);
  ScorerParams p;
  p.attn_q = ParamTensor(init_xavier(d, d, rng));
  p.attn_k = ParamTensor(init_xavier(d, d, rng));
  p.attn_v = ParamTensor(init_xavier(d, d, rng));
  p.gate_wh = ParamTensor(init_xavier(d, d, rng));
  p.gate_wq = ParamTensor(init_xavier(d, d, rng));
  p.gate_b = ParamTensor(DenseMatrix(d, 1));
  for (std::size_t k = 0; k < config.subspaces; ++k)
    p.head_wv.emplace_back(init_xavier(dk, d, rng));
  for (std::size_t k = 0; k < config.subspaces; ++k)
    p.head_wq.emplace_back(init_xavier(dk, d, rng));
  p.gamma_log = ParamTensor(DenseMatrix(config.subspaces, 1));
  // logit is unbounded at the endpoints; clamp into the representable range.
  const double lam = std::clamp(config.lambda_init, 1e-12, 1.0 - 1e-12);
  p.lambda_logit = scalar_tensor(config.lambda_init == 0.5 ? 0.0 : logit(lam));
  return p;
}

void check_params_match(const ScorerParams& params, const ScorerConfig& config) {
  config.validate();
  const std::size_t d = config.dim;
  const std::size_t dk = config.subspace_dim();
  auto expect = [](const ParamTensor& t, std::size_t r, std::size_t c, const std::string& name) {
    if (t.value.rows() != r || t.value.cols() != c || !t.value.same_shape(t.grad)) {
      throw Error(ErrorKind::kConfigMismatch, "tensor " + name + " is " + shape_str(t.value) +
                                                  ", config expects " + std::to_string(r) +
                                                  "x" + std::to_string(c));
    }
  };
  if (params.head_wv.size() != config.subspaces || params.head_wq.size() != config.subspaces) {
    throw Error(ErrorKind::kConfigMismatch, "params carry " +
                                                std::to_string(params.head_wv.size()) +
                                                " subspace heads, config expects " +
                                                std::to_string(config.subspaces));
  }
  params.visit([&](const std::string& name, const ParamTensor& t) {
    if (name.starts_with("head.")) {
      expect(t, dk, d, name);
    } else if (name == "gate.b") {
      expect(t, d, 1, name);
    } else if (name == "gamma.log") {
      expect(t, config.subspaces, 1, name);
    } else if (name == "lambda.logit") {
      expect(t, 1, 1, name);
    } else {
      expect(t, d, d, name);
    }
  });
}

DenseMatrix aggregate(const FrameSequence& frames, const ScorerParams& params,
                      std::size_t window) {
  if (frames.rows() == 0) throw Error(ErrorKind::kInvalidArgument, "empty frame sequence");
  if (window == 0) throw Error(ErrorKind::kInvalidArgument, "window must be >= 1");
  if (frames.cols() != params.dim()) {
    throw Error(ErrorKind::kShapeMismatch, "frames have width " + std::to_string(frames.cols()) +
                                               ", scorer expects " +
                                               std::to_string(params.dim()));
  }
  const DenseMatrix query = project_rows(frames, params.attn_q.value);
  const DenseMatrix key = project_rows(frames, params.attn_k.value);
  const DenseMatrix value = project_rows(frames, params.attn_v.value);
  DenseMatrix h(frames.rows(), frames.cols());
  std::vector<double> weight;
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    const std::size_t start = t + 1 >= window ? t + 1 - window : 0;
    attend(t, start, frames, query, key, value, weight, h.row(t));
  }
  return h;
}

GateResult gate(std::span<const double> h, std::span<const double> q,
                const ScorerParams& params) {
  require_width(h, params.dim(), "contextual vector");
  require_width(q, params.dim(), "query");
  const auto bias = gate_query_bias(q, params);
  GateResult r{std::vector<double>(h.size()), std::vector<double>(h.size())};
  apply_gate(h, bias, params, r.gate, r.gated);
  return r;
}

SubspaceScores subspace_scores(std::span<const double> u, std::span<const double> q,
                               const ScorerParams& params) {
  require_width(u, params.dim(), "gated vector");
  require_width(q, params.dim(), "query");
  SubspaceScores r;
  for (std::size_t k = 0; k < params.subspaces(); ++k) {
    const auto a = matvec(params.head_wv[k].value, u);
    const auto c = matvec(params.head_wq[k].value, q);
    const CosineResult cs = cosine(a, c);
    r.values.push_back(cs.value / params.gamma(k));
    r.degenerate.push_back(cs.degenerate);
  }
  return r;
}

double evidence_score(std::span<const double> v, std::span<const double> u,
                      std::span<const double> q, const ScorerParams& params) {
  require_width(v, params.dim(), "frame");
  const SubspaceScores s = subspace_scores(u, q, params);
  double mean = 0.0;
  for (double x : s.values) mean += x;
  mean /= static_cast<double>(s.values.size());
  const double lam = params.lambda();
  return lam * cosine(v, q).value + (1.0 - lam) * mean;
}

ScoreVector score_frames(const FrameSequence& frames, std::span<const double> q,
                         const ScorerParams& params, const ScorerConfig& config) {
  config.validate();
  if (params.dim() != config.dim) {
    throw Error(ErrorKind::kConfigMismatch, "params have dim " + std::to_string(params.dim()) +
                                                ", config says " + std::to_string(config.dim));
  }
  if (frames.rows() > 0 && frames.cols() != config.dim) {
    // Rows of a matrix share a width, so frame 0 is the first offender.
    throw Error(ErrorKind::kShapeMismatch, "frame 0 has width " + std::to_string(frames.cols()) +
                                               ", expected " + std::to_string(config.dim));
  }
  return detail::trace_forward(frames, q, params, config.window).scores;
}

namespace detail {

ScorerTrace trace_forward(const FrameSequence& frames, std::span<const double> q,
                          const ScorerParams& params, std::size_t window) {
  const auto& kern = kernels::active();
  ScorerTrace tr;
  tr.n = frames.rows();
  tr.d = params.dim();
  tr.heads = params.subspaces();
  tr.head_dim = tr.heads == 0 ? 0 : tr.d / tr.heads;
  require_width(q, tr.d, "query");

  if (tr.n == 0) throw Error(ErrorKind::kInvalidArgument, "empty frame sequence");
  if (window == 0) throw Error(ErrorKind::kInvalidArgument, "window must be >= 1");
  if (frames.cols() != tr.d) {
    throw Error(ErrorKind::kShapeMismatch, "frames have width " + std::to_string(frames.cols()) +
                                               ", scorer expects " + std::to_string(tr.d));
  }
  tr.attn_query = project_rows(frames, params.attn_q.value);
  tr.attn_key = project_rows(frames, params.attn_k.value);
  tr.attn_value = project_rows(frames, params.attn_v.value);
  tr.window_start.resize(tr.n);
  tr.attn_weight.resize(tr.n);
  tr.h = DenseMatrix(tr.n, tr.d);
  for (std::size_t t = 0; t < tr.n; ++t) {
    tr.window_start[t] = t + 1 >= window ? t + 1 - window : 0;
    attend(t, tr.window_start[t], frames, tr.attn_query, tr.attn_key, tr.attn_value,
           tr.attn_weight[t], tr.h.row(t));
  }

  const auto bias = gate_query_bias(q, params);
  tr.gate = DenseMatrix(tr.n, tr.d);
  tr.u = DenseMatrix(tr.n, tr.d);
  for (std::size_t t = 0; t < tr.n; ++t) apply_gate(tr.h.row(t), bias, params, tr.gate.row(t), tr.u.row(t));

  tr.head_query = project_heads(q, params.head_wq);
  tr.head_query_norm.resize(tr.heads);
  for (std::size_t k = 0; k < tr.heads; ++k) {
    const double* c = tr.head_query.data() + k * tr.head_dim;
    tr.head_query_norm[k] = std::sqrt(kern.dot(c, c, tr.head_dim));
  }
  const double q_norm = norm2(q);

  tr.head_frame = DenseMatrix(tr.n, tr.heads * tr.head_dim);
  tr.head_frame_norm = DenseMatrix(tr.n, tr.heads);
  tr.head_cos = DenseMatrix(tr.n, tr.heads);
  tr.head_degenerate.assign(tr.n * tr.heads, 0);
  tr.base_cos.resize(tr.n);
  tr.base_degenerate.assign(tr.n, 0);
  tr.subspace_mean.resize(tr.n);
  tr.scores.resize(tr.n);
  const double lam = params.lambda();
  for (std::size_t t = 0; t < tr.n; ++t) {
    double mean = 0.0;
    for (std::size_t k = 0; k < tr.heads; ++k) {
      const DenseMatrix& w = params.head_wv[k].value;
      double* a = tr.head_frame.row(t).data() + k * tr.head_dim;
      kern.gemv(w.data(), w.rows(), w.cols(), tr.u.row(t).data(), a);
      const double an = std::sqrt(kern.dot(a, a, tr.head_dim));
      tr.head_frame_norm(t, k) = an;
      const double cn = tr.head_query_norm[k];
      double cs = 0.0;
      if (an == 0.0 || cn == 0.0) {
        tr.head_degenerate[t * tr.heads + k] = 1;
      } else {
        cs = std::clamp(kern.dot(a, tr.head_query.data() + k * tr.head_dim, tr.head_dim) /
                            (an * cn),
                        -1.0, 1.0);
      }
      tr.head_cos(t, k) = cs;
      mean += cs / params.gamma(k);
    }
    mean /= static_cast<double>(tr.heads);
    tr.subspace_mean[t] = mean;

    const double vn = norm2(frames.row(t));
    if (vn == 0.0 || q_norm == 0.0) {
      tr.base_degenerate[t] = 1;
      tr.base_cos[t] = 0.0;
    } else {
      tr.base_cos[t] = std::clamp(kern.dot(frames.row(t).data(), q.data(), tr.d) / (vn * q_norm),
                                  -1.0, 1.0);
    }
    tr.scores[t] = lam * tr.base_cos[t] + (1.0 - lam) * mean;
  }
  return tr;
}

}  // namespace detail
}  // namespace evsel
