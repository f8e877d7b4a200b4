// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evsel/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "evsel/error.hpp"
#include "evsel/kernels.hpp"
#include "scorer_trace.hpp"

namespace evsel {
namespace {

void require_finite(const DenseMatrix& m, const std::string& stage) {
  if (!m.all_finite()) throw Error(ErrorKind::kNonFinite, "non-finite value at stage " + stage);
}

void require_finite(std::span<const double> xs, const std::string& stage) {
  for (double x : xs)
    if (!std::isfinite(x)) throw Error(ErrorKind::kNonFinite, "non-finite value at stage " + stage);
}

void check_mask(std::span<const double> scores, const PositiveMask& positive) {
  if (scores.size() != positive.size()) {
    throw Error(ErrorKind::kShapeMismatch, "mask has " + std::to_string(positive.size()) +
                                               " entries for " + std::to_string(scores.size()) +
                                               " scores");
  }
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (pos == 0 || pos == positive.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "InfoNCE needs at least one positive and one negative frame");
  }
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&xs](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> rank(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

std::size_t TrainingExample::positives() const noexcept {
  return static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
}

bool TrainingExample::usable() const noexcept {
  const std::size_t p = positives();
  return positive.size() == frames.rows() && p > 0 && p < positive.size();
}

void TrainConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "learning rate must be finite and >= 0");
  }
  if (batch_size == 0) throw Error(ErrorKind::kInvalidArgument, "batch size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kInvalidArgument, "adam epsilon must be > 0");
  if (clip_norm && !(*clip_norm > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "gradient clip norm must be > 0");
  }
}

OptimizerState OptimizerState::for_params(const ScorerParams& params) {
  OptimizerState s;
  params.visit([&s](const std::string&, const ParamTensor& t) {
    s.first_moment.emplace_back(t.value.rows(), t.value.cols());
    s.second_moment.emplace_back(t.value.rows(), t.value.cols());
  });
  return s;
}

PositiveMask label_frames(std::span<const EvidenceSegment> segments, std::size_t n_frames,
                          double fps) {
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw Error(ErrorKind::kInvalidArgument, "fps must be a positive number");
  }
  for (const EvidenceSegment& s : segments) {
    if (s.start_sec < 0.0 || s.end_sec < 0.0) {
      throw Error(ErrorKind::kInvalidArgument, "negative segment timestamp");
    }
    if (s.start_sec > s.end_sec) {
      throw Error(ErrorKind::kValidation, "segment start exceeds its end");
    }
  }
  PositiveMask mask(n_frames, false);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double ts = static_cast<double>(i) / fps;
    mask[i] = std::any_of(segments.begin(), segments.end(), [ts](const EvidenceSegment& s) {
      return ts >= s.start_sec && ts <= s.end_sec;
    });
  }
  return mask;
}

double infonce_loss(std::span<const double> scores, const PositiveMask& positive) {
  check_mask(scores, positive);
  std::vector<double> pos;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (positive[i]) pos.push_back(scores[i]);
  // lse(all) >= lse(pos) mathematically; rounding must not push it below 0.
  return std::max(0.0, log_sum_exp(scores) - log_sum_exp(pos));
}

std::vector<double> infonce_grad(std::span<const double> scores, const PositiveMask& positive) {
  check_mask(scores, positive);
  const std::vector<double> p_all = softmax(scores);
  std::vector<double> pos;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (positive[i]) pos.push_back(scores[i]);
  const std::vector<double> p_pos = softmax(pos);
  std::vector<double> g(scores.size());
  for (std::size_t i = 0, j = 0; i < scores.size(); ++i) {
    g[i] = p_all[i];
    if (positive[i]) g[i] -= p_pos[j++];
  }
  return g;
}

double example_loss(const TrainingExample& example, const ScorerParams& params,
                    const ScorerConfig& config) {
  return infonce_loss(score_frames(example.frames, example.query, params, config),
                      example.positive);
}

double backward(const TrainingExample& example, ScorerParams& params, const ScorerConfig& config,
                GradientFault fault) {
  check_params_match(params, config);
  const auto& kern = kernels::active();
  const detail::ScorerTrace tr =
      detail::trace_forward(example.frames, example.query, params, config.window);
  require_finite(tr.h, "aggregate");
  require_finite(tr.u, "gate");
  require_finite(tr.head_frame, "subspace heads");
  require_finite(tr.scores, "evidence score");

  const double loss = infonce_loss(tr.scores, example.positive);
  if (!std::isfinite(loss)) throw Error(ErrorKind::kNonFinite, "non-finite value at stage loss");
  const std::vector<double> dscore = infonce_grad(tr.scores, example.positive);

  const std::size_t n = tr.n, d = tr.d, heads = tr.heads, dk = tr.head_dim;
  const std::span<const double> q = example.query;
  const double lam = params.lambda();
  const double inv_heads = 1.0 / static_cast<double>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  double dlambda = 0.0;
  std::vector<double> dhead_query(heads * dk, 0.0);
  std::vector<double> dz_sum(d, 0.0);
  DenseMatrix dquery(n, d), dkey(n, d), dvalue(n, d);
  std::vector<double> du(d), dh(d), dz(d), da(dk), dalpha;

  for (std::size_t t = 0; t < n; ++t) {
    const double ds = dscore[t];
    dlambda += ds * (tr.base_cos[t] - tr.subspace_mean[t]);
    const double dsub = ds * (1.0 - lam) * inv_heads;

    // Subspace heads.
    std::fill(du.begin(), du.end(), 0.0);
    const auto u = tr.u.row(t);
    for (std::size_t k = 0; k < heads; ++k) {
      const double gam = params.gamma(k);
      const double s = tr.head_cos(t, k) / gam;
      params.gamma_log.grad(k, 0) += -s * dsub;
      if (tr.head_degenerate[t * heads + k]) continue;
      const double dcos = dsub / gam;
      const double* a = tr.head_frame.row(t).data() + k * dk;
      const double* c = tr.head_query.data() + k * dk;
      const double an = tr.head_frame_norm(t, k);
      const double cn = tr.head_query_norm[k];
      const double cs = tr.head_cos(t, k);
      for (std::size_t i = 0; i < dk; ++i) {
        da[i] = dcos * (c[i] / (an * cn) - cs * a[i] / (an * an));
        dhead_query[k * dk + i] += dcos * (a[i] / (an * cn) - cs * c[i] / (cn * cn));
      }
      DenseMatrix& wv = params.head_wv[k].value;
      kern.ger(1.0, da.data(), dk, u.data(), d, params.head_wv[k].grad.data());
      kern.gemv_t_acc(wv.data(), dk, d, da.data(), du.data());
    }

    // Gate: u = h * sigmoid(z).
    const auto h = tr.h.row(t);
    const auto g = tr.gate.row(t);
    for (std::size_t c = 0; c < d; ++c) {
      dh[c] = du[c] * g[c];
      dz[c] = du[c] * h[c] * g[c] * (1.0 - g[c]);
      dz_sum[c] += dz[c];
    }
    kern.ger(1.0, dz.data(), d, h.data(), d, params.gate_wh.grad.data());
    kern.gemv_t_acc(params.gate_wh.value.data(), d, d, dz.data(), dh.data());

    // Causal window attention with residual: h_t = v_t + sum_j alpha_j V v_j.
    const std::size_t start = tr.window_start[t];
    const auto& alpha = tr.attn_weight[t];
    dalpha.assign(alpha.size(), 0.0);
    double weighted = 0.0;
    for (std::size_t j = start; j <= t; ++j) {
      const double aj = alpha[j - start];
      kern.axpy(aj, dh.data(), dvalue.row(j).data(), d);
      dalpha[j - start] = kern.dot(dh.data(), tr.attn_value.row(j).data(), d);
      weighted += aj * dalpha[j - start];
    }
    for (std::size_t j = start; j <= t; ++j) {
      const double dlogit = alpha[j - start] * (dalpha[j - start] - weighted) * scale;
      kern.axpy(dlogit, tr.attn_key.row(j).data(), dquery.row(t).data(), d);
      kern.axpy(dlogit, tr.attn_query.row(t).data(), dkey.row(j).data(), d);
    }
  }

  for (std::size_t t = 0; t < n; ++t) {
    const double* v = example.frames.row(t).data();
    kern.ger(1.0, dquery.row(t).data(), d, v, d, params.attn_q.grad.data());
    kern.ger(1.0, dkey.row(t).data(), d, v, d, params.attn_k.grad.data());
    kern.ger(1.0, dvalue.row(t).data(), d, v, d, params.attn_v.grad.data());
  }
  kern.ger(1.0, dz_sum.data(), d, q.data(), d, params.gate_wq.grad.data());
  const double bias_sign = fault == GradientFault::kNegateGateBias ? -1.0 : 1.0;
  kern.axpy(bias_sign, dz_sum.data(), params.gate_b.grad.data(), d);
  for (std::size_t k = 0; k < heads; ++k)
    kern.ger(1.0, dhead_query.data() + k * dk, dk, q.data(), d, params.head_wq[k].grad.data());
  params.lambda_logit.grad(0, 0) += dlambda * lam * (1.0 - lam);

  params.visit([](const std::string& name, const ParamTensor& t) {
    require_finite(t.grad, "backward into " + name);
  });
  return loss;
}

double adam_step(ScorerParams& params, OptimizerState& state, const TrainConfig& config) {
  double sq = 0.0;
  params.visit([&sq](const std::string&, const ParamTensor& t) {
    for (double g : t.grad.values()) sq += g * g;
  });
  const double norm = std::sqrt(sq);
  const double clip_scale =
      (config.clip_norm && norm > *config.clip_norm) ? *config.clip_norm / norm : 1.0;

  if (state.first_moment.empty()) state = OptimizerState::for_params(params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  std::size_t idx = 0;
  params.visit([&](const std::string& name, ParamTensor& p) {
    DenseMatrix& m = state.first_moment.at(idx);
    DenseMatrix& v = state.second_moment.at(idx);
    ++idx;
    if (!m.same_shape(p.value) || !v.same_shape(p.value)) {
      throw Error(ErrorKind::kShapeMismatch, "optimizer state does not mirror tensor " + name);
    }
    auto pv = p.value.values();
    auto gv = p.grad.values();
    auto mv = m.values();
    auto vv = v.values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double g = gv[i] * clip_scale;
      mv[i] = config.beta1 * mv[i] + (1.0 - config.beta1) * g;
      vv[i] = config.beta2 * vv[i] + (1.0 - config.beta2) * g * g;
      const double mhat = mv[i] / c1;
      const double vhat = vv[i] / c2;
      pv[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  });
  return norm;
}

std::uint64_t params_checksum(const ScorerParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t word, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      h ^= (word >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  params.visit([&](const std::string& name, const ParamTensor& t) {
    for (char c : name) feed(static_cast<unsigned char>(c), 1);
    feed(t.value.rows(), 8);
    feed(t.value.cols(), 8);
    for (double v : t.value.values()) feed(std::bit_cast<std::uint64_t>(v), 8);
  });
  return h;
}

TrainResult train(std::span<const TrainingExample> dataset, const ScorerConfig& sconf,
                  const TrainConfig& tconf, const EpochCallback& on_epoch) {
  return train_from(init_scorer(sconf), dataset, sconf, tconf, on_epoch);
}

TrainResult train_from(ScorerParams params, std::span<const TrainingExample> dataset,
                       const ScorerConfig& sconf, const TrainConfig& tconf,
                       const EpochCallback& on_epoch) {
  sconf.validate();
  tconf.validate();
  check_params_match(params, sconf);

  TrainReport report;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].usable()) {
      usable.push_back(i);
    } else {
      ++report.skipped;
    }
  }
  report.used = usable.size();
  if (usable.empty()) {
    throw Error(ErrorKind::kUnusableDataset,
                "no usable examples: " + std::to_string(dataset.size()) + " given, " +
                    std::to_string(report.skipped) +
                    " skipped for lacking a positive or a negative frame");
  }

  Prng rng(tconf.seed);
  OptimizerState state = OptimizerState::for_params(params);
  std::vector<std::size_t> order = usable;
  for (std::size_t epoch = 0; epoch < tconf.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += tconf.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tconf.batch_size);
      params.zero_grad();
      // Accumulate in batch order so the merged gradient is reproducible.
      for (std::size_t b = begin; b < end; ++b) {
        const double loss = backward(dataset[order[b]], params, sconf);
        epoch_total += loss;
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      params.visit([inv](const std::string&, ParamTensor& t) {
        for (double& g : t.grad.values()) g *= inv;
      });
      adam_step(params, state, tconf);
    }
    const double mean = epoch_total / static_cast<double>(order.size());
    if (!std::isfinite(mean)) {
      throw Error(ErrorKind::kNonFinite, "epoch " + std::to_string(epoch) + " loss is not finite");
    }
    report.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  params.zero_grad();
  report.params_checksum = params_checksum(params);
  return {std::move(params), std::move(report)};
}

double gradient_relative_error(double analytic, double numeric) noexcept {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport gradient_check(const TrainingExample& example, const ScorerParams& params,
                               const ScorerConfig& config, double eps, GradientFault fault) {
  ScorerParams analytic = params;
  analytic.zero_grad();
  GradCheckReport report;
  report.loss = backward(example, analytic, config, fault);

  ScorerParams probe = params;
  std::vector<std::pair<std::string, ParamTensor*>> tensors;
  probe.visit([&tensors](const std::string& name, ParamTensor& t) { tensors.emplace_back(name, &t); });
  std::vector<const ParamTensor*> grads;
  analytic.visit([&grads](const std::string&, const ParamTensor& t) { grads.push_back(&t); });

  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    auto& [name, tensor] = tensors[ti];
    const std::vector<double> original(tensor->value.values().begin(),
                                       tensor->value.values().end());
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> x) {
          std::copy(x.begin(), x.end(), tensor->value.values().begin());
          return example_loss(example, probe, config);
        },
        original, eps);
    std::copy(original.begin(), original.end(), tensor->value.values().begin());
    const auto a = grads[ti]->grad.values();
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double err = gradient_relative_error(a[i], numeric[i]);
      ++report.checked;
      if (err > report.max_relative_error || report.worst_tensor.empty()) {
        report.max_relative_error = std::max(report.max_relative_error, err);
        report.worst_tensor = name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

GradCheckInstance random_gradcheck_instance(std::size_t frames, std::size_t dim,
                                            std::size_t subspaces, std::size_t window,
                                            std::uint64_t seed) {
  if (frames < 2) throw Error(ErrorKind::kInvalidArgument, "gradient check needs >= 2 frames");
  GradCheckInstance inst;
  inst.config.dim = dim;
  inst.config.subspaces = subspaces;
  inst.config.window = window;
  inst.config.seed = seed;
  inst.params = init_scorer(inst.config);
  Prng rng(Prng::mix(seed ^ 0x5eedULL));
  for (double& b : inst.params.gate_b.value.values()) b = 0.5 * rng.normal();
  for (double& g : inst.params.gamma_log.value.values()) g = 0.3 * rng.normal();
  inst.params.lambda_logit.value(0, 0) = rng.normal();

  inst.example.frames = FrameSequence(frames, dim);
  for (double& v : inst.example.frames.values()) v = rng.normal();
  inst.example.query.resize(dim);
  for (double& v : inst.example.query) v = rng.normal();
  inst.example.positive.assign(frames, false);
  for (std::size_t t = 0; t < frames; ++t) inst.example.positive[t] = rng.uniform() < 0.5;
  inst.example.positive[rng.below(frames)] = true;
  // Guarantee a negative distinct from the forced positive.
  if (inst.example.positives() == frames) inst.example.positive[0] = false;
  if (inst.example.positives() == 0) inst.example.positive[frames - 1] = true;
  return inst;
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kShapeMismatch, "spearman of unequal lengths");
  if (a.size() < 2) return std::nullopt;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

std::optional<double> auc(std::span<const double> scores, const PositiveMask& positive) {
  if (scores.size() != positive.size()) throw Error(ErrorKind::kShapeMismatch, "auc mask length");
  const auto ranks = average_ranks(scores);
  double pos_rank_sum = 0.0;
  std::size_t p = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (positive[i]) {
      pos_rank_sum += ranks[i];
      ++p;
    }
  }
  const std::size_t n = scores.size() - p;
  if (p == 0 || n == 0) return std::nullopt;
  const double pd = static_cast<double>(p);
  return (pos_rank_sum - pd * (pd + 1.0) / 2.0) / (pd * static_cast<double>(n));
}

ProbeResult density_ratio_probe(const ScorerParams& params, const ScorerConfig& config,
                                const TwoClassGenerator& generator,
                                std::size_t samples_per_class, std::uint64_t seed) {
  if (generator.dim() != config.dim) {
    throw Error(ErrorKind::kConfigMismatch, "generator dim differs from scorer dim");
  }
  Prng rng(seed);
  std::vector<double> scores, ratios;
  PositiveMask labels;
  bool ratio_defined = true;
  for (std::size_t i = 0; i < samples_per_class; ++i) {
    for (bool positive : {true, false}) {
      const std::vector<double> x = generator.sample(positive, rng);
      const FrameSequence single(1, x.size(), x);
      scores.push_back(score_frames(single, generator.query(), params, config)[0]);
      const auto r = generator.log_ratio(x);
      if (!r) ratio_defined = false;
      ratios.push_back(r.value_or(0.0));
      labels.push_back(positive);
    }
  }
  ProbeResult out;
  out.samples = scores.size();
  out.auc = auc(scores, labels);
  if (ratio_defined) out.spearman = spearman(scores, ratios);
  return out;
}

}  // namespace evsel
