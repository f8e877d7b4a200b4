// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evsel/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "evsel/error.hpp"

namespace evsel::info {
namespace {

double plogp_sum(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);  // 0 log 0 = 0
  }
  return h;
}

void check_subset(const DiscreteModel& model, std::span<const std::size_t> subset) {
  std::vector<bool> seen(model.n_frames(), false);
  for (std::size_t f : subset) {
    if (f >= model.n_frames()) {
      throw Error(ErrorKind::kInvalidArgument, "frame index " + std::to_string(f) +
                                                   " out of range for " +
                                                   std::to_string(model.n_frames()) + " frames");
    }
    if (seen[f]) throw Error(ErrorKind::kInvalidArgument, "frame index repeated in subset");
    seen[f] = true;
  }
}

FrameSet sorted_copy(std::span<const std::size_t> subset) {
  FrameSet s(subset.begin(), subset.end());
  std::sort(s.begin(), s.end());
  return s;
}

FrameSet mask_to_set(std::uint32_t mask, std::size_t n) {
  FrameSet s;
  for (std::size_t i = 0; i < n; ++i)
    if (mask & (1u << i)) s.push_back(i);
  return s;
}

// Visits every subset of {0..n-1} with at most m elements in lexicographic
// order of the sorted index lists (the empty set first).
void for_each_subset(std::size_t n, std::size_t m,
                     const std::function<void(const FrameSet&)>& visit) {
  FrameSet current;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    visit(current);
    if (current.size() == m) return;
    for (std::size_t f = start; f < n; ++f) {
      current.push_back(f);
      rec(f + 1);
      current.pop_back();
    }
  };
  rec(0);
}

SubsetScore argmax_over_subsets(const DiscreteModel& model, std::size_t m,
                                const std::function<double(const FrameSet&)>& objective) {
  SubsetScore best;
  bool first = true;
  for_each_subset(model.n_frames(), m, [&](const FrameSet& s) {
    const double v = objective(s);
    if (first || v > best.value + kTieTolerance) {
      best = {s, v};
      first = false;
    }
  });
  return best;
}

void check_budget(const DiscreteModel& model, std::size_t m) {
  if (m > model.n_frames()) {
    throw Error(ErrorKind::kInvalidArgument, "budget " + std::to_string(m) + " exceeds " +
                                                 std::to_string(model.n_frames()) + " frames");
  }
}

}  // namespace

DiscreteModel DiscreteModel::from_joint(std::vector<std::size_t> frame_alphabet,
                                        std::size_t answer_alphabet, std::vector<double> joint,
                                        bool factorized) {
  if (frame_alphabet.size() > kMaxFrames) {
    throw Error(ErrorKind::kTractabilityGuard,
                "model has " + std::to_string(frame_alphabet.size()) +
                    " frames; the exact oracle supports at most " + std::to_string(kMaxFrames));
  }
  if (answer_alphabet == 0) throw Error(ErrorKind::kInvalidArgument, "answer alphabet is empty");
  std::size_t cells = answer_alphabet;
  for (std::size_t a : frame_alphabet) {
    if (a == 0) throw Error(ErrorKind::kInvalidArgument, "frame alphabet is empty");
    if (cells > kMaxCells / a) {
      throw Error(ErrorKind::kTractabilityGuard, "joint table exceeds " +
                                                     std::to_string(kMaxCells) + " cells");
    }
    cells *= a;
  }
  if (joint.size() != cells) {
    throw Error(ErrorKind::kShapeMismatch, "joint table has " + std::to_string(joint.size()) +
                                               " entries, alphabets need " +
                                               std::to_string(cells));
  }
  double mass = 0.0;
  for (double p : joint) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorKind::kValidation, "joint probabilities must be finite and >= 0");
    }
    mass += p;
  }
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw Error(ErrorKind::kValidation, "joint mass is " + std::to_string(mass) + ", not 1");
  }

  DiscreteModel model;
  model.frame_alphabet_ = std::move(frame_alphabet);
  model.answer_alphabet_ = answer_alphabet;
  model.joint_ = std::move(joint);
  model.factorized_ = factorized;

  if (factorized) {
    const std::size_t n = model.n_frames();
    const std::size_t a_count = answer_alphabet;
    std::vector<double> prior(a_count, 0.0);
    std::vector<std::vector<double>> cond(n);  // cond[i][o * |f_i| + x] = p(f_i = x, O = o)
    for (std::size_t i = 0; i < n; ++i) cond[i].assign(a_count * model.frame_alphabet_[i], 0.0);

    std::vector<std::size_t> digits(n, 0);
    for (std::size_t cfg = 0; cfg < model.frame_configs(); ++cfg) {
      for (std::size_t o = 0; o < a_count; ++o) {
        const double p = model.joint_[cfg * a_count + o];
        prior[o] += p;
        for (std::size_t i = 0; i < n; ++i) cond[i][o * model.frame_alphabet_[i] + digits[i]] += p;
      }
      for (std::size_t i = n; i-- > 0;) {
        if (++digits[i] < model.frame_alphabet_[i]) break;
        digits[i] = 0;
      }
    }
    std::fill(digits.begin(), digits.end(), 0);
    for (std::size_t cfg = 0; cfg < model.frame_configs(); ++cfg) {
      for (std::size_t o = 0; o < a_count; ++o) {
        double expected = prior[o];
        if (prior[o] > 0.0) {
          for (std::size_t i = 0; i < n; ++i)
            expected *= cond[i][o * model.frame_alphabet_[i] + digits[i]] / prior[o];
        }
        if (std::abs(expected - model.joint_[cfg * a_count + o]) > kMassTolerance) {
          throw Error(ErrorKind::kValidation,
                      "table claims to be factorized but differs from the product of its "
                      "per-frame conditionals at configuration " +
                          std::to_string(cfg));
        }
      }
      for (std::size_t i = n; i-- > 0;) {
        if (++digits[i] < model.frame_alphabet_[i]) break;
        digits[i] = 0;
      }
    }
  }
  return model;
}

DiscreteModel DiscreteModel::naive_bayes(std::span<const double> answer_prior,
                                         std::span<const DenseMatrix> conditionals) {
  const std::size_t a_count = answer_prior.size();
  std::vector<std::size_t> alphabet;
  for (const DenseMatrix& c : conditionals) {
    if (c.rows() != a_count) {
      throw Error(ErrorKind::kShapeMismatch, "conditional table rows must equal answer alphabet");
    }
    alphabet.push_back(c.cols());
  }
  if (alphabet.size() > kMaxFrames) {
    throw Error(ErrorKind::kTractabilityGuard,
                "model has " + std::to_string(alphabet.size()) + " frames; at most " +
                    std::to_string(kMaxFrames) + " supported");
  }
  std::size_t configs = 1;
  for (std::size_t a : alphabet) {
    if (a == 0 || configs > kMaxCells / a) {
      throw Error(ErrorKind::kTractabilityGuard, "joint table too large");
    }
    configs *= a;
  }
  const std::size_t n = alphabet.size();
  std::vector<double> joint(configs * a_count);
  std::vector<std::size_t> digits(n, 0);
  for (std::size_t cfg = 0; cfg < configs; ++cfg) {
    for (std::size_t o = 0; o < a_count; ++o) {
      double p = answer_prior[o];
      for (std::size_t i = 0; i < n; ++i) p *= conditionals[i](o, digits[i]);
      joint[cfg * a_count + o] = p;
    }
    for (std::size_t i = n; i-- > 0;) {
      if (++digits[i] < alphabet[i]) break;
      digits[i] = 0;
    }
  }
  return from_joint(std::move(alphabet), a_count, std::move(joint), true);
}

std::vector<double> marginal_with_answer(const DiscreteModel& model,
                                         std::span<const std::size_t> subset) {
  check_subset(model, subset);
  const std::size_t n = model.n_frames();
  const std::size_t a_count = model.answer_alphabet();

  // Stride of each frame inside the marginal's frame index (0 if not kept).
  const FrameSet kept = sorted_copy(subset);
  std::vector<std::size_t> stride(n, 0);
  std::size_t marg_configs = 1;
  for (std::size_t j = kept.size(); j-- > 0;) {
    stride[kept[j]] = marg_configs;
    marg_configs *= model.frame_alphabet(kept[j]);
  }

  std::vector<double> marg(marg_configs * a_count, 0.0);
  const auto joint = model.joint();
  std::vector<std::size_t> digits(n, 0);
  std::size_t offset = 0;
  for (std::size_t cfg = 0; cfg < model.frame_configs(); ++cfg) {
    const double* src = joint.data() + cfg * a_count;
    double* dst = marg.data() + offset * a_count;
    for (std::size_t o = 0; o < a_count; ++o) dst[o] += src[o];
    for (std::size_t i = n; i-- > 0;) {
      const std::size_t alpha = model.frame_alphabet(i);
      if (++digits[i] < alpha) {
        offset += stride[i];
        break;
      }
      offset -= stride[i] * (alpha - 1);
      digits[i] = 0;
    }
  }
  return marg;
}

double answer_entropy(const DiscreteModel& model) {
  return plogp_sum(marginal_with_answer(model, {}));
}

double subset_entropy(const DiscreteModel& model, std::span<const std::size_t> subset) {
  const auto marg = marginal_with_answer(model, subset);
  const std::size_t a_count = model.answer_alphabet();
  std::vector<double> ps(marg.size() / a_count, 0.0);
  for (std::size_t s = 0; s < ps.size(); ++s)
    for (std::size_t o = 0; o < a_count; ++o) ps[s] += marg[s * a_count + o];
  return plogp_sum(ps);
}

double conditional_mi(const DiscreteModel& model, std::span<const std::size_t> subset) {
  if (subset.empty()) {
    check_subset(model, subset);
    return 0.0;
  }
  const auto marg = marginal_with_answer(model, subset);
  const std::size_t a_count = model.answer_alphabet();
  std::vector<double> ps(marg.size() / a_count, 0.0);
  std::vector<double> po(a_count, 0.0);
  for (std::size_t s = 0; s < ps.size(); ++s) {
    for (std::size_t o = 0; o < a_count; ++o) {
      ps[s] += marg[s * a_count + o];
      po[o] += marg[s * a_count + o];
    }
  }
  return plogp_sum(po) + plogp_sum(ps) - plogp_sum(marg);
}

double expected_log_likelihood(const DiscreteModel& model, std::span<const std::size_t> subset) {
  const auto marg = marginal_with_answer(model, subset);
  const std::size_t a_count = model.answer_alphabet();
  double ll = 0.0;
  for (std::size_t s = 0; s < marg.size() / a_count; ++s) {
    double ps = 0.0;
    for (std::size_t o = 0; o < a_count; ++o) ps += marg[s * a_count + o];
    for (std::size_t o = 0; o < a_count; ++o) {
      const double p = marg[s * a_count + o];
      if (p > 0.0) ll += p * std::log(p / ps);
    }
  }
  return ll;
}

LoglikReport verify_loglik_equivalence(const DiscreteModel& model, std::size_t m) {
  check_budget(model, m);
  if (model.n_frames() > kMaxFrames) throw Error(ErrorKind::kTractabilityGuard, "too many frames");
  LoglikReport r;
  r.by_information = argmax_over_subsets(
      model, m, [&](const FrameSet& s) { return conditional_mi(model, s); });
  r.by_loglik = argmax_over_subsets(
      model, m, [&](const FrameSet& s) { return expected_log_likelihood(model, s); });
  r.loglik_of_information_argmax = expected_log_likelihood(model, r.by_information.subset);
  r.information_of_loglik_argmax = conditional_mi(model, r.by_loglik.subset);
  r.coincide = r.loglik_of_information_argmax >= r.by_loglik.value - kViolationTolerance &&
               r.information_of_loglik_argmax >= r.by_information.value - kViolationTolerance;
  return r;
}

SubsetScore exhaustive_select(const DiscreteModel& model, std::size_t m) {
  if (model.n_frames() > kMaxFrames) {
    throw Error(ErrorKind::kTractabilityGuard,
                "exhaustive search is limited to n_frames <= " + std::to_string(kMaxFrames));
  }
  check_budget(model, m);
  return argmax_over_subsets(model, m,
                             [&](const FrameSet& s) { return conditional_mi(model, s); });
}

SubsetScore greedy_select(const DiscreteModel& model, std::size_t m) {
  check_budget(model, m);
  SubsetScore current{{}, 0.0};
  std::vector<bool> taken(model.n_frames(), false);
  for (std::size_t step = 0; step < m; ++step) {
    std::optional<std::size_t> best;
    double best_value = 0.0;
    for (std::size_t f = 0; f < model.n_frames(); ++f) {
      if (taken[f]) continue;
      FrameSet candidate = current.subset;
      candidate.insert(std::upper_bound(candidate.begin(), candidate.end(), f), f);
      const double v = conditional_mi(model, candidate);
      if (!best || v > best_value + kTieTolerance) {
        best = f;
        best_value = v;
      }
    }
    taken[*best] = true;
    current.subset.insert(std::upper_bound(current.subset.begin(), current.subset.end(), *best),
                          *best);
    current.value = best_value;
  }
  return current;
}

double modular_upper_bound(const DiscreteModel& model, std::span<const std::size_t> subset) {
  check_subset(model, subset);
  double total = 0.0;
  for (std::size_t f : subset) {
    const std::size_t single[1] = {f};
    total += conditional_mi(model, single);
  }
  return total;
}

std::vector<Violation> check_submodular(const DiscreteModel& model) {
  const std::size_t n = model.n_frames();
  if (n > kMaxSubmodularCheckFrames) {
    throw Error(ErrorKind::kTractabilityGuard,
                "submodularity check is limited to n_frames <= " +
                    std::to_string(kMaxSubmodularCheckFrames));
  }
  const std::uint32_t full = (1u << n) - 1;
  std::vector<double> value(std::size_t{1} << n);
  for (std::uint32_t mask = 0; mask <= full; ++mask)
    value[mask] = conditional_mi(model, mask_to_set(mask, n));

  std::vector<Violation> out;
  // Monotonicity over every pair A subset of B.
  for (std::uint32_t b = 0; b <= full; ++b) {
    for (std::uint32_t a = b;; a = (a - 1) & b) {
      if (a != b && value[a] > value[b] + kViolationTolerance) {
        out.push_back({ViolationKind::kMonotonicity, mask_to_set(a, n), mask_to_set(b, n),
                       std::nullopt, value[a], value[b]});
      }
      if (a == 0) break;
    }
  }
  // Diminishing returns over every A subset of B and f outside B.
  for (std::size_t f = 0; f < n; ++f) {
    const std::uint32_t bit = 1u << f;
    const std::uint32_t rest = full & ~bit;
    for (std::uint32_t b = rest;; b = (b - 1) & rest) {
      const double gain_b = value[b | bit] - value[b];
      for (std::uint32_t a = b;; a = (a - 1) & b) {
        const double gain_a = value[a | bit] - value[a];
        if (gain_a < gain_b - kViolationTolerance) {
          out.push_back({ViolationKind::kSubmodularity, mask_to_set(a, n), mask_to_set(b, n), f,
                         gain_a, gain_b});
        }
        if (a == 0) break;
      }
      if (b == 0) break;
    }
  }
  return out;
}

DiscreteModel copy_model() {
  // Cells ordered (f1, f2, O).
  std::vector<double> joint(8, 0.0);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t f2 = 0; f2 < 2; ++f2) joint[(o * 2 + f2) * 2 + o] = 0.25;
  return DiscreteModel::from_joint({2, 2}, 2, std::move(joint), true);
}

DiscreteModel xor_model() {
  std::vector<double> joint(8, 0.0);
  for (std::size_t f1 = 0; f1 < 2; ++f1)
    for (std::size_t f2 = 0; f2 < 2; ++f2) joint[(f1 * 2 + f2) * 2 + (f1 ^ f2)] = 0.25;
  return DiscreteModel::from_joint({2, 2}, 2, std::move(joint), false);
}

DiscreteModel random_factorized_model(std::size_t n_frames, std::size_t frame_alphabet,
                                      std::size_t answer_alphabet, Prng& rng) {
  if (frame_alphabet == 0 || answer_alphabet == 0) {
    throw Error(ErrorKind::kInvalidArgument, "alphabets must be non-empty");
  }
  auto dirichlet = [&rng](std::span<double> out) {
    double total = 0.0;
    for (double& v : out) total += v = -std::log(1.0 - rng.uniform());
    for (double& v : out) v /= total;
  };
  std::vector<double> prior(answer_alphabet);
  dirichlet(prior);
  std::vector<DenseMatrix> conditionals;
  for (std::size_t i = 0; i < n_frames; ++i) {
    DenseMatrix c(answer_alphabet, frame_alphabet);
    for (std::size_t o = 0; o < answer_alphabet; ++o) dirichlet(c.row(o));
    conditionals.push_back(std::move(c));
  }
  return DiscreteModel::naive_bayes(prior, conditionals);
}

ModelFixture parse_model_fixture(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, std::string("model fixture: ") + e.what());
  }
  try {
    for (const auto& [key, _] : j.items()) {
      if (key != "name" && key != "frame_alphabet" && key != "answer_alphabet" &&
          key != "factorized" && key != "joint") {
        throw Error(ErrorKind::kMalformedRecord, "model fixture: unknown key '" + key + "'");
      }
    }
    ModelFixture fx{j.value("name", std::string{}),
                    DiscreteModel::from_joint(j.at("frame_alphabet").get<std::vector<std::size_t>>(),
                                              j.at("answer_alphabet").get<std::size_t>(),
                                              j.at("joint").get<std::vector<double>>(),
                                              j.value("factorized", false))};
    return fx;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, std::string("model fixture: ") + e.what());
  }
}

std::string format_model_fixture(const DiscreteModel& model, const std::string& name) {
  nlohmann::json j;
  if (!name.empty()) j["name"] = name;
  j["frame_alphabet"] = std::vector<std::size_t>(model.frame_alphabets().begin(),
                                                 model.frame_alphabets().end());
  j["answer_alphabet"] = model.answer_alphabet();
  j["factorized"] = model.factorized();
  j["joint"] = std::vector<double>(model.joint().begin(), model.joint().end());
  return j.dump(2) + "\n";
}

ModelFixture load_model_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open model fixture " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_fixture(buf.str());
}

}  // namespace evsel::info
