// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

// Exact information-theoretic oracle for keyframe selection on small discrete
// models. One model stands for one fixed query context, so every quantity here
// is implicitly conditioned on the query. All values are in nats.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evsel/numerics.hpp"

namespace evsel::info {

inline constexpr std::size_t kMaxFrames = 14;
inline constexpr std::size_t kMaxSubmodularCheckFrames = 10;
inline constexpr std::size_t kMaxCells = std::size_t{1} << 24;
inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kViolationTolerance = 1e-9;
// A candidate must beat the incumbent by more than this to replace it, so
// near-ties resolve to the lexicographically first subset.
inline constexpr double kTieTolerance = 1e-12;

/// Sorted, duplicate-free frame indices.
using FrameSet = std::vector<std::size_t>;

/// Joint distribution p(f_1..f_n, O) stored flat, row-major with the frames
/// first (f_1 slowest) and the answer O fastest.
class DiscreteModel {
 public:
  /// Validates alphabets, table size, non-negativity, unit mass and, when
  /// `factorized` is claimed, that the table equals p(O) * prod_i p(f_i | O).
  static DiscreteModel from_joint(std::vector<std::size_t> frame_alphabet,
                                  std::size_t answer_alphabet, std::vector<double> joint,
                                  bool factorized);

  /// Builds the naive-Bayes joint. conditionals[i] is answer_alphabet x
  /// |f_i| with rows p(f_i | O = o).
  static DiscreteModel naive_bayes(std::span<const double> answer_prior,
                                   std::span<const DenseMatrix> conditionals);

  std::size_t n_frames() const noexcept { return frame_alphabet_.size(); }
  std::size_t frame_alphabet(std::size_t i) const { return frame_alphabet_.at(i); }
  std::span<const std::size_t> frame_alphabets() const noexcept { return frame_alphabet_; }
  std::size_t answer_alphabet() const noexcept { return answer_alphabet_; }
  std::span<const double> joint() const noexcept { return joint_; }
  bool factorized() const noexcept { return factorized_; }
  /// Number of joint frame configurations (product of frame alphabets).
  std::size_t frame_configs() const noexcept { return joint_.size() / answer_alphabet_; }

 private:
  DiscreteModel() = default;

  std::vector<std::size_t> frame_alphabet_;
  std::size_t answer_alphabet_ = 0;
  std::vector<double> joint_;
  bool factorized_ = false;
};

struct SubsetScore {
  FrameSet subset;
  double value = 0.0;
};

/// Marginal table p(S, O) with S's frames in ascending index order, answer
/// fastest. Throws kInvalidArgument on an invalid or repeated index.
std::vector<double> marginal_with_answer(const DiscreteModel& model,
                                         std::span<const std::size_t> subset);

double answer_entropy(const DiscreteModel& model);
/// H(S), the joint entropy of the selected frames.
double subset_entropy(const DiscreteModel& model, std::span<const std::size_t> subset);

/// F(S) = I(S; O) = H(O) + H(S) - H(S, O); F(empty) = 0 exactly.
double conditional_mi(const DiscreteModel& model, std::span<const std::size_t> subset);

/// E[log p(O | S)] = sum_{s,o} p(s, o) log p(o | s).
double expected_log_likelihood(const DiscreteModel& model, std::span<const std::size_t> subset);

struct LoglikReport {
  SubsetScore by_information;  // argmax of F(S)
  SubsetScore by_loglik;       // argmax of E[log p(O | S)]
  double loglik_of_information_argmax = 0.0;
  double information_of_loglik_argmax = 0.0;
  /// True when each argmax is also optimal under the other objective.
  bool coincide = false;
};

/// Compares the two argmaxes over all subsets with |S| <= m.
LoglikReport verify_loglik_equivalence(const DiscreteModel& model, std::size_t m);

/// Global optimum of F over |S| <= m. Throws kTractabilityGuard if
/// n_frames > kMaxFrames.
SubsetScore exhaustive_select(const DiscreteModel& model, std::size_t m);

/// Adds m frames one at a time, each with maximal marginal gain (lowest index
/// on ties).
SubsetScore greedy_select(const DiscreteModel& model, std::size_t m);

/// sum_{f in S} F({f}).
double modular_upper_bound(const DiscreteModel& model, std::span<const std::size_t> subset);

enum class ViolationKind { kSubmodularity, kMonotonicity };

struct Violation {
  ViolationKind kind = ViolationKind::kSubmodularity;
  FrameSet smaller;             // A
  FrameSet larger;              // B, with A a subset of B
  std::optional<std::size_t> added;  // f, submodularity only
  double lhs = 0.0;  // F(A + f) - F(A), or F(A)
  double rhs = 0.0;  // F(B + f) - F(B), or F(B)
};

/// Enumerates every A subset of B and f outside B. Throws kTractabilityGuard
/// above kMaxSubmodularCheckFrames.
std::vector<Violation> check_submodular(const DiscreteModel& model);

// Fixtures.

/// O uniform binary, f_1 = O, f_2 uniform noise independent of O.
DiscreteModel copy_model();
/// O = f_1 xor f_2 with f_1, f_2 uniform and independent.
DiscreteModel xor_model();
/// Naive-Bayes model with Dirichlet(1) prior and conditionals.
DiscreteModel random_factorized_model(std::size_t n_frames, std::size_t frame_alphabet,
                                      std::size_t answer_alphabet, Prng& rng);

// Fixture files: JSON object with "frame_alphabet" (array), "answer_alphabet",
// "factorized" and "joint" (flat array, frames first, answer fastest).
// An optional "name" string is preserved.
struct ModelFixture {
  std::string name;
  DiscreteModel model;
};

ModelFixture parse_model_fixture(const std::string& text);
std::string format_model_fixture(const DiscreteModel& model, const std::string& name);
ModelFixture load_model_fixture(const std::filesystem::path& path);

}  // namespace evsel::info
