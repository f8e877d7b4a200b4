// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace evsel {

/// Row-major dense matrix of doubles. Vectors are stored as n x 1.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return values_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  bool same_shape(const DenseMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;
  void set_zero() noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// A learnable tensor together with its gradient accumulator.
struct ParamTensor {
  DenseMatrix value;
  DenseMatrix grad;

  ParamTensor() = default;
  explicit ParamTensor(DenseMatrix v)
      : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() noexcept { grad.set_zero(); }

  friend bool operator==(const ParamTensor&, const ParamTensor&) = default;
};

/// Counter-based generator: output i is the SplitMix64 finalizer applied to
/// seed + (i + 1) * 0x9E3779B97F4A7C15. All derived distributions below are
/// built from that stream with fixed arithmetic so that a seed reproduces the
/// same values on every platform (modulo libm for normal()).
class Prng {
 public:
  explicit Prng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller; consumes two outputs per call.
  double normal() noexcept;

  template <class T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t z) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

/// y = A x. Throws kShapeMismatch when A.cols() != x.size().
std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> x);

double sigmoid(double x) noexcept;
std::vector<double> sigmoid(std::span<const double> x);
/// Inverse of sigmoid; p must be in (0, 1).
double logit(double p);

struct CosineResult {
  double value = 0.0;
  bool degenerate = false;  // one of the inputs had zero norm; value is 0
};
CosineResult cosine(std::span<const double> u, std::span<const double> v);

double log_sum_exp(std::span<const double> xs);

/// Softmax computed with a max shift; probabilities sum to 1.
std::vector<double> softmax(std::span<const double> xs);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double eps);

/// Xavier-uniform: entries uniform in +-sqrt(6 / (rows + cols)), filled in
/// row-major order from successive rng.uniform() draws.
DenseMatrix init_xavier(std::size_t rows, std::size_t cols, Prng& rng);

}  // namespace evsel
