// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evsel/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "evsel/error.hpp"
#include "evsel/kernels.hpp"

namespace evsel {

std::string_view error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kShapeMismatch: return "shape mismatch";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kTractabilityGuard: return "tractability guard";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kBadVersion: return "bad version";
    case ErrorKind::kChecksumMismatch: return "checksum mismatch";
    case ErrorKind::kTruncated: return "truncated file";
    case ErrorKind::kMalformedRecord: return "malformed record";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kMissingTensor: return "missing tensor";
    case ErrorKind::kDuplicateTensor: return "duplicate tensor";
    case ErrorKind::kConfigMismatch: return "config mismatch";
    case ErrorKind::kUnusableDataset: return "unusable dataset";
  }
  return "error";
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw Error(ErrorKind::kShapeMismatch,
                "matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                    std::to_string(values_.size()) + " values");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::column(std::span<const double> values) {
  return DenseMatrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void DenseMatrix::set_zero() noexcept { std::fill(values_.begin(), values_.end(), 0.0); }

std::uint64_t Prng::mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Prng::next_u64() noexcept {
  ++counter_;
  return mix(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double Prng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Prng::below(std::uint64_t bound) noexcept {
  // Rejection keeps the result unbiased.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

double Prng::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::kShapeMismatch,
                "matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " by " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const auto& k = kernels::active();
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double s = a(i, p);
      if (s != 0.0) k.axpy(s, b.row(p).data(), c.row(i).data(), b.cols());
    }
  }
  return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw Error(ErrorKind::kShapeMismatch, "matvec with " + std::to_string(a.cols()) +
                                               " columns and vector of " +
                                               std::to_string(x.size()));
  }
  std::vector<double> y(a.rows());
  kernels::active().gemv(a.data(), a.rows(), a.cols(), x.data(), y.data());
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kShapeMismatch, "dot of unequal lengths");
  return kernels::active().dot(a.data(), b.data(), a.size());
}

double norm2(std::span<const double> x) {
  return std::sqrt(kernels::active().dot(x.data(), x.data(), x.size()));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> sigmoid(std::span<const double> x) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return sigmoid(v); });
  return out;
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "logit needs p in (0, 1), got " + std::to_string(p));
  }
  return std::log(p) - std::log1p(-p);
}

CosineResult cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorKind::kShapeMismatch, "cosine of unequal lengths");
  const auto& k = kernels::active();
  const double nu = std::sqrt(k.dot(u.data(), u.data(), u.size()));
  const double nv = std::sqrt(k.dot(v.data(), v.data(), v.size()));
  if (nu == 0.0 || nv == 0.0) return {0.0, true};
  const double c = k.dot(u.data(), v.data(), u.size()) / (nu * nv);
  return {std::clamp(c, -1.0, 1.0), false};
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorKind::kInvalidArgument, "log_sum_exp of an empty vector");
  if (xs.size() == 1) return xs[0];
  const double m = *std::max_element(xs.begin(), xs.end());
  if (std::isinf(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

std::vector<double> softmax(std::span<const double> xs) {
  std::vector<double> p(xs.size());
  if (xs.empty()) return p;
  const double m = *std::max_element(xs.begin(), xs.end());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) total += p[i] = std::exp(xs[i] - m);
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::kInvalidArgument, "finite_diff_grad needs eps > 0");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorKind::kNonFinite,
                  "finite_diff_grad: f is not finite around coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

DenseMatrix init_xavier(std::size_t rows, std::size_t cols, Prng& rng) {
  if (rows == 0 || cols == 0) {
    throw Error(ErrorKind::kInvalidArgument, "init_xavier needs rows, cols >= 1");
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = limit * (2.0 * rng.uniform() - 1.0);
  return m;
}

}  // namespace evsel
