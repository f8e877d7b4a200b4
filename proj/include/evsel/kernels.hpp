// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

// Double-precision inner loops used by the scorer. Each kernel has a scalar
// reference implementation and, where the target allows it, a vectorized
// variant. The active variant is chosen once at runtime from CPU features and
// can be pinned with EVSEL_KERNELS=scalar|avx2|neon or set_kernel_backend().
//
// All matrices are row-major with a leading dimension equal to `cols`.

#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace evsel::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend backend) noexcept;
std::optional<Backend> parse_backend(std::string_view name) noexcept;

struct KernelTable {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x, A is rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y);
  // y += A^T x, A is rows x cols, x has rows entries, y has cols entries
  void (*gemv_t_acc)(const double* a, std::size_t rows, std::size_t cols,
                     const double* x, double* y);
  // A += alpha * x y^T, x has rows entries, y has cols entries
  void (*ger)(double alpha, const double* x, std::size_t rows, const double* y,
              std::size_t cols, double* a);
};

const KernelTable& scalar_kernels() noexcept;
// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

bool backend_supported(Backend backend) noexcept;

// The table every library routine goes through.
const KernelTable& active() noexcept;

// Returns false (and leaves the selection unchanged) if unsupported.
bool set_kernel_backend(Backend backend) noexcept;

}  // namespace evsel::kernels
