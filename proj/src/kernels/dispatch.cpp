// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>

#include "evsel/kernels.hpp"

namespace evsel::kernels {
namespace {

const KernelTable* table_for(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return &scalar_kernels();
    case Backend::kAvx2:
      return avx2_kernels();
    case Backend::kNeon:
      return neon_kernels();
  }
  return nullptr;
}

const KernelTable* pick_default() noexcept {
  if (const char* env = std::getenv("EVSEL_KERNELS")) {
    if (auto requested = parse_backend(env)) {
      if (const KernelTable* t = table_for(*requested)) return t;
    }
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  if (const KernelTable* t = neon_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& selected() noexcept {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "unknown";
}

std::optional<Backend> parse_backend(std::string_view name) noexcept {
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "neon") return Backend::kNeon;
  return std::nullopt;
}

bool backend_supported(Backend backend) noexcept { return table_for(backend) != nullptr; }

const KernelTable& active() noexcept {
  return *selected().load(std::memory_order_acquire);
}

bool set_kernel_backend(Backend backend) noexcept {
  const KernelTable* t = table_for(backend);
  if (t == nullptr) return false;
  selected().store(t, std::memory_order_release);
  return true;
}

}  // namespace evsel::kernels
