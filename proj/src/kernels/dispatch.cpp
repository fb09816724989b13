// Copyright 2026 The sshdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <stdexcept>

#include "sshdl/fixed_point.hpp"
#include "sshdl/kernels.hpp"

namespace sshdl::kernels {

namespace {

// -1: no override, otherwise the Isa value.
std::atomic<int> g_override{-1};

Isa detect() {
#if defined(__x86_64__) && defined(SSHDL_HAVE_AVX2_KERNELS)
  if (__builtin_cpu_supports("avx2")) return Isa::kAvx2;
#endif
  return Isa::kScalar;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "?";
}

bool isa_supported(Isa isa) {
  if (isa == Isa::kScalar) return true;
  return detect() == Isa::kAvx2;
}

Isa active_isa() {
  static const Isa detected = detect();
  const int o = g_override.load(std::memory_order_relaxed);
  return o < 0 ? detected : static_cast<Isa>(o);
}

void set_isa_override(std::optional<Isa> isa) {
  if (isa && !isa_supported(*isa)) {
    throw std::invalid_argument("ISA not supported on this host");
  }
  g_override.store(isa ? static_cast<int>(*isa) : -1);
}

bool narrow_dot_exact(int wa, int wb, std::size_t n) {
  if (wa > 32 || wb > 32) return false;
  // |a*b| <= 2^(wa+wb-2); n of them need ceil(log2 n) more bits.
  return wa + wb - 2 + ceil_log2(n) < 63;
}

std::int64_t dot_narrow(std::span<const std::int64_t> a,
                        std::span<const std::int64_t> b) {
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
#if defined(SSHDL_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::kAvx2) return avx2::dot_narrow(a.data(), b.data(), n);
#endif
  return scalar::dot_narrow(a.data(), b.data(), n);
}

double dot_f64(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
#if defined(SSHDL_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::kAvx2) return avx2::dot_f64(a.data(), b.data(), n);
#endif
  return scalar::dot_f64(a.data(), b.data(), n);
}

}  // namespace sshdl::kernels
