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

#ifndef SSHDL_KERNELS_HPP_
#define SSHDL_KERNELS_HPP_

// Inner-loop kernels shared by the simulators. Every kernel has a scalar
// reference implementation; SIMD variants are selected at runtime from the
// host CPU and must agree with the scalar one (bit-exactly for the integer
// kernels).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace sshdl::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);

// Best supported ISA unless an override is installed.
Isa active_isa();

// Forces an ISA for the whole process (tests and benchmarks). Passing an
// unsupported ISA throws std::invalid_argument; nullopt restores detection.
void set_isa_override(std::optional<Isa> isa);

// True when dot_narrow over n terms of wa-bit by wb-bit operands is exact:
// both operands fit in 32 bits and the sum of products fits in int64.
bool narrow_dot_exact(int wa, int wb, std::size_t n);

// Exact integer dot product. Preconditions (unchecked): every element fits
// in a signed 32-bit integer and the exact result fits in int64.
std::int64_t dot_narrow(std::span<const std::int64_t> a,
                        std::span<const std::int64_t> b);

// Double-precision dot product. SIMD variants sum in a different order, so
// results agree with the scalar kernel to rounding only.
double dot_f64(std::span<const double> a, std::span<const double> b);

namespace scalar {
std::int64_t dot_narrow(const std::int64_t* a, const std::int64_t* b,
                        std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
}  // namespace scalar

namespace avx2 {
std::int64_t dot_narrow(const std::int64_t* a, const std::int64_t* b,
                        std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
}  // namespace avx2

}  // namespace sshdl::kernels

#endif  // SSHDL_KERNELS_HPP_
