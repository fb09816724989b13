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

#include "sshdl/fixed_point.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace sshdl {

namespace {

constexpr int128 kInt128Min = -(int128{1} << 126) * 2;

double int128_to_double(int128 v) {
  // Split to keep the conversion correctly rounded for |v| >= 2^64.
  const bool neg = v < 0;
  uint128 mag = neg ? uint128(0) - uint128(v) : uint128(v);
  double hi = static_cast<double>(static_cast<std::uint64_t>(mag >> 64));
  double lo = static_cast<double>(static_cast<std::uint64_t>(mag));
  double r = std::ldexp(hi, 64) + lo;
  return neg ? -r : r;
}

int256 round_shift_right(const int256& v, int s) {
  // Round half away from zero.
  if (s <= 0) return v;
  const bool neg = v < 0;
  int256 mag = neg ? int256(-v) : v;
  if (s >= 255) return 0;
  mag = (mag + (int256(1) << (s - 1))) >> s;
  return neg ? int256(-mag) : mag;
}

}  // namespace

double FixedPointFormat::resolution() const {
  return std::ldexp(1.0, -frac_length);
}
double FixedPointFormat::min_value() const {
  return std::ldexp(-1.0, word_length - 1 - frac_length);
}
double FixedPointFormat::max_value() const {
  return int128_to_double(max_raw()) * resolution();
}
std::string FixedPointFormat::to_string() const {
  return fmt::format("Q(w{},n{})", word_length, frac_length);
}

FixedPointFormat make_format(int word_length, int frac_length) {
  FixedPointFormat f{word_length, frac_length};
  if (!f.valid()) {
    throw std::invalid_argument(
        fmt::format("invalid fixed-point format: word {} frac {}",
                    word_length, frac_length));
  }
  return f;
}

double FpValue::real() const {
  return std::ldexp(int128_to_double(raw), -format.frac_length);
}

int128 saturate(int128 raw, const FixedPointFormat& fmt) {
  if (raw < fmt.min_raw()) return fmt.min_raw();
  if (raw > fmt.max_raw()) return fmt.max_raw();
  return raw;
}

int128 saturate(const int256& raw, const FixedPointFormat& fmt) {
  if (raw < int256(fmt.min_raw())) return fmt.min_raw();
  if (raw > int256(fmt.max_raw())) return fmt.max_raw();
  return static_cast<int128>(raw);
}

int128 wrap_signed(int128 raw, int width) {
  if (width >= 128) return raw;
  const uint128 mask = (uint128(1) << width) - 1;
  uint128 u = uint128(raw) & mask;
  if (u >> (width - 1)) u |= ~mask;
  return static_cast<int128>(u);
}

uint128 wrap_unsigned(int128 raw, int width) {
  if (width >= 128) return uint128(raw);
  return uint128(raw) & ((uint128(1) << width) - 1);
}

FpValue quantize(double value, const FixedPointFormat& fmt) {
  FpValue out{0, fmt};
  if (std::isnan(value) || value == 0.0) return out;
  if (std::isinf(value)) {
    out.raw = value > 0 ? fmt.max_raw() : fmt.min_raw();
    return out;
  }
  int exp = 0;
  const double mant = std::frexp(value, &exp);
  // value = m * 2^(exp - 53) with |m| < 2^53, exactly.
  const auto m = static_cast<std::int64_t>(std::ldexp(mant, 53));
  const int shift = exp - 53 + fmt.frac_length;
  if (shift >= 0) {
    if (shift > 200) {
      out.raw = m > 0 ? fmt.max_raw() : fmt.min_raw();
      return out;
    }
    out.raw = saturate(int256(m) << shift, fmt);
  } else if (-shift > 60) {
    out.raw = 0;  // |value| * 2^n < 2^-7 rounds to zero
  } else {
    out.raw = saturate(round_shift_right(int256(m), -shift), fmt);
  }
  return out;
}

FpValue fp_mul(const FpValue& a, const FpValue& b) {
  const FixedPointFormat f{a.format.word_length + b.format.word_length,
                           a.format.frac_length + b.format.frac_length};
  if (!f.valid()) {
    throw std::invalid_argument(
        fmt::format("product format {} exceeds {} bits", f.to_string(),
                    kMaxWordLength));
  }
  return FpValue{a.raw * b.raw, f};
}

FpValue fp_add(const FpValue& a, const FpValue& b,
               const FixedPointFormat& out_fmt) {
  const int frac = std::max(a.format.frac_length, b.format.frac_length);
  int256 sum = int256(a.raw) << (frac - a.format.frac_length);
  sum += int256(b.raw) << (frac - b.format.frac_length);
  return FpValue{rescale_raw(sum, frac, out_fmt), out_fmt};
}

FpValue requantize(const FpValue& v, const FixedPointFormat& fmt) {
  return FpValue{rescale_raw(v.raw, v.format.frac_length, fmt), fmt};
}

int128 rescale_raw(int128 raw, int frac_from, const FixedPointFormat& fmt) {
  const int s = frac_from - fmt.frac_length;
  if (s == 0) return saturate(raw, fmt);
  if (s > 0 && s < 127 && raw != kInt128Min) {
    const bool neg = raw < 0;
    uint128 mag = neg ? uint128(-raw) : uint128(raw);
    mag = (mag + (uint128(1) << (s - 1))) >> s;
    const int128 r = static_cast<int128>(mag);
    return saturate(neg ? -r : r, fmt);
  }
  return rescale_raw(int256(raw), frac_from, fmt);
}

int128 rescale_raw(const int256& raw, int frac_from,
                   const FixedPointFormat& fmt) {
  const int s = frac_from - fmt.frac_length;
  if (s >= 0) return saturate(round_shift_right(raw, s), fmt);
  if (raw == 0) return 0;
  if (-s > 128) return raw > 0 ? fmt.max_raw() : fmt.min_raw();
  // Keep raw << -s inside 256 bits; anything this large saturates anyway.
  const int256 big = int256(1) << 127;
  if (raw >= big) return fmt.max_raw();
  if (raw <= -big) return fmt.min_raw();
  return saturate(int256(raw << -s), fmt);
}

int ceil_log2(std::uint64_t n) {
  int bits = 0;
  while ((std::uint64_t{1} << bits) < n) ++bits;
  return bits;
}

}  // namespace sshdl
