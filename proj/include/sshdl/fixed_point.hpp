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

#ifndef SSHDL_FIXED_POINT_HPP_
#define SSHDL_FIXED_POINT_HPP_

#include <cstdint>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace sshdl {

using int128 = __int128;
using uint128 = unsigned __int128;
using int256 = boost::multiprecision::int256_t;

// Largest word length an FpValue may carry. Raw values live in a signed
// 128-bit integer, so widened products of two 63-bit operands still fit.
inline constexpr int kMaxWordLength = 127;

// Signed two's complement Q-format descriptor. A default-constructed format
// (word_length 0) is invalid and stands for "not assigned".
struct FixedPointFormat {
  int word_length = 0;
  int frac_length = 0;

  bool valid() const {
    return word_length >= 2 && word_length <= kMaxWordLength &&
           frac_length >= 0 && frac_length <= word_length - 1;
  }
  int128 min_raw() const { return -(int128{1} << (word_length - 1)); }
  int128 max_raw() const { return (int128{1} << (word_length - 1)) - 1; }
  double resolution() const;
  double min_value() const;
  double max_value() const;
  std::string to_string() const;

  friend bool operator==(const FixedPointFormat&,
                         const FixedPointFormat&) = default;
};

// Throws std::invalid_argument unless 2 <= word <= 127 and 0 <= frac < word.
FixedPointFormat make_format(int word_length, int frac_length);

// Raw two's complement integer tagged with its format. Construction through
// the factory functions below never yields a raw outside the format range.
struct FpValue {
  int128 raw = 0;
  FixedPointFormat format;

  // Exact when frac_length <= 1074 and |raw| < 2^53; otherwise rounded by
  // the double conversion.
  double real() const;

  friend bool operator==(const FpValue&, const FpValue&) = default;
};

// Saturates raw into fmt. Not a rounding step: raw is already at fmt scale.
int128 saturate(int128 raw, const FixedPointFormat& fmt);
int128 saturate(const int256& raw, const FixedPointFormat& fmt);

// Wraps raw into a word_length-bit two's complement value (Verilog
// assignment truncation).
int128 wrap_signed(int128 raw, int width);
uint128 wrap_unsigned(int128 raw, int width);

// Round-to-nearest, ties away from zero, then saturate. Total on finite
// inputs; NaN maps to 0 and infinities saturate.
FpValue quantize(double value, const FixedPointFormat& fmt);

// Exact product in (w_a + w_b, n_a + n_b). Throws std::invalid_argument when
// the widened word would exceed kMaxWordLength.
FpValue fp_mul(const FpValue& a, const FpValue& b);

// Exact aligned sum, then rounded (only if out_fmt has fewer fractional
// bits) and saturated into out_fmt.
FpValue fp_add(const FpValue& a, const FpValue& b,
               const FixedPointFormat& out_fmt);

// Equals quantize(real(v), fmt) computed without going through a double.
FpValue requantize(const FpValue& v, const FixedPointFormat& fmt);

// Rescales a raw integer from frac_from fractional bits to fmt: rounds half
// away from zero when dropping bits, saturates to the fmt range. This is the
// single narrowing primitive shared by the simulators and the netlist.
int128 rescale_raw(int128 raw, int frac_from, const FixedPointFormat& fmt);
int128 rescale_raw(const int256& raw, int frac_from,
                   const FixedPointFormat& fmt);

// ceil(log2(n)) for n >= 1; number of guard bits needed to add n terms.
int ceil_log2(std::uint64_t n);

}  // namespace sshdl

#endif  // SSHDL_FIXED_POINT_HPP_
