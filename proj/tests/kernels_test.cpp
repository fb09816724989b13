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

#include "sshdl/kernels.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

namespace sshdl::kernels {
namespace {

std::vector<std::int64_t> narrow_vector(std::mt19937_64& rng, std::size_t n, int bits) {
  std::vector<std::int64_t> v(n);
  const std::int64_t half = std::int64_t{1} << (bits - 1);
  for (auto& x : v) x = static_cast<std::int64_t>(rng() % (2 * half)) - half;
  return v;
}

class IsaGuard {
 public:
  ~IsaGuard() { set_isa_override(std::nullopt); }
};

TEST(Kernels, ScalarIsAlwaysSupported) {
  EXPECT_TRUE(isa_supported(Isa::kScalar));
  EXPECT_EQ(isa_name(Isa::kScalar), "scalar");
}

TEST(Kernels, NarrowExactness) {
  EXPECT_TRUE(narrow_dot_exact(16, 16, 1000));
  EXPECT_TRUE(narrow_dot_exact(32, 32, 1));
  EXPECT_FALSE(narrow_dot_exact(33, 8, 1));
  EXPECT_FALSE(narrow_dot_exact(32, 32, 4));
}

TEST(Kernels, ScalarDotMatchesHandSums) {
  const std::int64_t a[] = {1, -2, 3, -4, 5};
  const std::int64_t b[] = {7, 7, -7, -7, 1};
  EXPECT_EQ(scalar::dot_narrow(a, b, 5), 7 - 14 - 21 + 28 + 5);
  const double x[] = {0.5, 0.25};
  const double y[] = {2.0, 4.0};
  EXPECT_EQ(scalar::dot_f64(x, y, 2), 2.0);
  EXPECT_EQ(scalar::dot_narrow(a, b, 0), 0);
}

TEST(Kernels, Avx2NarrowIsBitExact) {
  if (!isa_supported(Isa::kAvx2)) GTEST_SKIP() << "host has no AVX2";
  std::mt19937_64 rng(3);
  for (std::size_t n = 0; n < 67; ++n) {
    for (int bits : {2, 8, 16, 24, 32}) {
      const auto a = narrow_vector(rng, n, bits);
      const auto b = narrow_vector(rng, n, std::min(bits, 30));
      ASSERT_EQ(avx2::dot_narrow(a.data(), b.data(), n), scalar::dot_narrow(a.data(), b.data(), n))
          << "n " << n << " bits " << bits;
    }
  }
}

TEST(Kernels, Avx2NarrowExtremes) {
  if (!isa_supported(Isa::kAvx2)) GTEST_SKIP() << "host has no AVX2";
  const std::int64_t lo = -(std::int64_t{1} << 31);
  const std::int64_t hi = (std::int64_t{1} << 31) - 1;
  std::vector<std::int64_t> a = {lo, hi, lo, hi, -1, 0, lo};
  std::vector<std::int64_t> b = {lo, lo, 1, hi, lo, hi, -1};
  EXPECT_EQ(avx2::dot_narrow(a.data(), b.data(), 2), scalar::dot_narrow(a.data(), b.data(), 2));
  EXPECT_EQ(avx2::dot_narrow(a.data() + 2, b.data() + 2, 5),
            scalar::dot_narrow(a.data() + 2, b.data() + 2, 5));
}

TEST(Kernels, Avx2F64AgreesToRounding) {
  if (!isa_supported(Isa::kAvx2)) GTEST_SKIP() << "host has no AVX2";
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::size_t n = 0; n < 70; ++n) {
    std::vector<double> a(n), b(n);
    double mag = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = dist(rng);
      b[i] = dist(rng);
      mag += std::abs(a[i] * b[i]);
    }
    EXPECT_NEAR(avx2::dot_f64(a.data(), b.data(), n), scalar::dot_f64(a.data(), b.data(), n),
                1e-15 * (mag + 1) * static_cast<double>(n + 1));
  }
}

TEST(Kernels, DispatchFollowsOverride) {
  IsaGuard guard;
  std::mt19937_64 rng(5);
  const auto a = narrow_vector(rng, 33, 16);
  const auto b = narrow_vector(rng, 33, 16);
  set_isa_override(Isa::kScalar);
  EXPECT_EQ(active_isa(), Isa::kScalar);
  const std::int64_t s = dot_narrow(a, b);
  if (isa_supported(Isa::kAvx2)) {
    set_isa_override(Isa::kAvx2);
    EXPECT_EQ(active_isa(), Isa::kAvx2);
    EXPECT_EQ(dot_narrow(a, b), s);
  } else {
    EXPECT_THROW(set_isa_override(Isa::kAvx2), std::invalid_argument);
  }
  set_isa_override(std::nullopt);
  EXPECT_EQ(dot_narrow(a, b), s);
}

}  // namespace
}  // namespace sshdl::kernels
