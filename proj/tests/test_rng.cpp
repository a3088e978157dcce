#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rankshift/rng.hpp"

using rankshift::Philox;
using rankshift::Rng;

// Published known-answer vectors for Philox4x32 with 10 rounds
// (Random123 distribution, kat_vectors file).
TEST_CASE("philox known answer vectors") {
  {
    const auto out = Philox::block({0u, 0u, 0u, 0u}, {0u, 0u});
    const std::array<std::uint32_t, 4> want{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u};
    CHECK(out == want);
  }
  {
    const auto out = Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                   {0xffffffffu, 0xffffffffu});
    const std::array<std::uint32_t, 4> want{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu};
    CHECK(out == want);
  }
  {
    const auto out = Philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                   {0xa4093822u, 0x299f31d0u});
    const std::array<std::uint32_t, 4> want{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u};
    CHECK(out == want);
  }
}

TEST_CASE("word packing and uniform scaling follow from the block output") {
  // Seed 0 means key {0,0}; the first block is the zero-counter KAT block.
  Philox gen(0);
  const std::uint64_t first = gen.next_u64();
  CHECK(first == (0x6627e8d5ull | (0xe169c58dull << 32)));
  const std::uint64_t second = gen.next_u64();
  CHECK(second == (0xbc57ac4cull | (0x9b00dbd8ull << 32)));

  Rng rng(0);
  CHECK(rng.uniform01() == static_cast<double>((0x6627e8d5ull | (0xe169c58dull << 32)) >> 11) * 0x1.0p-53);
}

TEST_CASE("streams are reproducible and seed-dependent") {
  Rng a(12345), b(12345), c(54321);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double xa = a.uniform01();
    const double xb = b.uniform01();
    const double xc = c.uniform01();
    all_equal = all_equal && (xa == xb);
    any_diff = any_diff || (xa != xc);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
  Rng rng(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("below is unbiased over small ranges") {
  Rng rng(42);
  std::vector<int> counts(5, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.below(5)];
  for (const int c : counts) {
    CHECK(std::abs(c / static_cast<double>(n) - 0.2) < 0.01);
  }
  CHECK_THROWS(rng.below(0));
}

TEST_CASE("moment sanity for the pinned distributions") {
  Rng rng(2026);
  const int n = 200000;

  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sumsq / n - 1.0) < 0.02);

  sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.exponential(2.0);
  CHECK(std::abs(sum / n - 0.5) < 0.005);

  // Cauchy has no mean; check the median and symmetry through sign counts.
  int pos = 0;
  for (int i = 0; i < n; ++i) pos += rng.t1() > 0.0 ? 1 : 0;
  CHECK(std::abs(pos / static_cast<double>(n) - 0.5) < 0.01);

  // t with 3 df has variance 3 but heavy tails; allow a loose band.
  sum = 0.0;
  sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.t3();
    sum += x;
    sumsq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sumsq / n - 3.0) < 0.5);
}

TEST_CASE("exponential rejects a non-positive rate") {
  Rng rng(1);
  CHECK_THROWS(rng.exponential(0.0));
  CHECK_THROWS(rng.exponential(-1.0));
}
