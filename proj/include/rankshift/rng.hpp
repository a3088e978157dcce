// Counter-based random number generation.
//
// Reproducibility contract: a seed fully determines every stream this library
// draws, independent of thread count, scheduling, and standard-library
// version. That rules out std::shuffle/std::normal_distribution (their
// algorithms are unspecified), so the generator and the distributions are
// pinned here.
#pragma once

#include <array>
#include <cstdint>

namespace rankshift {

// Philox4x32 with 10 rounds (Salmon et al. counter-based generator).
// The 64-bit key selects the stream; the counter advances per block.
class Philox {
public:
  explicit Philox(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~static_cast<result_type>(0); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();

  // One 128-bit block for a given counter value, as four 32-bit words.
  // Exposed for the known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

private:
  void refill();

  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;  // buffered 32-bit words already consumed
};

// Seeded stream of the variates the library needs. All algorithms are exact
// transforms of the Philox output, so equal seeds give equal streams forever.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01();
  // Uniform on [a, b).
  double uniform(double a, double b);
  // Uniform integer in [0, n), unbiased via rejection. n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (two uniforms per variate, no caching).
  double normal();
  // Exponential with the given rate (mean 1/rate).
  double exponential(double rate);
  // Standard Cauchy as a ratio of independent normals.
  double t1();
  // Student t with 3 degrees of freedom as normal over sqrt(chi-square_3 / 3).
  double t3();

private:
  Philox gen_;
};

}  // namespace rankshift
