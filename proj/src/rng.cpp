#include "rankshift/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace rankshift {

namespace {

constexpr std::uint32_t kMult0 = 0xD2511F53u;
constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
constexpr std::uint32_t kBump0 = 0x9E3779B9u;  // golden ratio fraction
constexpr std::uint32_t kBump1 = 0xBB67AE85u;  // sqrt(3) fraction

inline void round_once(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMult0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMult1) * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> Philox::block(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kBump0;
      key[1] += kBump1;
    }
    round_once(counter, key);
  }
  return counter;
}

void Philox::refill() {
  buf_ = block(counter_, key_);
  pos_ = 0;
  for (auto& w : counter_) {
    if (++w != 0) break;  // 128-bit increment with carry
  }
}

std::uint64_t Philox::next_u64() {
  if (pos_ > 2) refill();
  const std::uint64_t lo = buf_[pos_];
  const std::uint64_t hi = buf_[pos_ + 1];
  pos_ += 2;
  return lo | (hi << 32);
}

double Rng::uniform01() {
  // Top 53 bits scaled by 2^-53; values lie in [0, 1).
  return static_cast<double>(gen_.next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) {
  return a + (b - a) * uniform01();
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  const std::uint64_t limit = ~static_cast<std::uint64_t>(0) - (~static_cast<std::uint64_t>(0) % n + 1) % n;
  for (;;) {
    const std::uint64_t x = gen_.next_u64();
    if (x <= limit) return x % n;
  }
}

double Rng::normal() {
  // Box-Muller, cosine branch only. u1 is shifted into (0, 1] so the log is
  // finite; two uniforms are consumed per call regardless of the draw.
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("Rng::exponential: rate must be positive");
  const double u = 1.0 - uniform01();  // in (0, 1]
  return -std::log(u) / rate;
}

double Rng::t1() {
  for (;;) {
    const double numer = normal();
    const double denom = normal();
    if (denom != 0.0) return numer / denom;
  }
}

double Rng::t3() {
  const double x = normal();
  const double c1 = normal();
  const double c2 = normal();
  const double c3 = normal();
  const double chisq = c1 * c1 + c2 * c2 + c3 * c3;
  return x / std::sqrt(chisq / 3.0);
}

}  // namespace rankshift
