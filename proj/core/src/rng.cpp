#include "hnplan/rng.hpp"

#include <cmath>

namespace hnplan::rng {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
  std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  std::array<std::uint32_t, 4> out;
  out[0] = static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
  out[1] = static_cast<std::uint32_t>(p1);
  out[2] = static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
  out[3] = static_cast<std::uint32_t>(p0);
  ctr = out;
  key[0] += kPhiloxW0;
  key[1] += kPhiloxW1;
}

}  // namespace

Stream::Stream(std::uint64_t global_seed, Tag tag, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(global_seed ^ 0x8F1BBCDCBFA53E0Bull);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  std::uint64_t k0 = h;
  std::uint64_t k1 = mix64(h);
  key_lo_ = {static_cast<std::uint32_t>(k0), static_cast<std::uint32_t>(k0 >> 32)};
  key_hi_ = {static_cast<std::uint32_t>(k1), static_cast<std::uint32_t>(k1 >> 32)};
}

void Stream::refill() {
  std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter_),
      static_cast<std::uint32_t>(counter_ >> 32),
      key_hi_[0],
      key_hi_[1],
  };
  std::array<std::uint32_t, 2> key = key_lo_;
  for (int round = 0; round < 10; ++round) philox_round(ctr, key);
  block_ = ctr;
  block_pos_ = 0;
  ++counter_;
}

std::uint32_t Stream::next_u32() {
  if (block_pos_ >= 4) refill();
  return block_[block_pos_++];
}

std::uint64_t Stream::next_u64() {
  std::uint64_t lo = next_u32();
  std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double Stream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t Stream::uniform_index(std::uint64_t n) {
  if (n <= 1) return 0;
  // Rejection to kill modulo bias; loop terminates quickly for any n.
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Stream::normal() {
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace hnplan::rng
