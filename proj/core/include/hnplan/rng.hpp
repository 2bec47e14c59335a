#pragma once

#include <array>
#include <cstdint>

namespace hnplan::rng {

// Domain separation tags; each (seed, tag, a, b) tuple names one stream.
enum class Tag : std::uint32_t {
  kSceneGen = 1,
  kExpert = 2,
  kGeneratorInit = 3,
  kGeneratorShuffle = 4,
  kFlowDraw = 5,
  kSample = 6,
  kPolicyInit = 7,
  kPolicyShuffle = 8,
  kTest = 100,
};

// Counter-based stream (Philox-4x32-10, Salmon et al. SC'11). 128 bits of
// key material are derived by hashing (global_seed, tag, a, b); the 64-bit
// block counter advances as values are drawn. Identical tuples replay the
// identical sequence no matter how other streams are interleaved, which is
// what makes parallel and sequential pipelines bit-identical.
class Stream {
 public:
  Stream(std::uint64_t global_seed, Tag tag, std::uint64_t a = 0, std::uint64_t b = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via Box-Muller over two uniforms (cosine branch).
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_lo_{};
  std::array<std::uint32_t, 2> key_hi_{};  // occupies counter words 2..3
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
};

}  // namespace hnplan::rng
