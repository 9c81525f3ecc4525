#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace refprior {

// Philox4x32-10 counter-based generator. Output depends only on
// (key, counter), so any (seed, stream, position) triple is reachable in
// O(1) without generating the preceding values.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  Philox4x32(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, 0, static_cast<std::uint32_t>(stream),
                 static_cast<std::uint32_t>(stream >> 32)} {}

  result_type operator()() noexcept {
    if (index_ == 4) {
      block_ = generate(counter_, key_);
      increment();
      index_ = 0;
    }
    return block_[index_++];
  }

  // Advances past `blocks` 128-bit blocks of the stream.
  void discard_blocks(std::uint64_t blocks) noexcept {
    std::uint64_t pos = (static_cast<std::uint64_t>(counter_[1]) << 32) | counter_[0];
    pos += blocks;
    counter_[0] = static_cast<std::uint32_t>(pos);
    counter_[1] = static_cast<std::uint32_t>(pos >> 32);
    index_ = 4;
  }

  static counter_type generate(counter_type ctr, key_type key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static counter_type single_round(const counter_type& c, const key_type& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  void increment() noexcept {
    if (++counter_[0] == 0) ++counter_[1];
  }

  key_type key_;
  counter_type counter_;
  counter_type block_{};
  int index_ = 4;
};

// SplitMix64 finalizer; used to fold several stream labels into one id.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_id(std::uint64_t a) noexcept { return mix64(a); }
constexpr std::uint64_t stream_id(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(mix64(a) ^ (b + 0x632BE59BD9B4E019ull));
}
constexpr std::uint64_t stream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
  return stream_id(stream_id(a, b), c);
}

// Seeded stream of variates with portable transforms (no std:: distributions,
// whose algorithms differ between standard libraries).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept : engine_(seed, stream) {}

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept {
    const std::uint64_t hi = engine_();
    const std::uint64_t lo = engine_();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  // Standard normal by Box-Muller; consumes exactly two uniforms per call.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential() noexcept { return -std::log(uniform()); }

  Philox4x32& engine() noexcept { return engine_; }

 private:
  Philox4x32 engine_;
};

}  // namespace refprior
