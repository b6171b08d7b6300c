#pragma once

// Counter-based random streams. Every replicate owns the stream keyed by the
// master seed with the replicate index in the high counter words, so draws do
// not depend on which worker runs the replicate.
//
// Generator: Philox4x32 with 10 rounds (Salmon et al., SC'11).
// Uniforms: top 53 bits of a 64-bit word, mapped to the open interval (0, 1).
// Normals: Box-Muller, trigonometric form; one 128-bit block yields two variates.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>

namespace gffx {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Independent stream for (master_seed, stream_index).
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : key_{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)},
        stream_(stream_index) {}

  std::uint64_t master_seed() const { return static_cast<std::uint64_t>(key_[1]) << 32 | key_[0]; }
  std::uint64_t stream_index() const { return stream_; }
  std::uint64_t blocks_used() const { return block_; }

  /// Next raw 128-bit block as two 64-bit words.
  std::array<std::uint64_t, 2> next_block() {
    Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    ++block_;
    const auto out = Philox4x32::block(ctr, key_);
    return {static_cast<std::uint64_t>(out[1]) << 32 | out[0], static_cast<std::uint64_t>(out[3]) << 32 | out[2]};
  }

  static double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform() {
    if (have_uniform_) {
      have_uniform_ = false;
      return spare_uniform_;
    }
    const auto b = next_block();
    spare_uniform_ = to_open_unit(b[1]);
    have_uniform_ = true;
    return to_open_unit(b[0]);
  }

  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return spare_normal_;
    }
    const auto b = next_block();
    const double u1 = to_open_unit(b[0]);
    const double u2 = to_open_unit(b[1]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    have_normal_ = true;
    return radius * std::cos(angle);
  }

  void fill_normal(std::span<double> out) {
    for (auto& x : out) x = normal();
  }

  /// Uniform integer in [0, n) by rejection on 64-bit words.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    while (true) {
      const auto b = next_block();
      if (b[0] < limit) return b[0] % n;
      if (b[1] < limit) return b[1] % n;
    }
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  bool have_normal_ = false;
  double spare_normal_ = 0.0;
  bool have_uniform_ = false;
  double spare_uniform_ = 0.0;
};

}  // namespace gffx
