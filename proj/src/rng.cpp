// mftl: counter-based (Philox4x32-10) random streams.
// SPDX-License-Identifier: MIT
#include "mftl/rng.hpp"

#include <cmath>

namespace mftl {

namespace {

constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85u;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo,
                      std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mul_hi_lo(kPhiloxM4x32A, ctr[0], lo0, hi0);
    mul_hi_lo(kPhiloxM4x32B, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
    std::array<std::uint32_t, 4> ctr = counter;
    std::array<std::uint32_t, 2> k = key;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kPhiloxW32A;
            k[1] += kPhiloxW32B;
        }
        philox_round(ctr, k);
    }
    return ctr;
}

SubRng::SubRng(RngStream stream, std::uint32_t step, std::uint32_t atom)
    : key_{static_cast<std::uint32_t>(stream.seed),
           static_cast<std::uint32_t>(stream.seed >> 32)},
      tag_(static_cast<std::uint32_t>(stream.tag)),
      step_(step),
      atom_(atom) {}

void SubRng::refill() {
    buf_ = philox4x32({idx_, atom_, step_, tag_}, key_);
    ++idx_;
    buf_pos_ = 0;
}

std::uint32_t SubRng::next_u32() {
    if (buf_pos_ >= 4) refill();
    return buf_[buf_pos_++];
}

std::uint64_t SubRng::next_u64() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
}

double SubRng::uniform() {
    // 53 random bits -> (0, 1]: the +1 offset excludes exactly 0.
    const std::uint64_t bits = next_u64() >> 11;
    return static_cast<double>(bits + 1) * 0x1.0p-53;
}

double SubRng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(phi);
    has_cached_normal_ = true;
    return r * std::cos(phi);
}

void SubRng::normals(double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = normal();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                              static_cast<std::uint32_t>(seed >> 32)};
    // Two blocks fold all 192 input bits of (a, b, c) into the counter.
    const auto block1 =
        philox4x32({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(StreamTag::seed_derive)},
                   key);
    const auto block2 = philox4x32(
        {block1[0] ^ static_cast<std::uint32_t>(b >> 32),
         block1[1] ^ static_cast<std::uint32_t>(c),
         block1[2] ^ static_cast<std::uint32_t>(c >> 32), block1[3]},
        key);
    return (static_cast<std::uint64_t>(block2[0]) << 32) | block2[1];
}

}  // namespace mftl
