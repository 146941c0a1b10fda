// mftl: counter-based (Philox4x32-10) random streams.
//
// Every random draw in the toolkit is a pure function of
// (seed, stream tag, step, atom, draw index), so results are independent of
// thread count and evaluation order by construction.
// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cstdint>

namespace mftl {

/// Stream tags partition the 32-bit namespace so unrelated consumers of the
/// same seed never collide.
enum class StreamTag : std::uint32_t {
    prior_sample = 1,    // i.i.d. prior draws (cloud initialization)
    langevin_noise = 2,  // per-(step, atom) Euler-Maruyama noise
    data_x = 3,          // task inputs
    data_noise = 4,      // label noise
    teacher = 5,         // teacher cloud construction
    dictionary = 6,      // IPM dictionary (u_k, b_k)
    kl_mc = 7,           // Monte-Carlo KL draws
    stage2_init = 8,     // fine-tune stage-2 a-cloud initialization
    minibatch = 9,       // minibatch index selection
    seed_derive = 10,    // seed derivation for replicates / cells
    test_data = 11,      // held-out evaluation sets
    generic = 12,        // tests and miscellaneous consumers
};

/// Raw Philox4x32-10 block function: 128-bit counter, 64-bit key -> 128 bits.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

/// A (seed, tag) pair naming an independent random stream.
struct RngStream {
    std::uint64_t seed = 0;
    StreamTag tag = StreamTag::generic;
};

/// Stateful view of one (stream, step, atom) substream. Cheap to construct;
/// consumption order within a substream is the only state (`idx`).
class SubRng {
  public:
    SubRng(RngStream stream, std::uint32_t step, std::uint32_t atom);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform on (0, 1] (53-bit; never exactly 0, so log() is safe).
    double uniform();

    /// Standard normal (Box-Muller; second value cached).
    double normal();

    /// Fills out[0..n) with i.i.d. standard normals.
    void normals(double* out, std::size_t n);

  private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint32_t tag_ = 0;
    std::uint32_t step_ = 0;
    std::uint32_t atom_ = 0;
    std::uint32_t idx_ = 0;  // next 128-bit block index
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 4;  // consumed position within buf_
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Deterministically derives a child seed from (seed, a, b, c); used for
/// per-replicate / per-cell seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace mftl
