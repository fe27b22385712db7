#pragma once

#include <array>
#include <cstdint>
#include <cmath>

namespace iik {

// Counter-based generator (Philox4x32-10).  Streams are cheap: any
// (seed, stream) pair is an independent sequence, so samplers can be
// handed disjoint streams and replayed from a step index without
// carrying state around.  Manifests name this generator so cached
// dictionaries stay portable.
inline constexpr const char* kRngName = "philox4x32-10";

class Rng {
public:
    Rng() : Rng(0, 0) {}
    Rng(uint64_t seed, uint64_t stream) {
        key_[0] = static_cast<uint32_t>(seed);
        key_[1] = static_cast<uint32_t>(seed >> 32);
        ctr_ = {0u, 0u, static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)};
        have_ = 0;
    }

    uint32_t next_u32() {
        if (have_ == 0) {
            block_ = philox(ctr_, key_);
            bump_counter();
            have_ = 4;
        }
        return block_[4 - have_--];
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform double in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).  n must be >= 1.
    uint64_t uniform_int(uint64_t n) {
        // Rejection-free scaled multiply; bias is negligible for n << 2^64
        // but we reject to keep streams exactly reproducible and unbiased.
        uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool coin() { return (next_u32() & 1u) != 0; }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return cached_normal_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        cached_normal_ = r * std::sin(t);
        have_normal_ = true;
        return r * std::cos(t);
    }

private:
    static std::array<uint32_t, 4> philox(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
        constexpr uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
        constexpr uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            uint64_t p0 = static_cast<uint64_t>(kM0) * ctr[0];
            uint64_t p1 = static_cast<uint64_t>(kM1) * ctr[2];
            std::array<uint32_t, 4> next = {
                static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                static_cast<uint32_t>(p1),
                static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                static_cast<uint32_t>(p0),
            };
            ctr = next;
            key[0] += kW0;
            key[1] += kW1;
        }
        return ctr;
    }

    void bump_counter() {
        if (++ctr_[0] == 0 && ++ctr_[1] == 0) ++ctr_[2];
    }

    std::array<uint32_t, 2> key_;
    std::array<uint32_t, 4> ctr_;
    std::array<uint32_t, 4> block_{};
    int have_ = 0;
    bool have_normal_ = false;
    double cached_normal_ = 0.0;
};

// Stream ids used across the toolkit so independent consumers never share
// a sequence.  Composite streams fold a salt into the high bits.
namespace streams {
inline constexpr uint64_t kColorPool = 1;
inline constexpr uint64_t kAlbedoDict = 2;
inline constexpr uint64_t kShadingDict = 3;
inline constexpr uint64_t kRealDict = 4;
inline constexpr uint64_t kPerlin = 5;
inline constexpr uint64_t kMondrian = 6;
inline constexpr uint64_t kInit = 7;
inline constexpr uint64_t kTrainBatch = 8;
inline constexpr uint64_t kLayout = 9;
inline constexpr uint64_t kEval = 10;

inline uint64_t sub(uint64_t stream, uint64_t salt) {
    return stream ^ (salt * 0x9E3779B97F4A7C15ull + 0x100ull);
}
}  // namespace streams

}  // namespace iik
