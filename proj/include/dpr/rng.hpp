// Seedable PRNG for deterministic simulation runs.
//
// xoshiro256** seeded through splitmix64, with explicit helpers for the
// only two draw shapes the simulator needs (unit doubles and Bernoulli
// trials). A draw counter is exposed so tests can assert that code paths
// which must stay RNG-neutral really consume nothing.

#ifndef DPR_RNG_HPP
#define DPR_RNG_HPP

#include <cstdint>

namespace dpr {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// splitmix64 scramble; used for seeding and for deriving substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += kGoldenGamma;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derive the seed of substream `stream` from a master seed. Documented
/// mixing rule: splitmix64(master XOR (stream+1)*golden-gamma).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ ((stream + 1) * kGoldenGamma));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        // Expand the 64-bit seed into the 256-bit state.
        std::uint64_t s = seed;
        for (auto& word : state_) {
            s = splitmix64(s);
            word = s;
        }
        draws_ = 0;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        ++draws_;
        return result;
    }

    /// Uniform double in [0, 1), 53 significant bits.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Bernoulli trial; always consumes exactly one draw.
    bool bernoulli(double p) { return unit() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    /// Number of raw draws consumed since construction/reseed.
    std::uint64_t draws() const { return draws_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    std::uint64_t draws_ = 0;
};

} // namespace dpr

#endif // DPR_RNG_HPP
