#pragma once

#include <cmath>
#include <cstdint>

namespace powersched {

// Counter-based random stream. Each stream is keyed by
// (master_seed, trial_index, substream) and produces a sequence that depends
// only on the key and the draw counter, so trials can run on any number of
// threads and still reproduce bit-identical results.
//
// The generator is the SplitMix64 output function applied to an
// avalanche-mixed key plus a Weyl counter.
class RandomStream {
  public:
    RandomStream(std::uint64_t master_seed, std::uint64_t trial_index,
                 std::uint64_t substream)
        : state_(derive_key(master_seed, trial_index, substream)) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1), 53-bit resolution.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe as a log() argument.
    double next_uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second variate of each pair is
    // cached so draws come in deterministic order.
    double next_gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = next_uniform_pos();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(t);
        has_cached_ = true;
        return r * std::cos(t);
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
        z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
        return z ^ (z >> 33);
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t trial,
                                    std::uint64_t substream) {
        std::uint64_t k = mix(seed + 0x9E3779B97F4A7C15ULL);
        k = mix(k ^ (trial + 0xD1B54A32D192ED03ULL));
        k = mix(k ^ (substream + 0x8CB92BA72F3D8DD7ULL));
        return k;
    }

    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Substream ids used by the simulator; fixed so that the same trial always
// consumes the same random numbers for the same purpose.
namespace substream {
inline constexpr std::uint64_t kInitialState = 0;
inline constexpr std::uint64_t kProcessNoise = 1;
inline constexpr std::uint64_t kAttack = 2;
inline constexpr std::uint64_t kDelivery = 3;
}  // namespace substream

}  // namespace powersched
