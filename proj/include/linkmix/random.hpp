#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace linkmix {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The 64-bit
// seed is the key; the 64-bit stream id and a 64-bit block index form the
// counter. Distinct streams are statistically independent and every draw is
// a pure function of (seed, stream, position), so output does not depend on
// platform or on how work is split across threads.
class Philox {
public:
    using result_type = std::uint32_t;

    Philox(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ == 4) {
            block_ = generate(block_index_++);
            pos_ = 0;
        }
        return block_[pos_++];
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() {
        const std::uint64_t hi = (*this)() >> 5;  // 27 bits
        const std::uint64_t lo = (*this)() >> 6;  // 26 bits
        return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
    }

    // Uniform on (0, 1].
    double uniform_open_zero() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential() { return -std::log(uniform_open_zero()); }

    // Index k drawn with probability weights[k] / sum(weights).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        const double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            acc += weights[k];
            if (u < acc) return k;
        }
        // u landed in rounding slack: return the last state with positive weight
        for (std::size_t k = weights.size(); k-- > 0;)
            if (weights[k] > 0.0) return k;
        return weights.size() - 1;
    }

    std::vector<double> dirichlet_ones(std::size_t K) {
        std::vector<double> g(K);
        double sum = 0.0;
        for (auto& v : g) sum += (v = exponential());
        for (auto& v : g) v /= sum;
        return g;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    using Block = std::array<std::uint32_t, 4>;

    // The raw bijection: ten rounds over a 128-bit counter with a 64-bit key.
    static Block philox4x32_10(Block ctr, std::uint32_t k0, std::uint32_t k1) {
        constexpr std::uint32_t kM0 = 0xD2511F53, kM1 = 0xCD9E8D57;
        constexpr std::uint32_t kW0 = 0x9E3779B9, kW1 = 0xBB67AE85;
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, hi1;
            const std::uint32_t lo0 = mulhilo(kM0, ctr[0], hi0);
            const std::uint32_t lo1 = mulhilo(kM1, ctr[2], hi1);
            ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
            k0 += kW0;
            k1 += kW1;
        }
        return ctr;
    }

private:

    static std::uint32_t mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi) {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        return static_cast<std::uint32_t>(p);
    }

    Block generate(std::uint64_t index) const {
        return philox4x32_10({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                              static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                             static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32));
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_index_ = 0;
    Block block_{};
    int pos_ = 4;
};

// Stream id for replicate `replicate` of experiment cell `cell`.
inline std::uint64_t replicate_stream(std::uint64_t cell, std::uint64_t replicate) {
    return (cell << 32) ^ replicate;
}

} // namespace linkmix
