#pragma once

// Counter-based normal variates: Philox4x32-10 (Salmon et al., SC'11) keyed by
// the run seed, with the counter holding (path index, step index). Any path
// can be generated independently of every other, so ensembles are identical
// for any partition of paths over threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace purify {

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
            const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Standard normal sequence for one path of one seeded run. Variates are
/// produced in Box-Muller pairs, one Philox block per pair of steps.
class PathNormalStream {
public:
    PathNormalStream(std::uint64_t seed, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, path_(path) {}

    /// The variate for `step`; a pure function of (seed, path, step).
    double normal(std::uint64_t step) {
        const std::uint64_t pair = step >> 1;
        if (pair != cached_pair_) {
            fill(pair);
            cached_pair_ = pair;
        }
        return cached_[step & 1];
    }

private:
    void fill(std::uint64_t pair) {
        const auto out = Philox4x32::block(
            {static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(pair >> 32),
             static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)},
            key_);
        constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
        const std::uint64_t a = (std::uint64_t{out[0]} << 32 | out[1]) >> 11;
        const std::uint64_t b = (std::uint64_t{out[2]} << 32 | out[3]) >> 11;
        const double u1 = (static_cast<double>(a) + 1.0) * kScale;  // (0, 1]
        const double u2 = static_cast<double>(b) * kScale;          // [0, 1)
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = {radius * std::cos(angle), radius * std::sin(angle)};
    }

    Philox4x32::Key key_;
    std::uint64_t path_;
    std::uint64_t cached_pair_ = ~std::uint64_t{0};
    std::array<double, 2> cached_{};
};

}  // namespace purify
