#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mlmom {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
public:
    using ctr_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static ctr_type block(ctr_type c, key_type k) {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                k[0] += kW0;
                k[1] += kW1;
            }
            c = round(c, k);
        }
        return c;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

    static ctr_type round(const ctr_type& c, const key_type& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// A reproducible stream addressed by (seed, a, b, c); the last counter word walks blocks.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint32_t a, std::uint32_t b = 0, std::uint32_t c = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, ctr_{a, b, c, 0} {}

    std::uint32_t next_u32() {
        if (pos_ == 4) {
            buf_ = Philox4x32::block(ctr_, key_);
            ++ctr_[3];
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    /// Uniform in the open interval (0, 1) with 53 random bits.
    double uniform() {
        const std::uint64_t hi = next_u32(), lo = next_u32();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double ang = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(ang);
        has_spare_ = true;
        return r * std::cos(ang);
    }

private:
    Philox4x32::key_type key_;
    Philox4x32::ctr_type ctr_;
    Philox4x32::ctr_type buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mlmom
