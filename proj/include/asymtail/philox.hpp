#pragma once

#include <array>
#include <cstdint>

namespace asymtail {

// Philox4x32-10 counter-based generator. A stream is (key, counter); streams
// keyed by replication index are independent and reproducible regardless of
// how replications are partitioned across workers.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0, 0, static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)},
          idx_(4) {}

    std::uint32_t next_u32() noexcept {
        if (idx_ == 4) {
            block_ = round10(ctr_, key_);
            bump();
            idx_ = 0;
        }
        return block_[idx_++];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // uniform on (0,1]; never 0, so -log(u) is always finite
    double next_uniform() noexcept {
        const std::uint64_t bits = next_u64() >> 11;  // 53 bits
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    // uniform on (-1,1) excluding 0 is not needed; standard open (0,1)
    double next_uniform_open() noexcept {
        const std::uint64_t bits = next_u64() >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

private:
    using vec4 = std::array<std::uint32_t, 4>;
    using key2 = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    static vec4 round10(vec4 c, key2 k) noexcept {
        for (int r = 0; r < 10; ++r) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(kM0, c[0], hi0, lo0);
            mulhilo(kM1, c[2], hi1, lo1);
            c = vec4{hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
            k[0] += kW0;
            k[1] += kW1;
        }
        return c;
    }

    void bump() noexcept {
        if (++ctr_[0] == 0) ++ctr_[1];
    }

    key2 key_;
    vec4 ctr_;
    vec4 block_{};
    int idx_;
};

}  // namespace asymtail
