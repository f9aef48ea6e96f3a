#ifndef QFC_RNG_HPP
#define QFC_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

// Counter-based RNG (Philox4x32-10) with per-stream keys derived from a
// 64-bit master seed and a stream index. Streams are statistically
// independent and each stream's output is a pure function of (seed, index,
// draw position), which is what makes parallel ensembles bit-reproducible
// for any worker count.

namespace qfc {

struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
            const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
            const std::array<std::uint32_t, 4> next = {
                std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0],
                std::uint32_t(p1),
                std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1],
                std::uint32_t(p0),
            };
            ctr = next;
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

// Standard-normal stream via Box-Muller on 53-bit uniforms. Box-Muller is
// rejection-free, so the draw count per block is fixed and the stream
// position is deterministic.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream_index)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          prefix_{std::uint32_t(stream_index), std::uint32_t(stream_index >> 32)} {}

    double next() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const auto w = Philox4x32::block(
            {std::uint32_t(counter_), std::uint32_t(counter_ >> 32), prefix_[0], prefix_[1]},
            key_);
        ++counter_;
        const double u1 = to_unit_open(w[0], w[1]);   // (0, 1]
        const double u2 = to_unit_closed(w[2], w[3]); // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

private:
    static double to_unit_open(std::uint32_t lo, std::uint32_t hi) {
        const std::uint64_t v = ((std::uint64_t(hi) << 32) | lo) >> 11;
        return double(v + 1) * 0x1p-53;
    }
    static double to_unit_closed(std::uint32_t lo, std::uint32_t hi) {
        const std::uint64_t v = ((std::uint64_t(hi) << 32) | lo) >> 11;
        return double(v) * 0x1p-53;
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 2> prefix_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace qfc

#endif
