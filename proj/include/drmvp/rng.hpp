#pragma once
// Counter-based RNG (Philox4x32-10) with derived substreams.
// Every stochastic quantity in the project draws from a stream keyed by
// (seed, purpose, day, unit), so runs are bit-reproducible for a given seed
// regardless of evaluation order or thread count.

#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace drmvp {

namespace detail {

// splitmix64 finalizer, used to mix stream keys
inline uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

class Rng {
public:
    Rng(uint64_t seed, uint64_t stream = 0) {
        uint64_t key = detail::mix64(detail::mix64(seed) ^ detail::mix64(stream * 0xD1342543DE82EF95ULL + 1));
        key_[0] = static_cast<uint32_t>(key);
        key_[1] = static_cast<uint32_t>(key >> 32);
        ctr_[0] = ctr_[1] = ctr_[2] = ctr_[3] = 0;
        buf_pos_ = 4;
        have_spare_ = false;
    }

    // independent generator for a labelled sub-task (e.g. purpose, day, path)
    Rng substream(uint64_t a, uint64_t b = 0) const {
        uint64_t key = (uint64_t(key_[1]) << 32) | key_[0];
        uint64_t derived = detail::mix64(key ^ detail::mix64(a * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL))
                         ^ detail::mix64(b * 0xC2B2AE3D27D4EB4FULL + 0x9E6C63D0876A9F4BULL);
        Rng r(0, 0);
        derived = detail::mix64(derived);
        r.key_[0] = static_cast<uint32_t>(derived);
        r.key_[1] = static_cast<uint32_t>(derived >> 32);
        r.ctr_[0] = r.ctr_[1] = r.ctr_[2] = r.ctr_[3] = 0;
        r.buf_pos_ = 4;
        r.have_spare_ = false;
        return r;
    }

    uint32_t next_u32() {
        if (buf_pos_ >= 4) refill();
        return buf_[buf_pos_++];
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // uniform on (0,1), never exactly 0 or 1
    double uniform() {
        uint64_t x = next_u64() >> 11;
        return (static_cast<double>(x) + 0.5) * 0x1.0p-53;
    }

    // standard normal via Box-Muller, second deviate cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Poisson count by Knuth's product method; fine for the small means used here
    int poisson(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("poisson: negative mean");
        if (lambda == 0.0) return 0;
        if (lambda > 50.0) {
            // split to keep the product away from underflow
            int half = poisson(lambda / 2.0);
            return half + poisson(lambda - lambda / 2.0);
        }
        double limit = std::exp(-lambda);
        double prod = uniform();
        int k = 0;
        while (prod > limit) {
            prod *= uniform();
            ++k;
        }
        return k;
    }

    // raw block access, used by the known-answer tests
    static void philox4x32_10(const uint32_t key_in[2], const uint32_t ctr_in[4], uint32_t out[4]) {
        uint32_t k0 = key_in[0], k1 = key_in[1];
        out[0] = ctr_in[0]; out[1] = ctr_in[1]; out[2] = ctr_in[2]; out[3] = ctr_in[3];
        for (int round = 0; round < 10; ++round) {
            uint64_t p0 = uint64_t(0xD2511F53u) * out[0];
            uint64_t p1 = uint64_t(0xCD9E8D57u) * out[2];
            uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
            uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
            uint32_t n0 = hi1 ^ out[1] ^ k0;
            uint32_t n1 = lo1;
            uint32_t n2 = hi0 ^ out[3] ^ k1;
            uint32_t n3 = lo0;
            out[0] = n0; out[1] = n1; out[2] = n2; out[3] = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
    }

private:
    void refill() {
        philox4x32_10(key_, ctr_, buf_);
        // 128-bit counter increment
        if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) ++ctr_[3];
        buf_pos_ = 0;
    }

    uint32_t key_[2];
    uint32_t ctr_[4];
    uint32_t buf_[4];
    int buf_pos_;
    bool have_spare_;
    double spare_ = 0.0;
};

} // namespace drmvp
