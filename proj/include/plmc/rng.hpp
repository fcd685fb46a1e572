#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace plmc {

// Philox4x32-10 block function.
struct Philox4x32 {
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block ctr, Key key) {
        constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
        for (int r = 0; r < 10; ++r) {
            const std::uint64_t p0 = std::uint64_t(m0) * ctr[0];
            const std::uint64_t p1 = std::uint64_t(m1) * ctr[2];
            ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
                   std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
            key[0] += w0;
            key[1] += w1;
        }
        return ctr;
    }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Counter-based random stream. Draw number n is a pure function of
// (seed, stream id, n): slot n reads Philox block n/2, and normals are the
// Box-Muller pair built from that block (cosine branch for even n, sine for odd).
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    // Independent child stream, e.g. one per chain or repetition.
    RandomStream substream(std::uint64_t id) const {
        return RandomStream(seed_, splitmix64(stream_ ^ splitmix64(id + 0x632BE59BD9B4E019ull)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }
    std::uint64_t position() const { return pos_; }

    double normal() {
        const auto& b = block(pos_ / 2);
        const double u1 = to_unit_open_closed(b[0], b[1]);
        const double u2 = to_unit_closed_open(b[2], b[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        const double z = (pos_ % 2 == 0) ? r * std::cos(th) : r * std::sin(th);
        ++pos_;
        return z;
    }

    // Uniform on [0, 1).
    double uniform() {
        const auto& b = block(pos_ / 2);
        const double u = (pos_ % 2 == 0) ? to_unit_closed_open(b[0], b[1]) : to_unit_closed_open(b[2], b[3]);
        ++pos_;
        return u;
    }

    Eigen::VectorXd normal_vector(Eigen::Index d) {
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < d; ++i) z(i) = normal();
        return z;
    }

private:
    static double to_unit_closed_open(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t x = (std::uint64_t(hi) << 32 | lo) >> 11;
        return double(x) * 0x1.0p-53;
    }
    static double to_unit_open_closed(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t x = (std::uint64_t(hi) << 32 | lo) >> 11;
        return double(x + 1) * 0x1.0p-53;
    }

    const Philox4x32::Block& block(std::uint64_t idx) {
        if (!cached_ || idx != cached_idx_) {
            Philox4x32::Block ctr{std::uint32_t(idx), std::uint32_t(idx >> 32), std::uint32_t(stream_),
                                  std::uint32_t(stream_ >> 32)};
            cache_ = Philox4x32::generate(ctr, {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)});
            cached_idx_ = idx;
            cached_ = true;
        }
        return cache_;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t pos_ = 0;
    bool cached_ = false;
    std::uint64_t cached_idx_ = 0;
    Philox4x32::Block cache_{};
};

}  // namespace plmc
