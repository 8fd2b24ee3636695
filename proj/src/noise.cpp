#include "spdelab/noise.hpp"

#include <cmath>
#include <numbers>

namespace spdelab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
constexpr int kRounds = 10;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

// 53 random bits mapped to the open interval (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter c, Key k) noexcept {
    for (int round = 0; round < kRounds; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kMul0, c[0], lo0, hi0);
        mulhilo(kMul1, c[2], lo1, hi1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

Philox4x32::Counter NoiseStream::block(std::uint32_t path_id, std::uint32_t pair_index,
                                       std::uint32_t step_index) const noexcept {
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                              static_cast<std::uint32_t>(seed_ >> 32)};
    return Philox4x32::generate({pair_index, step_index, path_id, stream_}, key);
}

// Box-Muller on one Philox block: modes 2j and 2j+1 share block j.
double NoiseStream::normal(std::uint32_t path_id, std::uint32_t mode_index,
                           std::uint32_t step_index) const noexcept {
    const auto r = block(path_id, mode_index >> 1, step_index);
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (mode_index & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
}

void NoiseStream::fill_normals(std::uint32_t path_id, std::uint32_t step_index,
                               std::span<double> out) const noexcept {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; i += 2) {
        const auto r = block(path_id, static_cast<std::uint32_t>(i >> 1), step_index);
        const double u1 = to_open_unit(r[0], r[1]);
        const double u2 = to_open_unit(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[i] = radius * std::cos(angle);
        if (i + 1 < n) out[i + 1] = radius * std::sin(angle);
    }
}

double NoiseStream::uniform(std::uint32_t path_id, std::uint32_t index,
                            std::uint32_t step_index) const noexcept {
    const auto r = block(path_id, index >> 1, step_index);
    return (index & 1u) ? to_open_unit(r[2], r[3]) : to_open_unit(r[0], r[1]);
}

}  // namespace spdelab
