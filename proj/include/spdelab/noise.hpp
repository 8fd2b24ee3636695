#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace spdelab {

/// Philox4x32-10 block function (Salmon et al., SC'11). Stateless: maps a 128-bit
/// counter and a 64-bit key to 128 random bits.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter counter, Key key) noexcept;
};

/// Gaussian noise addressed by (path_id, mode_index, step_index).
///
/// Every draw is a pure function of the seed and its address, so paths can be integrated
/// in any order, on any number of workers, and truncation levels that share a mode index
/// see the same Brownian increments. The optional stream tag separates auxiliary draws
/// (random directions, validation samples) from the driving noise.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed, std::uint32_t stream = 0) noexcept
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint32_t stream() const noexcept { return stream_; }

    /// Standard normal draw at one address.
    double normal(std::uint32_t path_id, std::uint32_t mode_index,
                  std::uint32_t step_index) const noexcept;

    /// Fills out[i] with the draw for (path_id, i, step_index), i = 0..out.size()-1.
    void fill_normals(std::uint32_t path_id, std::uint32_t step_index,
                      std::span<double> out) const noexcept;

    /// Uniform on (0, 1) at one address; shares the counter layout of `normal`.
    double uniform(std::uint32_t path_id, std::uint32_t index,
                   std::uint32_t step_index) const noexcept;

    NoiseStream substream(std::uint32_t stream) const noexcept { return NoiseStream(seed_, stream); }

private:
    Philox4x32::Counter block(std::uint32_t path_id, std::uint32_t pair_index,
                              std::uint32_t step_index) const noexcept;

    std::uint64_t seed_;
    std::uint32_t stream_;
};

}  // namespace spdelab
