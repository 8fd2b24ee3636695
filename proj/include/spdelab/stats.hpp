#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace spdelab {

/// Welford accumulator. Equal samples give their value as the mean and exactly zero
/// variance, which the degenerate equality checks rely on.
class RunningStats {
public:
    void add(double x) noexcept {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    /// Unbiased sample variance; 0 with fewer than two samples.
    double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stderr_of_mean() const noexcept {
        return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline RunningStats summarize(std::span<const double> xs) noexcept {
    RunningStats s;
    for (double x : xs) s.add(x);
    return s;
}

struct SampleVariance {
    double value = 0.0;
    double std_error = 0.0;
};

/// Unbiased sample variance with a delta-method standard error, sd((x - mean)^2) / sqrt(M).
inline SampleVariance sample_variance(std::span<const double> xs) noexcept {
    const RunningStats s = summarize(xs);
    RunningStats sq;
    for (double x : xs) {
        const double d = x - s.mean();
        sq.add(d * d);
    }
    return {s.variance(), sq.stderr_of_mean()};
}

}  // namespace spdelab
