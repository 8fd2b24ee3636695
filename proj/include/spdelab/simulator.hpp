#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spdelab/noise.hpp"
#include "spdelab/spectral_domain.hpp"

namespace spdelab {

/// exponential_mild integrates the linear part and the frozen-coefficient stochastic
/// convolution exactly over each step:
///   x' = e^{-l dt} x + (1 - e^{-l dt})/l * b + sqrt((1 - e^{-2 l dt}) / (2 l dt)) * sigma dW.
/// exponential_euler applies the factor to the whole increment, x' = e^{-l dt}(x + b dt + sigma dW).
/// euler_maruyama is the explicit scheme, kept as a cross-check.
enum class Scheme { exponential_mild, exponential_euler, euler_maruyama };

std::string to_string(Scheme s);
/// Throws ConfigError for unknown names.
Scheme scheme_from_string(const std::string& name);

struct SchemeConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::exponential_mild;
    double t_end = 1.0;

    /// round(t_end / dt), at least 1 when t_end > 0.
    std::size_t steps() const;
    /// t_end / steps(), the step actually taken.
    double realized_dt() const;
    void validate() const;

    /// min(1e-3, 0.1 / lambda_max): resolves the stiffest retained mode.
    static double stiff_dt(const EigenSpectrum& spectrum);
};

/// Coefficients of the Galerkin system in coordinates. All maps write into `out` (length n).
///   drift(x)                       = P_n b(x)
///   diffusion_apply(x, w)          = P_n (sigma(x) w)
///   drift_jacobian_apply(x, h)     = (grad_h b_n)(x)
///   diffusion_jacobian_apply(x, h, w) = (grad_h sigma_n)(x) w
/// An empty drift means b = 0. `additive_level` set means sigma(x) w = level * w for every
/// x, in which case the diffusion maps are never called.
struct CoefficientCallbacks {
    using Drift = std::function<void(std::span<const double>, std::span<double>)>;
    using Diffusion =
        std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>;
    using DriftJacobian =
        std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>;
    using DiffusionJacobian = std::function<void(std::span<const double>, std::span<const double>,
                                                 std::span<const double>, std::span<double>)>;

    Drift drift;
    Diffusion diffusion_apply;
    DriftJacobian drift_jacobian_apply;
    DiffusionJacobian diffusion_jacobian_apply;
    std::optional<double> additive_level;

    bool has_jacobians() const noexcept;

    /// b = 0, sigma = level * Id.
    static CoefficientCallbacks ornstein_uhlenbeck(double level);
};

struct FlowResult {
    GalerkinState x;
    GalerkinState tangent;  ///< grad_v X_t
};

/// Galerkin system integrator. Immutable after construction; every method is safe to call
/// concurrently for different (or equal) path ids.
class Simulator {
public:
    /// Receives the state after `step` steps (step 0 is the initial state).
    using Observer = std::function<void(std::size_t step, double t, std::span<const double> x)>;
    /// Same, with the tangent processes in the order the directions were given.
    using FlowObserver = std::function<void(std::size_t step, double t, std::span<const double> x,
                                            const std::vector<std::vector<double>>& tangents)>;

    Simulator(EigenSpectrum spectrum, CoefficientCallbacks callbacks, SchemeConfig scheme,
              NoiseStream noise);

    const EigenSpectrum& spectrum() const noexcept { return spectrum_; }
    const CoefficientCallbacks& callbacks() const noexcept { return callbacks_; }
    const SchemeConfig& scheme() const noexcept { return scheme_; }
    const NoiseStream& noise() const noexcept { return noise_; }
    std::size_t dimension() const noexcept { return spectrum_.size(); }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }
    double t_end() const noexcept { return scheme_.t_end; }

    /// Same model, noise and nominal dt, different horizon.
    Simulator with_horizon(double t_end) const;

    /// One step from x with Brownian increments dw (already scaled by sqrt(dt)).
    GalerkinState step(const GalerkinState& x, std::span<const double> dw) const;

    GalerkinState simulate_path(const GalerkinState& x0, std::uint32_t path_id,
                                const Observer& observer = {}) const;

    /// State and grad_v X_t driven by the same increments as simulate_path.
    FlowResult derivative_flow(const GalerkinState& x0, const GalerkinState& v,
                               std::uint32_t path_id) const;

    /// One base path with several tangent directions. Returns the tangents at t_end and
    /// writes the state to x_out.
    std::vector<GalerkinState> derivative_flows(const GalerkinState& x0,
                                                std::span<const GalerkinState> directions,
                                                std::uint32_t path_id, GalerkinState& x_out,
                                                const FlowObserver& observer = {}) const;

    /// Paths from x0 and y0 on identical noise addresses.
    std::pair<GalerkinState, GalerkinState> coupled_pair(const GalerkinState& x0,
                                                         const GalerkinState& y0,
                                                         std::uint32_t path_id) const;

private:
    struct Workspace;

    void check_state(const GalerkinState& x, const char* what) const;
    void advance(std::span<double> x, std::span<const double> dw, Workspace& ws) const;
    void advance_tangent(std::span<const double> x, std::span<double> h,
                         std::span<const double> dw, Workspace& ws) const;
    void draw_increments(std::uint32_t path_id, std::size_t step, std::span<double> dw) const;
    void check_finite(std::span<const double> x, std::size_t step, std::uint32_t path_id) const;

    EigenSpectrum spectrum_;
    CoefficientCallbacks callbacks_;
    SchemeConfig scheme_;
    NoiseStream noise_;
    std::size_t steps_ = 0;
    double dt_ = 0.0;
    double sqrt_dt_ = 0.0;
    // per-mode update x' = a x + c b + g (sigma dW)
    std::vector<double> a_, c_, g_;
};

struct OuMoments {
    std::vector<double> mean;
    std::vector<double> variance;
};

/// Exact law of dx_i = -l_i x_i dt + phi0 dbeta_i at time t.
OuMoments ou_exact(std::span<const double> x0, double t, std::span<const double> lambdas,
                   double phi0);

/// CSV `path_id,step,t,coeff_0,...` with one row every `every` steps (and the final step).
void write_trajectories_csv(std::ostream& out, const Simulator& sim, const GalerkinState& x0,
                            std::span<const std::uint32_t> path_ids, std::size_t every);

}  // namespace spdelab
