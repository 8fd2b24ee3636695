#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spdelab/regularity.hpp"
#include "spdelab/simulator.hpp"
#include "spdelab/spectral_domain.hpp"

namespace spdelab {

/// Scalar nonlinearity g: R -> R used pointwise as reaction term psi or noise intensity phi.
class ScalarFunctionSpec {
public:
    enum class Form { affine, sin_perturbed, atan_scaled, table };

    /// s -> a s + b
    static ScalarFunctionSpec affine(double a, double b);
    /// s -> c0 + amp sin(freq s)
    static ScalarFunctionSpec sin_perturbed(double c0, double amp, double freq);
    /// s -> a atan(s)
    static ScalarFunctionSpec atan_scaled(double a);
    /// Piecewise linear through (xs, ys), constant beyond the ends. No derivative.
    static ScalarFunctionSpec table(std::vector<double> xs, std::vector<double> ys, double lipschitz);

    /// Overrides the analytic bounds of g^2. Checked against a dense grid; throws ConfigError
    /// when a grid value violates them.
    ScalarFunctionSpec with_square_bounds(std::optional<double> inf_sq, std::optional<double> sup_sq) const;

    Form form() const noexcept { return form_; }
    double operator()(double s) const;
    bool has_derivative() const noexcept { return form_ != Form::table; }
    /// Throws DomainError for table functions.
    double derivative(double s) const;

    double lipschitz() const noexcept { return lipschitz_; }
    /// inf_s g(s)^2
    double inf_sq() const noexcept { return inf_sq_; }
    /// sup_s g(s)^2, empty when g is unbounded.
    std::optional<double> sup_sq() const noexcept { return sup_sq_; }
    /// limsup_{|s| -> inf} g(s)^2 / s^2
    double asymptotic_slope_sq() const noexcept;
    /// g is constant; its value is g(0).
    bool is_constant() const noexcept;
    bool is_zero() const noexcept { return is_constant() && (*this)(0.0) == 0.0; }

    std::string describe() const;

private:
    ScalarFunctionSpec() = default;
    void set_analytic_bounds();

    Form form_ = Form::affine;
    double p0_ = 0.0, p1_ = 0.0, p2_ = 0.0;
    std::vector<double> xs_, ys_;
    double lipschitz_ = 0.0;
    double inf_sq_ = 0.0;
    std::optional<double> sup_sq_;
};

/// du = (-(-Delta)^alpha u + psi(u)) dt + phi(u) dW on a rectangle, Dirichlet boundary,
/// W cylindrical, truncated to n modes. Nonlinear terms are evaluated on an interior grid of
/// quad_points per dimension and projected back by quadrature.
struct ReactionDiffusionModel {
    RectDomain domain = RectDomain::unit(1);
    double alpha = 1.0;
    ScalarFunctionSpec psi = ScalarFunctionSpec::affine(0.0, 0.0);
    ScalarFunctionSpec phi = ScalarFunctionSpec::affine(0.0, 1.0);
    std::size_t n = 16;
    /// 0 selects the minimum dealiased size, twice the largest per-dimension mode index.
    std::size_t quad_points = 0;

    /// Throws AssumptionError("alpha") unless alpha > d/2, DomainError for bad sizes.
    void validate() const;
    EigenSpectrum spectrum() const;
    /// Minimum dealiased grid size per dimension for the first n modes.
    std::size_t min_quad_points() const;
    std::size_t effective_quad_points() const;
};

/// Ornstein-Uhlenbeck model on [0, 1]: alpha = 1, psi = 0, phi = phi0.
ReactionDiffusionModel ou_preset(std::size_t n, double phi0 = 1.0);

/// d = 1 on [0, 1], alpha = 2, phi = 1 + 0.1 sin, psi = 0.5 atan, n = 16, 32 grid points.
ReactionDiffusionModel bounded_test_model();

CoefficientCallbacks build_callbacks(const ReactionDiffusionModel& model);

/// Simulator for the model truncated at model.n modes.
Simulator make_simulator(const ReactionDiffusionModel& model, const SchemeConfig& scheme,
                         const NoiseStream& noise);

/// K_sigma(t) = c^2 sum_m |e_m|_inf^2 e^{-2 lambda_m t} with c the Lipschitz constant of phi.
KernelSpec exact_Ksigma(const ReactionDiffusionModel& model);

/// K_b = c_psi^2, K_sigma exact, lambda = inf phi^2, lambda_bar = sup phi^2, t0 computed.
RegularityProfile build_profile(const ReactionDiffusionModel& model);

struct GrowthCheck {
    bool holds = false;
    double slope_sq = 0.0;   ///< limsup (phi^2 + psi^2) / s^2
    double worst_s = 0.0;    ///< grid point with the smallest margin
    double worst_margin = 0.0;
};

/// phi(s)^2 + psi(s)^2 <= eps0 s^2 + C0 on s = 0, +-[1e-3, 1e3] (log grid) and in the limit.
GrowthCheck check_growth_condition(const ReactionDiffusionModel& model, double eps0, double C0);

struct MomentRow {
    double t = 0.0;
    double second_moment = 0.0;
    double std_error = 0.0;
};

struct MomentTable {
    std::vector<MomentRow> rows;
    /// Plateau heuristic: "bounded" when the last three checkpoints agree within 2 standard
    /// errors pairwise, "not_plateaued" when they do not, "insufficient" with fewer than
    /// three checkpoints.
    std::string verdict;
};

/// E|u_t|^2 at the checkpoint times (snapped to the step grid) over `paths` paths.
MomentTable moment_harness(const Simulator& sim, const GalerkinState& x0,
                           const std::vector<double>& checkpoints, std::size_t paths,
                           unsigned threads);

/// CSV `t,second_moment,stderr`.
void write_moment_csv(std::ostream& out, const MomentTable& table);

/// CSV `xi,u(xi)` of the field synthesized from coefficients on a uniform grid of
/// `points` per dimension (xi written as space-separated coordinates when d > 1).
void write_field_csv(std::ostream& out, const ReactionDiffusionModel& model,
                     const GalerkinState& state, std::size_t points);

}  // namespace spdelab
