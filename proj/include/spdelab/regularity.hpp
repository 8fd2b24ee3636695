#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace spdelab {

/// The critical time t0 = sup{t > 0 : phi_b(t) + phi_sigma(t) <= 1/6}. Infinity is a
/// separate state, never a large float: every constant formula switches to its exact
/// t0 -> infinity limit.
class CriticalTime {
public:
    static CriticalTime infinite() noexcept { return CriticalTime(); }
    static CriticalTime finite(double t0);

    bool is_infinite() const noexcept { return !value_.has_value(); }
    /// Throws DomainError when infinite.
    double value() const;

    friend bool operator==(const CriticalTime&, const CriticalTime&) = default;

private:
    CriticalTime() = default;
    std::optional<double> value_;
};

/// K(t) == level.
struct ConstantKernel {
    double level = 0.0;
};

/// C sum_{m>=1} m^j exp(-delta t m^p), j = 0 for the uniformly bounded eigenfunction
/// envelope, j = 1 for the sqrt(m)-growth envelope.
struct PowerSeriesKernel {
    enum class Weighting { uniform, linear };
    double coefficient = 1.0;
    double decay = 1.0;
    double exponent = 1.0;
    Weighting weighting = Weighting::uniform;
};

/// Continuation of a mode series past its explicit prefix: terms k > prefix size have
/// weight w_k = weight * k^weight_power and rate r_k = rate_scale * k^exponent. When
/// `exact` is false these are only bounds, w_k <= ... and r_k >= ....
struct PowerLawTail {
    double weight = 0.0;
    double rate_scale = 1.0;
    double exponent = 1.0;
    int weight_power = 0;
    bool exact = true;
};

/// K(t) = sum_k w_k exp(-r_k t) with explicit per-mode weights and rates.
struct ModeSeriesKernel {
    std::vector<double> weights;
    std::vector<double> rates;
    std::optional<PowerLawTail> tail;
};

class KernelSpec {
public:
    using Form = std::variant<ConstantKernel, PowerSeriesKernel, ModeSeriesKernel>;

    static constexpr double default_tolerance = 1e-12;

    /// K == level.
    static KernelSpec constant(double level);
    /// K == c^2, the kernel of a c-Lipschitz map under a contraction semigroup.
    static KernelSpec lipschitz(double c);
    static KernelSpec series_kb(double coefficient, double decay, double exponent);
    static KernelSpec series_ka(double coefficient, double decay, double exponent);
    static KernelSpec mode_series(std::vector<double> weights, std::vector<double> rates,
                                  std::optional<PowerLawTail> tail = std::nullopt);

    const Form& form() const noexcept { return form_; }
    double truncation_tol() const noexcept { return tol_; }
    KernelSpec with_tolerance(double tol) const;

    /// True when K vanishes identically.
    bool is_zero() const noexcept;
    std::string describe() const;

private:
    explicit KernelSpec(Form form) : form_(std::move(form)) {}

    Form form_;
    double tol_ = default_tolerance;
};

/// K(t) for t > 0 (t >= 0 for constant kernels).
double eval_kernel(const KernelSpec& k, double t);

/// phi(t) = int_0^t K(s) ds, summed termwise in closed form. Throws AssumptionError("A3")
/// when the series is not time-integrable.
double phi(const KernelSpec& k, double t);

/// lim_{t -> inf} phi(t); +infinity for non-zero constant kernels.
double phi_limit(const KernelSpec& k);

/// Whether int_0^inf K is finite (series summability condition).
bool is_time_integrable(const KernelSpec& k) noexcept;

struct RegularityProfile {
    KernelSpec kb = KernelSpec::constant(0.0);
    KernelSpec ksigma = KernelSpec::constant(0.0);
    double lambda_sigma = 0.0;                    ///< lower ellipticity |sigma v|^2 >= lambda |v|^2
    std::optional<double> lambda_bar_sigma;       ///< upper bound, when sigma is bounded
    CriticalTime t0 = CriticalTime::infinite();
    std::string t0_diagnostic;
};

struct CriticalTimeResult {
    CriticalTime t0 = CriticalTime::infinite();
    /// Non-empty when infinity was inferred from the search horizon rather than an
    /// exact limit.
    std::string diagnostic;
};

/// Largest t with phi_b(t) + phi_sigma(t) <= 1/6.
CriticalTimeResult compute_t0(const KernelSpec& kb, const KernelSpec& ksigma);

/// Fills profile.t0 from its kernels.
void compute_t0(RegularityProfile& profile);

/// 6^{1 + t/t0}; also the bound on E|grad_v X_t|^2 / |v|^2.
double gradient_constant(double t, const CriticalTime& t0);

/// 3 log 6 / (lambda t0 (1 - 6^{-t/t0})), limit 3 / (lambda t) for t0 = inf.
double logharnack_constant(double t, const CriticalTime& t0, double lambda_sigma);

/// 12 lambda_bar t0 (6^{t/t0} - 1) / log 6, limit 12 lambda_bar t for t0 = inf.
double poincare_constant(double t, const CriticalTime& t0, double lambda_bar);

struct QuadratureValue {
    double value = 0.0;
    double error_estimate = 0.0;
};

/// int_0^t Phi(s)^{-1} ds with Phi(s) = 6^{1 + s/t0}, by adaptive Gauss-Kronrod.
QuadratureValue inverse_gradient_integral(const CriticalTime& t0, double t);

/// Log-Harnack constant rebuilt from the gradient bound: 1 / (2 lambda int_0^t Phi^{-1}).
double logharnack_constant_from_phi(const CriticalTime& t0, double t, double lambda_sigma);

/// Optimal interpolation h_s = int_0^s Phi^{-1} / int_0^t Phi^{-1}.
double optimal_schedule(const CriticalTime& t0, double t, double s);

struct IntegrabilityResult {
    bool finite = false;
    double value = 0.0;
};

/// int_0^1 s^{-eps} K(s) ds for eps in (0, 1).
IntegrabilityResult epsilon_integrability(const KernelSpec& k, double eps);

}  // namespace spdelab
