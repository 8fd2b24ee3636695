#include "spdelab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "spdelab/errors.hpp"

namespace spdelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOneSixth = 1.0 / 6.0;
const double kLog6 = std::log(6.0);

// exp(-40) ~ 4e-18: beyond this exponent a term equals its power-law asymptote
// to within double precision.
constexpr double kSaturation = 40.0;
// Euler-Maclaurin tails are started no earlier than this index.
constexpr double kMinTailStart = 16.0;
constexpr std::size_t kMaxTerms = 200'000'000;

// sum_{k >= start} k^{-s} for s > 1, start >= 16: Euler-Maclaurin with Bernoulli
// corrections through B_8. The remainder is below 1e-18 relative for the exponents
// used here.
double power_sum_from(double s, double start) {
    const double f = std::pow(start, -s);
    const double inv2 = 1.0 / (start * start);
    double sum = start * f / (s - 1.0) + 0.5 * f;
    double d = s * f / start;  // -f'(start)
    sum += d / 12.0;
    d *= (s + 1.0) * (s + 2.0) * inv2;  // -f'''(start)
    sum -= d / 720.0;
    d *= (s + 3.0) * (s + 4.0) * inv2;
    sum += d / 30240.0;
    d *= (s + 5.0) * (s + 6.0) * inv2;
    sum -= d / 1209600.0;
    return sum;
}

struct SeriesView {
    std::span<const double> weights;
    std::span<const double> rates;
    std::optional<PowerLawTail> tail;
};

SeriesView view(const PowerSeriesKernel& k) {
    PowerLawTail tail{k.coefficient, k.decay, k.exponent,
                      k.weighting == PowerSeriesKernel::Weighting::linear ? 1 : 0, true};
    return {{}, {}, tail};
}

SeriesView view(const ModeSeriesKernel& k) { return {k.weights, k.rates, k.tail}; }

// Exponent s of the power law sum k^{-s} that governs time integrability.
double integrability_exponent(const PowerLawTail& tail) {
    return tail.exponent - static_cast<double>(tail.weight_power);
}

void require_positive_time(double t) {
    if (!(t > 0.0)) throw DomainError("series kernels are evaluated at t > 0 only");
}

// ---- K(t) -------------------------------------------------------------------------------

// Upper bound for sum_{k > from} W k^j exp(-a k^q) by the integral comparison, valid once
// the integrand decreases (from >= (j / (a q))^{1/q}).
double kernel_tail_integral(const PowerLawTail& tail, double a, double from) {
    const double q = tail.exponent;
    const double shape = (tail.weight_power + 1.0) / q;
    const double z = a * std::pow(from, q);
    if (z > 700.0) return 0.0;
    return tail.weight / q * std::pow(a, -shape) * boost::math::tgamma(shape, z);
}

double kernel_series_value(const SeriesView& s, double t, double tol) {
    require_positive_time(t);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.weights.size(); ++i) sum += s.weights[i] * std::exp(-s.rates[i] * t);
    if (!s.tail || s.tail->weight == 0.0) return sum;

    const auto& tail = *s.tail;
    const double a = tail.rate_scale * t;
    const double q = tail.exponent;
    const double start = static_cast<double>(s.weights.size());
    const double monotone_from =
        tail.weight_power == 0 ? 0.0 : std::pow(tail.weight_power / (a * q), 1.0 / q);

    if (!tail.exact) {
        if (start < monotone_from) throw NumericalError("mode table too short for kernel tail bound");
        const double bound = kernel_tail_integral(tail, a, start);
        if (bound > 2.0 * tol) {
            throw NumericalError(fmt::format(
                "kernel tail bound {:.3g} exceeds tolerance at t = {:.6g}; extend the mode table",
                bound, t));
        }
        return sum + 0.5 * bound;
    }

    std::size_t next_check = 0;
    for (std::size_t k = s.weights.size() + 1;; ++k) {
        const double kd = static_cast<double>(k);
        const double term = tail.weight * std::pow(kd, tail.weight_power) * std::exp(-a * std::pow(kd, q));
        sum += term;
        if (kd >= monotone_from && term < tol && k >= next_check) {
            if (kernel_tail_integral(tail, a, kd) < tol) return sum;
            next_check = k + std::max<std::size_t>(1, k / 8);
        }
        if (k > kMaxTerms) throw NumericalError("kernel series did not reach its tolerance");
    }
}

// ---- phi(t) -----------------------------------------------------------------------------

// sum_{k > start} W k^j (1 - exp(-rho t k^q)) / (rho k^q), t may be +inf.
double phi_exact_tail(const PowerLawTail& tail, std::size_t start, double t) {
    const double s = integrability_exponent(tail);
    const double scale = tail.weight / tail.rate_scale;
    const double a = tail.rate_scale * t;
    double sum = 0.0;
    std::size_t k = start + 1;
    for (;; ++k) {
        const double kd = static_cast<double>(k);
        const double y = std::isinf(a) ? kInf : a * std::pow(kd, tail.exponent);
        if (kd >= kMinTailStart && k >= start + 16 && y >= kSaturation) break;
        sum += scale * std::pow(kd, -s) * (-std::expm1(-y));
        if (k > kMaxTerms) throw NumericalError("phi series did not saturate; time too small");
    }
    return sum + scale * power_sum_from(s, static_cast<double>(k));
}

double phi_series_value(const SeriesView& sv, double t, double tol) {
    double sum = 0.0;
    for (std::size_t i = 0; i < sv.weights.size(); ++i) {
        const double r = sv.rates[i];
        sum += std::isinf(t) ? sv.weights[i] / r : sv.weights[i] * (-std::expm1(-r * t)) / r;
    }
    if (!sv.tail || sv.tail->weight == 0.0) return sum;

    const auto& tail = *sv.tail;
    const double s = integrability_exponent(tail);
    if (!(s > 1.0)) {
        throw AssumptionError("A3", fmt::format("kernel series is not time-integrable "
                                                "(sum of m^{:.6g} diverges)", -s));
    }
    const std::size_t start = sv.weights.size();
    if (tail.exact) return sum + phi_exact_tail(tail, start, t);

    const double bound = tail.weight / tail.rate_scale *
                         std::pow(static_cast<double>(start), 1.0 - s) / (s - 1.0);
    if (bound > 2.0 * tol) {
        throw NumericalError(fmt::format(
            "phi tail bound {:.3g} exceeds tolerance; extend the mode table", bound));
    }
    return sum + 0.5 * bound;
}

bool tail_integrable(const std::optional<PowerLawTail>& tail) {
    return !tail || tail->weight == 0.0 || integrability_exponent(*tail) > 1.0;
}

}  // namespace

// ---- CriticalTime / KernelSpec ----------------------------------------------------------

CriticalTime CriticalTime::finite(double t0) {
    if (!(t0 > 0.0) || !std::isfinite(t0)) throw DomainError("finite t0 must be positive");
    CriticalTime c;
    c.value_ = t0;
    return c;
}

double CriticalTime::value() const {
    if (!value_) throw DomainError("t0 is infinite");
    return *value_;
}

KernelSpec KernelSpec::constant(double level) {
    if (!(level >= 0.0) || !std::isfinite(level)) throw DomainError("constant kernel level must be >= 0");
    return KernelSpec(ConstantKernel{level});
}

KernelSpec KernelSpec::lipschitz(double c) {
    if (!(c >= 0.0)) throw DomainError("Lipschitz constant must be >= 0");
    return constant(c * c);
}

namespace {
void check_series(double coefficient, double decay, double exponent) {
    if (!(coefficient > 0.0)) throw DomainError("series coefficient must be positive");
    if (!(decay > 0.0)) throw DomainError("series decay must be positive");
    if (!(exponent > 0.0)) throw DomainError("series exponent must be positive");
}
}  // namespace

KernelSpec KernelSpec::series_kb(double coefficient, double decay, double exponent) {
    check_series(coefficient, decay, exponent);
    return KernelSpec(PowerSeriesKernel{coefficient, decay, exponent,
                                        PowerSeriesKernel::Weighting::uniform});
}

KernelSpec KernelSpec::series_ka(double coefficient, double decay, double exponent) {
    check_series(coefficient, decay, exponent);
    return KernelSpec(PowerSeriesKernel{coefficient, decay, exponent,
                                        PowerSeriesKernel::Weighting::linear});
}

KernelSpec KernelSpec::mode_series(std::vector<double> weights, std::vector<double> rates,
                                   std::optional<PowerLawTail> tail) {
    if (weights.size() != rates.size()) throw DomainError("weights and rates differ in length");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0)) throw DomainError("mode weights must be >= 0");
        if (!(rates[i] > 0.0)) throw DomainError("mode rates must be > 0");
    }
    if (tail) {
        if (!(tail->weight >= 0.0) || !(tail->rate_scale > 0.0) || !(tail->exponent > 0.0) ||
            tail->weight_power < 0) {
            throw DomainError("invalid power-law tail");
        }
    }
    return KernelSpec(ModeSeriesKernel{std::move(weights), std::move(rates), tail});
}

KernelSpec KernelSpec::with_tolerance(double tol) const {
    if (!(tol > 0.0)) throw DomainError("truncation tolerance must be positive");
    KernelSpec k = *this;
    k.tol_ = tol;
    return k;
}

bool KernelSpec::is_zero() const noexcept {
    return std::visit(
        [](const auto& f) -> bool {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantKernel>) {
                return f.level == 0.0;
            } else if constexpr (std::is_same_v<T, PowerSeriesKernel>) {
                return false;
            } else {
                for (double w : f.weights) {
                    if (w != 0.0) return false;
                }
                return !f.tail || f.tail->weight == 0.0;
            }
        },
        form_);
}

std::string KernelSpec::describe() const {
    return std::visit(
        [](const auto& f) -> std::string {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantKernel>) {
                return fmt::format("constant(level={:.17g})", f.level);
            } else if constexpr (std::is_same_v<T, PowerSeriesKernel>) {
                return fmt::format("{}(C={:.17g}, delta={:.17g}, p={:.17g})",
                                   f.weighting == PowerSeriesKernel::Weighting::linear ? "series_KA"
                                                                                         : "series_KB",
                                   f.coefficient, f.decay, f.exponent);
            } else {
                std::string out = fmt::format("mode_series(explicit={}", f.weights.size());
                if (f.tail) {
                    out += fmt::format(", tail{}: w={:.17g}*k^{}, r={:.17g}*k^{:.17g}",
                                       f.tail->exact ? "" : "_bound", f.tail->weight,
                                       f.tail->weight_power, f.tail->rate_scale, f.tail->exponent);
                }
                return out + ")";
            }
        },
        form_);
}

// ---- kernel functionals -----------------------------------------------------------------

double eval_kernel(const KernelSpec& k, double t) {
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantKernel>) {
                if (!(t >= 0.0)) throw DomainError("kernel time must be non-negative");
                return f.level;
            } else {
                return kernel_series_value(view(f), t, k.truncation_tol());
            }
        },
        k.form());
}

double phi(const KernelSpec& k, double t) {
    if (!(t >= 0.0)) throw DomainError("phi is defined for t >= 0");
    if (t == 0.0) return 0.0;
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantKernel>) {
                return f.level * t;
            } else {
                return phi_series_value(view(f), t, k.truncation_tol());
            }
        },
        k.form());
}

double phi_limit(const KernelSpec& k) {
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantKernel>) {
                return f.level == 0.0 ? 0.0 : kInf;
            } else {
                return phi_series_value(view(f), kInf, k.truncation_tol());
            }
        },
        k.form());
}

bool is_time_integrable(const KernelSpec& k) noexcept {
    return std::visit(
        [](const auto& f) -> bool {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantKernel>) {
                return true;
            } else {
                return tail_integrable(view(f).tail);
            }
        },
        k.form());
}

// ---- t0 ---------------------------------------------------------------------------------

CriticalTimeResult compute_t0(const KernelSpec& kb, const KernelSpec& ksigma) {
    if (!is_time_integrable(kb)) throw AssumptionError("A1", "K_b is not integrable near 0");
    if (!is_time_integrable(ksigma)) throw AssumptionError("A3", "K_sigma is not integrable near 0");

    const auto total = [&](double t) { return phi(kb, t) + phi(ksigma, t); };

    if (phi_limit(kb) + phi_limit(ksigma) <= kOneSixth) return {CriticalTime::infinite(), {}};

    constexpr double horizon = 1e9;
    double lo = 0.0;
    double hi = 1.0;
    while (total(hi) <= kOneSixth) {
        lo = hi;
        hi *= 2.0;
        if (hi > horizon) {
            return {CriticalTime::infinite(),
                    "phi_b + phi_sigma stays <= 1/6 up to the search horizon 1e9; "
                    "t0 = infinity is inferred, not exact"};
        }
    }
    for (int it = 0; it < 400; ++it) {
        if (hi - lo <= std::max(1e-12, 4.0 * std::numeric_limits<double>::epsilon() * hi)) break;
        const double mid = 0.5 * (lo + hi);
        if (total(mid) <= kOneSixth) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // lo can only be 0 if the sum exceeds 1/6 immediately, which integrability rules out
    return {CriticalTime::finite(lo > 0.0 ? lo : hi), {}};
}

void compute_t0(RegularityProfile& profile) {
    auto result = compute_t0(profile.kb, profile.ksigma);
    profile.t0 = result.t0;
    profile.t0_diagnostic = std::move(result.diagnostic);
}

// ---- constants --------------------------------------------------------------------------

double gradient_constant(double t, const CriticalTime& t0) {
    if (!(t >= 0.0)) throw DomainError("time must be non-negative");
    if (t0.is_infinite()) return 6.0;
    return std::pow(6.0, 1.0 + t / t0.value());
}

double logharnack_constant(double t, const CriticalTime& t0, double lambda_sigma) {
    if (!(t > 0.0)) throw DomainError("log-Harnack constant needs t > 0");
    if (!(lambda_sigma > 0.0)) throw DomainError("lambda(sigma) must be positive");
    if (t0.is_infinite()) return 3.0 / (lambda_sigma * t);
    const double s = t0.value();
    // t0 (1 - 6^{-t/t0}) without cancellation for t << t0
    const double effective = -s * std::expm1(-(t / s) * kLog6);
    return 3.0 * kLog6 / (lambda_sigma * effective);
}

double poincare_constant(double t, const CriticalTime& t0, double lambda_bar) {
    if (!(t >= 0.0)) throw DomainError("time must be non-negative");
    if (!(lambda_bar > 0.0)) throw DomainError("upper bound lambda_bar(sigma) must be positive");
    if (t0.is_infinite()) return 12.0 * lambda_bar * t;
    const double s = t0.value();
    return 12.0 * lambda_bar * s * std::expm1((t / s) * kLog6) / kLog6;
}

QuadratureValue inverse_gradient_integral(const CriticalTime& t0, double t) {
    if (!(t >= 0.0)) throw DomainError("time must be non-negative");
    if (t == 0.0) return {};
    const auto inverse = [&](double s) {
        return t0.is_infinite() ? 1.0 / 6.0 : std::exp(-(1.0 + s / t0.value()) * kLog6);
    };
    double error = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        inverse, 0.0, t, 15, 1e-13, &error);
    if (!std::isfinite(value) || error > 1e-11 * std::abs(value)) {
        throw NumericalError(fmt::format("quadrature of 1/Phi did not converge (error {:.3g})", error));
    }
    return {value, error};
}

double logharnack_constant_from_phi(const CriticalTime& t0, double t, double lambda_sigma) {
    if (!(t > 0.0)) throw DomainError("log-Harnack constant needs t > 0");
    if (!(lambda_sigma > 0.0)) throw DomainError("lambda(sigma) must be positive");
    return 1.0 / (2.0 * lambda_sigma * inverse_gradient_integral(t0, t).value);
}

double optimal_schedule(const CriticalTime& t0, double t, double s) {
    if (!(t > 0.0) || !(s >= 0.0) || s > t) throw DomainError("schedule needs 0 <= s <= t, t > 0");
    return inverse_gradient_integral(t0, s).value / inverse_gradient_integral(t0, t).value;
}

// ---- int_0^1 s^{-eps} K(s) ds -----------------------------------------------------------

namespace {

// int_0^1 s^{-eps} exp(-r s) ds = r^{eps-1} gamma_lower(1 - eps, r)
double singular_laplace(double eps, double r) {
    return std::pow(r, eps - 1.0) * boost::math::tgamma_lower(1.0 - eps, r);
}

IntegrabilityResult epsilon_series(const SeriesView& sv, double eps, double tol) {
    double sum = 0.0;
    for (std::size_t i = 0; i < sv.weights.size(); ++i) {
        sum += sv.weights[i] * singular_laplace(eps, sv.rates[i]);
    }
    if (!sv.tail || sv.tail->weight == 0.0) return {true, sum};

    const auto& tail = *sv.tail;
    const double q = tail.exponent;
    const double s = q * (1.0 - eps) - tail.weight_power;
    if (!(s > 1.0)) return {false, kInf};

    const double gamma_full = boost::math::tgamma(1.0 - eps);
    const double scale = tail.weight * std::pow(tail.rate_scale, eps - 1.0) * gamma_full;
    const std::size_t start = sv.weights.size();

    if (!tail.exact) {
        const double bound = scale * std::pow(static_cast<double>(start), 1.0 - s) / (s - 1.0);
        if (bound > 2.0 * tol) throw NumericalError("epsilon-integral tail bound exceeds tolerance");
        return {true, sum + 0.5 * bound};
    }

    std::size_t k = start + 1;
    for (;; ++k) {
        const double kd = static_cast<double>(k);
        const double r = tail.rate_scale * std::pow(kd, q);
        // gamma_upper(1-eps, r) / Gamma(1-eps) < 1e-18 once r exceeds ~45
        if (kd >= kMinTailStart && k >= start + 16 && r >= kSaturation + 5.0) break;
        sum += tail.weight * std::pow(kd, tail.weight_power) * singular_laplace(eps, r);
        if (k > kMaxTerms) throw NumericalError("epsilon-integral series did not saturate");
    }
    return {true, sum + scale * power_sum_from(s, static_cast<double>(k))};
}

}  // namespace

IntegrabilityResult epsilon_integrability(const KernelSpec& k, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
    return std::visit(
        [&](const auto& f) -> IntegrabilityResult {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantKernel>) {
                return {true, f.level / (1.0 - eps)};
            } else {
                return epsilon_series(view(f), eps, k.truncation_tol());
            }
        },
        k.form());
}

}  // namespace spdelab
