#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace spdelab {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double length() const noexcept { return hi - lo; }
};

/// Closed rectangle prod_i [lo_i, hi_i] in R^d.
class RectDomain {
public:
    explicit RectDomain(std::vector<Interval> sides);

    /// [0, 1]^d
    static RectDomain unit(std::size_t dimension);

    std::size_t dimension() const noexcept { return sides_.size(); }
    const std::vector<Interval>& sides() const noexcept { return sides_; }
    const Interval& side(std::size_t i) const { return sides_.at(i); }
    double volume() const noexcept;
    bool contains(std::span<const double> xi) const noexcept;

    /// sup-norm squared of every L2-normalized Dirichlet eigenfunction, prod_i 2 / L_i.
    double eigenfunction_sup_sq() const noexcept;

    friend bool operator==(const RectDomain& a, const RectDomain& b) noexcept;

private:
    std::vector<Interval> sides_;
};

using MultiIndex = std::vector<int>;

/// Eigenvalue of (-Delta)^alpha with Dirichlet boundary: (sum_i (m_i pi / L_i)^2)^alpha.
double eigenvalue(const RectDomain& domain, double alpha, std::span<const int> m);

/// L2-normalized Dirichlet eigenfunction prod_i sqrt(2/L_i) sin(m_i pi (xi_i - lo_i) / L_i).
double eigenfunction_eval(const RectDomain& domain, std::span<const int> m,
                          std::span<const double> xi);

/// e^{-lambda t}, the action of the semigroup on one mode.
double semigroup_factor(double t, double lambda);

/// First n multi-indices sorted by Dirichlet eigenvalue, ties broken lexicographically.
std::vector<MultiIndex> canonical_modes(const RectDomain& domain, std::size_t n);

/// Truncated spectrum of A = -(-Delta)^alpha. Either synthesized for a rectangle or
/// supplied directly as a list of rates (abstract spectra for toy models and the OU oracle).
class EigenSpectrum {
public:
    static EigenSpectrum rectangle(RectDomain domain, double alpha, std::size_t n);
    static EigenSpectrum abstract(std::vector<double> lambdas);

    std::size_t size() const noexcept { return lambdas_.size(); }
    bool is_rectangle() const noexcept { return domain_.has_value(); }
    const RectDomain& domain() const;
    std::optional<double> alpha() const noexcept { return alpha_; }
    const std::vector<MultiIndex>& modes() const noexcept { return modes_; }
    std::span<const double> lambdas() const noexcept { return lambdas_; }
    double lambda(std::size_t i) const { return lambdas_.at(i); }
    double lambda_max() const noexcept { return lambdas_.empty() ? 0.0 : lambdas_.back(); }

    /// Spectrum of the first n modes.
    EigenSpectrum truncated(std::size_t n) const;

private:
    EigenSpectrum() = default;

    std::optional<RectDomain> domain_;
    std::optional<double> alpha_;
    std::vector<MultiIndex> modes_;
    std::vector<double> lambdas_;
};

/// Coefficients <x, e_k> of a snapshot x in span{e_1, ..., e_n}.
class GalerkinState {
public:
    GalerkinState() = default;
    explicit GalerkinState(std::size_t n) : coeffs_(n, 0.0) {}
    explicit GalerkinState(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {}

    static GalerkinState unit(std::size_t n, std::size_t k);

    std::size_t size() const noexcept { return coeffs_.size(); }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    std::span<double> coeffs() noexcept { return coeffs_; }
    const std::vector<double>& vector() const noexcept { return coeffs_; }

    double operator[](std::size_t i) const { return coeffs_[i]; }
    double& operator[](std::size_t i) { return coeffs_[i]; }

    /// Parseval: |x|^2 = sum_k <x, e_k>^2.
    double norm_sq() const noexcept;
    double norm() const noexcept;

    friend bool operator==(const GalerkinState&, const GalerkinState&) = default;

private:
    std::vector<double> coeffs_;
};

/// P_n: keep the first n coefficients.
GalerkinState project(const GalerkinState& state, std::size_t n);

/// View H_n inside H_N by zero-padding.
GalerkinState embed(const GalerkinState& state, std::size_t n_total);

double distance_sq(const GalerkinState& a, const GalerkinState& b);

}  // namespace spdelab
