#include "spdelab/spectral_domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "spdelab/errors.hpp"

namespace spdelab {

using std::numbers::pi;

RectDomain::RectDomain(std::vector<Interval> sides) : sides_(std::move(sides)) {
    if (sides_.empty()) {
        throw DomainError("rectangle needs at least one dimension");
    }
    for (std::size_t i = 0; i < sides_.size(); ++i) {
        const auto& s = sides_[i];
        if (!std::isfinite(s.lo) || !std::isfinite(s.hi) || !(s.hi > s.lo)) {
            throw DomainError("side " + std::to_string(i) + " has non-positive length");
        }
    }
}

RectDomain RectDomain::unit(std::size_t dimension) {
    return RectDomain(std::vector<Interval>(dimension, Interval{0.0, 1.0}));
}

double RectDomain::volume() const noexcept {
    double v = 1.0;
    for (const auto& s : sides_) v *= s.length();
    return v;
}

bool RectDomain::contains(std::span<const double> xi) const noexcept {
    if (xi.size() != sides_.size()) return false;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (!(xi[i] >= sides_[i].lo && xi[i] <= sides_[i].hi)) return false;
    }
    return true;
}

double RectDomain::eigenfunction_sup_sq() const noexcept {
    double w = 1.0;
    for (const auto& s : sides_) w *= 2.0 / s.length();
    return w;
}

bool operator==(const RectDomain& a, const RectDomain& b) noexcept {
    if (a.sides_.size() != b.sides_.size()) return false;
    for (std::size_t i = 0; i < a.sides_.size(); ++i) {
        if (a.sides_[i].lo != b.sides_[i].lo || a.sides_[i].hi != b.sides_[i].hi) return false;
    }
    return true;
}

namespace {

void check_index(const RectDomain& domain, std::span<const int> m) {
    if (m.size() != domain.dimension()) {
        throw DomainError("multi-index dimension " + std::to_string(m.size()) +
                          " does not match domain dimension " +
                          std::to_string(domain.dimension()));
    }
    for (int mi : m) {
        if (mi < 1) throw DomainError("multi-index entries must be >= 1");
    }
}

// Dirichlet Laplacian eigenvalue before the fractional power.
double laplacian_eigenvalue(const RectDomain& domain, std::span<const int> m) {
    double mu = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double k = m[i] * pi / domain.side(i).length();
        mu += k * k;
    }
    return mu;
}

}  // namespace

double eigenvalue(const RectDomain& domain, double alpha, std::span<const int> m) {
    if (!(alpha > 0.0)) throw DomainError("fractional power alpha must be positive");
    check_index(domain, m);
    return std::pow(laplacian_eigenvalue(domain, m), alpha);
}

double eigenfunction_eval(const RectDomain& domain, std::span<const int> m,
                          std::span<const double> xi) {
    check_index(domain, m);
    if (!domain.contains(xi)) throw DomainError("evaluation point outside the rectangle");
    double value = 1.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& s = domain.side(i);
        const double len = s.length();
        value *= std::sqrt(2.0 / len) * std::sin(m[i] * pi * (xi[i] - s.lo) / len);
    }
    return value;
}

double semigroup_factor(double t, double lambda) {
    if (!(t >= 0.0)) throw DomainError("semigroup time must be non-negative");
    if (!(lambda >= 0.0)) throw DomainError("eigenvalue must be non-negative");
    return std::exp(-lambda * t);
}

std::vector<MultiIndex> canonical_modes(const RectDomain& domain, std::size_t n) {
    const std::size_t d = domain.dimension();
    if (n == 0) return {};

    // Enumerate every index with sum_i (m_i / L_i)^2 <= radius^2, growing the radius until
    // at least n indices are inside. Everything outside has a strictly larger eigenvalue
    // than the radius bound, so the first n of the sorted set are the canonical ones.
    std::vector<double> inv_len(d);
    for (std::size_t i = 0; i < d; ++i) inv_len[i] = 1.0 / domain.side(i).length();

    double min_inv = *std::min_element(inv_len.begin(), inv_len.end());
    double radius = std::sqrt(std::inner_product(inv_len.begin(), inv_len.end(),
                                                 inv_len.begin(), 0.0)) *
                    std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d));

    struct Entry {
        double key;
        MultiIndex index;
    };
    std::vector<Entry> found;
    for (;;) {
        found.clear();
        const double r2 = radius * radius;
        MultiIndex current(d, 1);
        // depth-first over the box, pruned by the partial sum of squares
        auto visit = [&](auto&& self, std::size_t dim, double partial) -> void {
            if (dim == d) {
                found.push_back({partial, current});
                return;
            }
            for (int m = 1;; ++m) {
                const double k = m * inv_len[dim];
                const double next = partial + k * k;
                if (next > r2) break;
                current[dim] = m;
                self(self, dim + 1, next);
            }
        };
        visit(visit, 0, 0.0);
        if (found.size() >= n) break;
        radius = std::max(radius * 1.5, radius + min_inv);
    }

    std::sort(found.begin(), found.end(), [](const Entry& a, const Entry& b) {
        const double scale = std::max(a.key, b.key);
        if (std::abs(a.key - b.key) > 1e-12 * scale) return a.key < b.key;
        return a.index < b.index;
    });

    std::vector<MultiIndex> modes;
    modes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) modes.push_back(std::move(found[i].index));
    return modes;
}

EigenSpectrum EigenSpectrum::rectangle(RectDomain domain, double alpha, std::size_t n) {
    if (!(alpha > 0.0)) throw DomainError("fractional power alpha must be positive");
    if (n == 0) throw DomainError("spectrum needs at least one mode");
    EigenSpectrum s;
    s.modes_ = canonical_modes(domain, n);
    s.lambdas_.reserve(n);
    for (const auto& m : s.modes_) s.lambdas_.push_back(eigenvalue(domain, alpha, m));
    // pow is monotone, but ties in the base ordering may round apart; keep the sequence sorted
    for (std::size_t i = 1; i < n; ++i) {
        s.lambdas_[i] = std::max(s.lambdas_[i], s.lambdas_[i - 1]);
    }
    s.domain_ = std::move(domain);
    s.alpha_ = alpha;
    return s;
}

EigenSpectrum EigenSpectrum::abstract(std::vector<double> lambdas) {
    if (lambdas.empty()) throw DomainError("spectrum needs at least one mode");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!std::isfinite(lambdas[i]) || lambdas[i] < 0.0) {
            throw DomainError("abstract eigenvalues must be finite and non-negative");
        }
        if (i > 0 && lambdas[i] < lambdas[i - 1]) {
            throw DomainError("abstract eigenvalues must be non-decreasing");
        }
    }
    EigenSpectrum s;
    s.lambdas_ = std::move(lambdas);
    return s;
}

const RectDomain& EigenSpectrum::domain() const {
    if (!domain_) throw DomainError("abstract spectrum has no domain");
    return *domain_;
}

EigenSpectrum EigenSpectrum::truncated(std::size_t n) const {
    if (n == 0 || n > size()) {
        throw DomainError("truncation " + std::to_string(n) + " outside [1, " +
                          std::to_string(size()) + "]");
    }
    EigenSpectrum s = *this;
    s.lambdas_.resize(n);
    if (!s.modes_.empty()) s.modes_.resize(n);
    return s;
}

GalerkinState GalerkinState::unit(std::size_t n, std::size_t k) {
    if (k >= n) throw DomainError("unit vector index out of range");
    GalerkinState s(n);
    s[k] = 1.0;
    return s;
}

double GalerkinState::norm_sq() const noexcept {
    double acc = 0.0;
    for (double c : coeffs_) acc += c * c;
    return acc;
}

double GalerkinState::norm() const noexcept { return std::sqrt(norm_sq()); }

GalerkinState project(const GalerkinState& state, std::size_t n) {
    if (n > state.size()) {
        throw DomainError("cannot project " + std::to_string(state.size()) + " modes onto " +
                          std::to_string(n));
    }
    const auto c = state.coeffs();
    return GalerkinState(std::vector<double>(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n)));
}

GalerkinState embed(const GalerkinState& state, std::size_t n_total) {
    if (n_total < state.size()) throw DomainError("embedding target smaller than the state");
    std::vector<double> c(n_total, 0.0);
    std::copy(state.coeffs().begin(), state.coeffs().end(), c.begin());
    return GalerkinState(std::move(c));
}

double distance_sq(const GalerkinState& a, const GalerkinState& b) {
    if (a.size() != b.size()) throw DomainError("state dimensions differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace spdelab
