#include "spdelab/reaction_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "spdelab/errors.hpp"
#include "spdelab/parallel.hpp"
#include "spdelab/stats.hpp"

namespace spdelab {

using std::numbers::pi;

// ---- ScalarFunctionSpec -----------------------------------------------------------------

ScalarFunctionSpec ScalarFunctionSpec::affine(double a, double b) {
    ScalarFunctionSpec g;
    g.form_ = Form::affine;
    g.p0_ = a;
    g.p1_ = b;
    g.lipschitz_ = std::abs(a);
    g.set_analytic_bounds();
    return g;
}

ScalarFunctionSpec ScalarFunctionSpec::sin_perturbed(double c0, double amp, double freq) {
    ScalarFunctionSpec g;
    g.form_ = Form::sin_perturbed;
    g.p0_ = c0;
    g.p1_ = amp;
    g.p2_ = freq;
    g.lipschitz_ = std::abs(amp * freq);
    g.set_analytic_bounds();
    return g;
}

ScalarFunctionSpec ScalarFunctionSpec::atan_scaled(double a) {
    ScalarFunctionSpec g;
    g.form_ = Form::atan_scaled;
    g.p0_ = a;
    g.lipschitz_ = std::abs(a);
    g.set_analytic_bounds();
    return g;
}

ScalarFunctionSpec ScalarFunctionSpec::table(std::vector<double> xs, std::vector<double> ys,
                                             double lipschitz) {
    if (xs.size() < 2 || xs.size() != ys.size()) {
        throw ConfigError("table needs at least two (x, y) pairs of equal length");
    }
    double steepest = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (!(xs[i] > xs[i - 1])) throw ConfigError("table abscissae must be strictly increasing");
        steepest = std::max(steepest, std::abs(ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]));
    }
    if (steepest > lipschitz * (1.0 + 1e-12)) {
        throw ConfigError(fmt::format("table slope {:.6g} exceeds the declared Lipschitz constant {:.6g}",
                                      steepest, lipschitz));
    }
    ScalarFunctionSpec g;
    g.form_ = Form::table;
    g.xs_ = std::move(xs);
    g.ys_ = std::move(ys);
    g.lipschitz_ = lipschitz;
    g.set_analytic_bounds();
    return g;
}

void ScalarFunctionSpec::set_analytic_bounds() {
    const auto range_bounds = [this](double lo, double hi) {
        inf_sq_ = (lo > 0.0 || hi < 0.0) ? std::min(lo * lo, hi * hi) : 0.0;
        sup_sq_ = std::max(lo * lo, hi * hi);
    };
    switch (form_) {
        case Form::affine:
            if (p0_ == 0.0) {
                range_bounds(p1_, p1_);
            } else {
                inf_sq_ = 0.0;
                sup_sq_.reset();
            }
            break;
        case Form::sin_perturbed: {
            const double spread = (p2_ == 0.0) ? 0.0 : std::abs(p1_);
            range_bounds(p0_ - spread, p0_ + spread);
            break;
        }
        case Form::atan_scaled:
            inf_sq_ = 0.0;
            sup_sq_ = p0_ * p0_ * pi * pi / 4.0;
            break;
        case Form::table: {
            const auto [lo, hi] = std::minmax_element(ys_.begin(), ys_.end());
            range_bounds(*lo, *hi);
            break;
        }
    }
}

double ScalarFunctionSpec::operator()(double s) const {
    switch (form_) {
        case Form::affine: return p0_ * s + p1_;
        case Form::sin_perturbed: return p0_ + p1_ * std::sin(p2_ * s);
        case Form::atan_scaled: return p0_ * std::atan(s);
        case Form::table: {
            if (s <= xs_.front()) return ys_.front();
            if (s >= xs_.back()) return ys_.back();
            const auto it = std::upper_bound(xs_.begin(), xs_.end(), s);
            const std::size_t j = static_cast<std::size_t>(it - xs_.begin());
            const double w = (s - xs_[j - 1]) / (xs_[j] - xs_[j - 1]);
            return ys_[j - 1] + w * (ys_[j] - ys_[j - 1]);
        }
    }
    return 0.0;
}

double ScalarFunctionSpec::derivative(double s) const {
    switch (form_) {
        case Form::affine: return p0_;
        case Form::sin_perturbed: return p1_ * p2_ * std::cos(p2_ * s);
        case Form::atan_scaled: return p0_ / (1.0 + s * s);
        case Form::table: break;
    }
    throw DomainError("table functions have no derivative; use finite differences");
}

double ScalarFunctionSpec::asymptotic_slope_sq() const noexcept {
    return form_ == Form::affine ? p0_ * p0_ : 0.0;
}

bool ScalarFunctionSpec::is_constant() const noexcept {
    switch (form_) {
        case Form::affine: return p0_ == 0.0;
        case Form::sin_perturbed: return p1_ == 0.0 || p2_ == 0.0;
        case Form::atan_scaled: return p0_ == 0.0;
        case Form::table:
            return std::all_of(ys_.begin(), ys_.end(), [&](double y) { return y == ys_.front(); });
    }
    return false;
}

std::string ScalarFunctionSpec::describe() const {
    switch (form_) {
        case Form::affine: return fmt::format("affine(a={:.17g}, b={:.17g})", p0_, p1_);
        case Form::sin_perturbed:
            return fmt::format("sin_perturbed(c0={:.17g}, amp={:.17g}, freq={:.17g})", p0_, p1_, p2_);
        case Form::atan_scaled: return fmt::format("atan_scaled(a={:.17g})", p0_);
        case Form::table:
            return fmt::format("table(points={}, lipschitz={:.17g})", xs_.size(), lipschitz_);
    }
    return "unknown";
}

ScalarFunctionSpec ScalarFunctionSpec::with_square_bounds(std::optional<double> inf_sq,
                                                          std::optional<double> sup_sq) const {
    ScalarFunctionSpec g = *this;
    if (inf_sq) {
        if (!(*inf_sq >= 0.0)) throw ConfigError("declared inf_sq must be non-negative");
        g.inf_sq_ = *inf_sq;
    }
    if (sup_sq) {
        if (asymptotic_slope_sq() > 0.0) throw ConfigError("declared sup_sq for an unbounded function");
        g.sup_sq_ = *sup_sq;
    }
    if (g.sup_sq_ && g.inf_sq_ > *g.sup_sq_) throw ConfigError("declared inf_sq exceeds sup_sq");

    // dense linear grid near the origin plus a log grid out to 1e6
    const auto check = [&](double s) {
        const double v = g(s) * g(s);
        const double slack = 1e-12 * std::max(1.0, v);
        if (v < g.inf_sq_ - slack || (g.sup_sq_ && v > *g.sup_sq_ + slack)) {
            throw ConfigError(fmt::format("declared bounds [{:.6g}, {:.6g}] violated at s = {:.6g} "
                                          "where g(s)^2 = {:.6g}",
                                          g.inf_sq_, g.sup_sq_.value_or(INFINITY), s, v));
        }
    };
    for (int i = -100000; i <= 100000; ++i) check(i * 1e-3);
    for (int i = 0; i <= 1200; ++i) {
        const double s = std::pow(10.0, 2.0 + i * 4.0 / 1200.0);
        check(s);
        check(-s);
    }
    return g;
}

// ---- model ------------------------------------------------------------------------------

void ReactionDiffusionModel::validate() const {
    const double d = static_cast<double>(domain.dimension());
    if (!(alpha > d / 2.0)) {
        throw AssumptionError("alpha", fmt::format("rectangle models need alpha > d/2 = {:.6g}, got {:.6g}",
                                                   d / 2.0, alpha));
    }
    if (n == 0) throw DomainError("model needs at least one Galerkin mode");
    if (quad_points != 0 && quad_points < min_quad_points()) {
        throw DomainError(fmt::format("quad_points = {} is below the dealiased minimum {}",
                                      quad_points, min_quad_points()));
    }
}

EigenSpectrum ReactionDiffusionModel::spectrum() const {
    return EigenSpectrum::rectangle(domain, alpha, n);
}

std::size_t ReactionDiffusionModel::min_quad_points() const {
    int largest = 1;
    for (const auto& m : canonical_modes(domain, n)) {
        for (int mi : m) largest = std::max(largest, mi);
    }
    return 2 * static_cast<std::size_t>(largest);
}

std::size_t ReactionDiffusionModel::effective_quad_points() const {
    return quad_points != 0 ? quad_points : min_quad_points();
}

ReactionDiffusionModel ou_preset(std::size_t n, double phi0) {
    ReactionDiffusionModel m;
    m.domain = RectDomain::unit(1);
    m.alpha = 1.0;
    m.psi = ScalarFunctionSpec::affine(0.0, 0.0);
    m.phi = ScalarFunctionSpec::affine(0.0, phi0);
    m.n = n;
    m.quad_points = 0;
    return m;
}

ReactionDiffusionModel bounded_test_model() {
    ReactionDiffusionModel m;
    m.domain = RectDomain::unit(1);
    m.alpha = 2.0;
    m.phi = ScalarFunctionSpec::sin_perturbed(1.0, 0.1, 1.0);
    m.psi = ScalarFunctionSpec::atan_scaled(0.5);
    m.n = 16;
    m.quad_points = 32;
    return m;
}

// ---- pseudo-spectral callbacks ----------------------------------------------------------

namespace {

// Interior tensor grid xi_k = lo + k L / (Q + 1), k = 1..Q per dimension. With equal
// weights prod L_i / (Q + 1) the quadrature is the discrete sine transform, exact for
// products of sines whose summed frequencies stay below 2 (Q + 1).
struct SpectralGrid {
    Eigen::MatrixXd basis;     // n x G, basis(m, g) = e_m(xi_g)
    double weight = 0.0;
    Eigen::VectorXd ones;      // exact coefficients <1, e_m>
};

std::shared_ptr<const SpectralGrid> make_grid(const ReactionDiffusionModel& model) {
    const auto& domain = model.domain;
    const std::size_t d = domain.dimension();
    const std::size_t q = model.effective_quad_points();
    const auto modes = canonical_modes(domain, model.n);

    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= q;

    auto grid = std::make_shared<SpectralGrid>();
    grid->basis.resize(static_cast<Eigen::Index>(model.n), static_cast<Eigen::Index>(total));
    grid->weight = 1.0;
    for (std::size_t i = 0; i < d; ++i) grid->weight *= domain.side(i).length() / static_cast<double>(q + 1);
    grid->ones.resize(static_cast<Eigen::Index>(model.n));

    std::vector<std::size_t> k(d);
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        const auto& m = modes[mi];
        double one = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double len = domain.side(i).length();
            one *= std::sqrt(2.0 / len) * len * (m[i] % 2 == 1 ? 2.0 : 0.0) / (m[i] * pi);
        }
        grid->ones(static_cast<Eigen::Index>(mi)) = one;

        for (std::size_t g = 0; g < total; ++g) {
            std::size_t rest = g;
            double value = 1.0;
            for (std::size_t i = d; i-- > 0;) {
                const std::size_t ki = rest % q + 1;
                rest /= q;
                const double len = domain.side(i).length();
                value *= std::sqrt(2.0 / len) *
                         std::sin(m[i] * pi * static_cast<double>(ki) / static_cast<double>(q + 1));
            }
            grid->basis(static_cast<Eigen::Index>(mi), static_cast<Eigen::Index>(g)) = value;
        }
    }
    return grid;
}

using ConstMap = Eigen::Map<const Eigen::VectorXd>;
using Map = Eigen::Map<Eigen::VectorXd>;

ConstMap view(std::span<const double> s) { return ConstMap(s.data(), static_cast<Eigen::Index>(s.size())); }
Map view(std::span<double> s) { return Map(s.data(), static_cast<Eigen::Index>(s.size())); }

// Per-thread grid buffers; sized on use so one thread can serve several models.
struct Scratch {
    Eigen::VectorXd u, w, h, f;
};

Scratch& scratch(Eigen::Index points) {
    thread_local Scratch s;
    s.u.resize(points);
    s.w.resize(points);
    s.h.resize(points);
    s.f.resize(points);
    return s;
}

}  // namespace

CoefficientCallbacks build_callbacks(const ReactionDiffusionModel& model) {
    model.validate();
    CoefficientCallbacks cb;
    const auto psi = model.psi;
    const auto phi = model.phi;

    const bool phi_affine_varying =
        phi.form() == ScalarFunctionSpec::Form::affine && !phi.is_constant();
    const auto grid = make_grid(model);

    // Affine parts are applied in coefficient space, with the constant projected exactly.
    if (psi.form() == ScalarFunctionSpec::Form::affine) {
        const double a = psi.derivative(0.0);
        const double b = psi(0.0);
        if (a != 0.0 || b != 0.0) {
            const Eigen::VectorXd one = grid->ones;
            cb.drift = [a, b, one](std::span<const double> x, std::span<double> out) {
                view(out) = a * view(x) + b * one;
            };
            cb.drift_jacobian_apply = [a](std::span<const double>, std::span<const double> h,
                                          std::span<double> out) { view(out) = a * view(h); };
        }
    } else {
        cb.drift = [grid, psi](std::span<const double> x, std::span<double> out) {
            auto& s = scratch(grid->basis.cols());
            s.u.noalias() = grid->basis.transpose() * view(x);
            for (Eigen::Index g = 0; g < s.u.size(); ++g) s.f(g) = psi(s.u(g));
            view(out).noalias() = grid->weight * (grid->basis * s.f);
        };
        if (psi.has_derivative()) {
            cb.drift_jacobian_apply = [grid, psi](std::span<const double> x, std::span<const double> h,
                                                  std::span<double> out) {
                auto& s = scratch(grid->basis.cols());
                s.u.noalias() = grid->basis.transpose() * view(x);
                s.h.noalias() = grid->basis.transpose() * view(h);
                for (Eigen::Index g = 0; g < s.u.size(); ++g) s.f(g) = psi.derivative(s.u(g)) * s.h(g);
                view(out).noalias() = grid->weight * (grid->basis * s.f);
            };
        }
    }

    // diffusion
    if (phi.is_constant()) {
        cb.additive_level = phi(0.0);
    } else if (phi_affine_varying) {
        const double a = phi.derivative(0.0);
        const double b = phi(0.0);
        cb.diffusion_apply = [grid, a, b](std::span<const double> x, std::span<const double> dw,
                                          std::span<double> out) {
            auto& s = scratch(grid->basis.cols());
            s.u.noalias() = grid->basis.transpose() * view(x);
            s.w.noalias() = grid->basis.transpose() * view(dw);
            s.f = s.u.cwiseProduct(s.w);
            view(out).noalias() = (a * grid->weight) * (grid->basis * s.f);
            view(out) += b * view(dw);
        };
        cb.diffusion_jacobian_apply = [grid, a](std::span<const double>, std::span<const double> h,
                                                std::span<const double> dw, std::span<double> out) {
            auto& s = scratch(grid->basis.cols());
            s.h.noalias() = grid->basis.transpose() * view(h);
            s.w.noalias() = grid->basis.transpose() * view(dw);
            s.f = s.h.cwiseProduct(s.w);
            view(out).noalias() = (a * grid->weight) * (grid->basis * s.f);
        };
    } else {
        cb.diffusion_apply = [grid, phi](std::span<const double> x, std::span<const double> dw,
                                         std::span<double> out) {
            auto& s = scratch(grid->basis.cols());
            s.u.noalias() = grid->basis.transpose() * view(x);
            s.w.noalias() = grid->basis.transpose() * view(dw);
            for (Eigen::Index g = 0; g < s.u.size(); ++g) s.f(g) = phi(s.u(g)) * s.w(g);
            view(out).noalias() = grid->weight * (grid->basis * s.f);
        };
        if (phi.has_derivative()) {
            cb.diffusion_jacobian_apply = [grid, phi](std::span<const double> x, std::span<const double> h,
                                                      std::span<const double> dw, std::span<double> out) {
                auto& s = scratch(grid->basis.cols());
                s.u.noalias() = grid->basis.transpose() * view(x);
                s.h.noalias() = grid->basis.transpose() * view(h);
                s.w.noalias() = grid->basis.transpose() * view(dw);
                for (Eigen::Index g = 0; g < s.u.size(); ++g) {
                    s.f(g) = phi.derivative(s.u(g)) * s.h(g) * s.w(g);
                }
                view(out).noalias() = grid->weight * (grid->basis * s.f);
            };
        }
    }
    return cb;
}

Simulator make_simulator(const ReactionDiffusionModel& model, const SchemeConfig& scheme,
                         const NoiseStream& noise) {
    return Simulator(model.spectrum(), build_callbacks(model), scheme, noise);
}

// ---- regularity data --------------------------------------------------------------------

KernelSpec exact_Ksigma(const ReactionDiffusionModel& model) {
    const double c = model.phi.lipschitz();
    if (c == 0.0) return KernelSpec::constant(0.0);
    const auto& domain = model.domain;
    const std::size_t d = domain.dimension();
    const double weight = c * c * domain.eigenfunction_sup_sq();

    if (d == 1) {
        // every mode is in the power law: 2 lambda_m = 2 (pi / L)^{2 alpha} m^{2 alpha}
        const double base = pi / domain.side(0).length();
        return KernelSpec::mode_series({}, {},
                                       PowerLawTail{weight, 2.0 * std::pow(base, 2.0 * model.alpha),
                                                    2.0 * model.alpha, 0, true});
    }

    // Explicit prefix, then a Weyl-type lower bound on the rates: the unit cubes [m - 1, m]
    // of the first k indices lie inside the quarter ball of radius sqrt(mu_k), so
    // k <= V mu_k^{d/2} with V = omega_d / 2^d * prod L_i / pi.
    constexpr std::size_t prefix = 20000;
    const auto modes = canonical_modes(domain, prefix);
    std::vector<double> weights(prefix, weight), rates(prefix);
    for (std::size_t i = 0; i < prefix; ++i) rates[i] = 2.0 * eigenvalue(domain, model.alpha, modes[i]);

    const double dd = static_cast<double>(d);
    double volume = std::pow(pi, dd / 2.0) / std::tgamma(dd / 2.0 + 1.0) / std::pow(2.0, dd);
    for (std::size_t i = 0; i < d; ++i) volume *= domain.side(i).length() / pi;
    const double q = 2.0 * model.alpha / dd;
    return KernelSpec::mode_series(std::move(weights), std::move(rates),
                                   PowerLawTail{weight, 2.0 * std::pow(volume, -q), q, 0, false});
}

RegularityProfile build_profile(const ReactionDiffusionModel& model) {
    model.validate();
    RegularityProfile p;
    p.kb = KernelSpec::lipschitz(model.psi.lipschitz());
    p.ksigma = exact_Ksigma(model);
    p.lambda_sigma = model.phi.inf_sq();
    p.lambda_bar_sigma = model.phi.sup_sq();
    compute_t0(p);
    return p;
}

GrowthCheck check_growth_condition(const ReactionDiffusionModel& model, double eps0, double C0) {
    if (!(eps0 > 0.0) || !(C0 > 0.0)) throw DomainError("eps0 and C0 must be positive");
    GrowthCheck r;
    r.slope_sq = model.phi.asymptotic_slope_sq() + model.psi.asymptotic_slope_sq();
    r.worst_margin = INFINITY;
    const auto probe = [&](double s) {
        const double f = model.phi(s);
        const double g = model.psi(s);
        const double margin = eps0 * s * s + C0 - (f * f + g * g);
        if (margin < r.worst_margin) {
            r.worst_margin = margin;
            r.worst_s = s;
        }
    };
    probe(0.0);
    constexpr int points = 601;
    for (int i = 0; i < points; ++i) {
        const double s = std::pow(10.0, -3.0 + 6.0 * i / (points - 1));
        probe(s);
        probe(-s);
    }
    r.holds = r.worst_margin >= 0.0 && r.slope_sq <= eps0;
    return r;
}

// ---- moment harness ---------------------------------------------------------------------

MomentTable moment_harness(const Simulator& sim, const GalerkinState& x0,
                           const std::vector<double>& checkpoints, std::size_t paths,
                           unsigned threads) {
    if (checkpoints.empty()) throw DomainError("moment harness needs at least one checkpoint");
    if (paths < 2) throw DomainError("moment harness needs at least two paths");
    std::vector<std::size_t> steps;
    for (double t : checkpoints) {
        if (!(t >= 0.0) || t > sim.t_end() * (1.0 + 1e-12)) {
            throw DomainError(fmt::format("checkpoint {:.6g} outside [0, t_end = {:.6g}]", t, sim.t_end()));
        }
        const auto k = static_cast<std::size_t>(std::llround(t / sim.dt()));
        if (!steps.empty() && k <= steps.back()) throw DomainError("checkpoints must be strictly increasing");
        steps.push_back(std::min(k, sim.steps()));
    }

    const std::size_t cps = steps.size();
    std::vector<double> samples(paths * cps);
    parallel_for(paths, threads, [&](std::size_t p) {
        std::size_t next = 0;
        sim.simulate_path(x0, static_cast<std::uint32_t>(p),
                          [&](std::size_t step, double, std::span<const double> x) {
                              while (next < cps && steps[next] == step) {
                                  double sq = 0.0;
                                  for (double v : x) sq += v * v;
                                  samples[p * cps + next++] = sq;
                              }
                          });
    });

    MomentTable table;
    for (std::size_t c = 0; c < cps; ++c) {
        RunningStats s;
        for (std::size_t p = 0; p < paths; ++p) s.add(samples[p * cps + c]);
        if (!std::isfinite(s.mean())) {
            throw NumericalError(fmt::format("second moment not finite at t = {:.6g}",
                                             static_cast<double>(steps[c]) * sim.dt()));
        }
        table.rows.push_back({static_cast<double>(steps[c]) * sim.dt(), s.mean(), s.stderr_of_mean()});
    }

    if (table.rows.size() < 3) {
        table.verdict = "insufficient";
    } else {
        const auto* last = &table.rows[table.rows.size() - 3];
        bool plateau = true;
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) {
                const double gap = std::abs(last[i].second_moment - last[j].second_moment);
                if (gap > 2.0 * (last[i].std_error + last[j].std_error)) plateau = false;
            }
        }
        table.verdict = plateau ? "bounded" : "not_plateaued";
    }
    return table;
}

void write_moment_csv(std::ostream& out, const MomentTable& table) {
    out << "t,second_moment,stderr\n";
    for (const auto& r : table.rows) {
        out << fmt::format("{:.17g},{:.17g},{:.17g}\n", r.t, r.second_moment, r.std_error);
    }
}

void write_field_csv(std::ostream& out, const ReactionDiffusionModel& model,
                     const GalerkinState& state, std::size_t points) {
    if (points < 2) throw DomainError("field grid needs at least two points per dimension");
    const auto modes = canonical_modes(model.domain, state.size());
    const std::size_t d = model.domain.dimension();
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= points;

    out << "xi,u(xi)\n";
    std::vector<double> xi(d);
    for (std::size_t g = 0; g < total; ++g) {
        std::size_t rest = g;
        for (std::size_t i = d; i-- > 0;) {
            const auto& side = model.domain.side(i);
            xi[i] = side.lo + side.length() * static_cast<double>(rest % points) /
                                  static_cast<double>(points - 1);
            rest /= points;
        }
        double u = 0.0;
        for (std::size_t m = 0; m < modes.size(); ++m) u += state[m] * eigenfunction_eval(model.domain, modes[m], xi);
        for (std::size_t i = 0; i < d; ++i) out << (i ? " " : "") << fmt::format("{:.17g}", xi[i]);
        out << ',' << fmt::format("{:.17g}", u) << '\n';
    }
}

}  // namespace spdelab
