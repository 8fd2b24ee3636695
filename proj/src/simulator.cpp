#include "spdelab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "spdelab/errors.hpp"

namespace spdelab {

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::exponential_mild: return "exponential_mild";
        case Scheme::exponential_euler: return "exponential_euler";
        case Scheme::euler_maruyama: return "euler_maruyama";
    }
    return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
    if (name == "exponential_mild") return Scheme::exponential_mild;
    if (name == "exponential_euler") return Scheme::exponential_euler;
    if (name == "euler_maruyama") return Scheme::euler_maruyama;
    throw ConfigError("unknown scheme '" + name +
                      "' (expected exponential_mild, exponential_euler or euler_maruyama)");
}

void SchemeConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("t_end must be non-negative");
}

std::size_t SchemeConfig::steps() const {
    validate();
    if (t_end == 0.0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t_end / dt)));
}

double SchemeConfig::realized_dt() const {
    const std::size_t n = steps();
    return n == 0 ? dt : t_end / static_cast<double>(n);
}

double SchemeConfig::stiff_dt(const EigenSpectrum& spectrum) {
    const double lmax = spectrum.lambda_max();
    return lmax > 0.0 ? std::min(1e-3, 0.1 / lmax) : 1e-3;
}

bool CoefficientCallbacks::has_jacobians() const noexcept {
    const bool drift_ok = !drift || static_cast<bool>(drift_jacobian_apply);
    const bool diffusion_ok = additive_level.has_value() || static_cast<bool>(diffusion_jacobian_apply);
    return drift_ok && diffusion_ok;
}

CoefficientCallbacks CoefficientCallbacks::ornstein_uhlenbeck(double level) {
    CoefficientCallbacks cb;
    cb.additive_level = level;
    return cb;
}

struct Simulator::Workspace {
    explicit Workspace(std::size_t n) : b(n), s(n), jb(n), js(n), dw(n) {}
    std::vector<double> b, s, jb, js, dw;
};

Simulator::Simulator(EigenSpectrum spectrum, CoefficientCallbacks callbacks, SchemeConfig scheme,
                     NoiseStream noise)
    : spectrum_(std::move(spectrum)),
      callbacks_(std::move(callbacks)),
      scheme_(scheme),
      noise_(noise) {
    if (!callbacks_.additive_level && !callbacks_.diffusion_apply) {
        throw DomainError("diffusion callback missing (set additive_level for sigma = c Id)");
    }
    steps_ = scheme_.steps();
    dt_ = scheme_.realized_dt();
    sqrt_dt_ = std::sqrt(dt_);

    const std::size_t n = spectrum_.size();
    a_.resize(n);
    c_.resize(n);
    g_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double l = spectrum_.lambda(i);
        const double e = std::exp(-l * dt_);
        switch (scheme_.scheme) {
            case Scheme::exponential_mild:
                a_[i] = e;
                c_[i] = l > 0.0 ? -std::expm1(-l * dt_) / l : dt_;
                g_[i] = l > 0.0 ? std::sqrt(-std::expm1(-2.0 * l * dt_) / (2.0 * l * dt_)) : 1.0;
                break;
            case Scheme::exponential_euler:
                a_[i] = e;
                c_[i] = e * dt_;
                g_[i] = e;
                break;
            case Scheme::euler_maruyama:
                a_[i] = 1.0 - l * dt_;
                c_[i] = dt_;
                g_[i] = 1.0;
                break;
        }
    }
}

Simulator Simulator::with_horizon(double t_end) const {
    SchemeConfig s = scheme_;
    s.t_end = t_end;
    return Simulator(spectrum_, callbacks_, s, noise_);
}

void Simulator::check_state(const GalerkinState& x, const char* what) const {
    if (x.size() != dimension()) {
        throw DomainError(fmt::format("{} has {} modes, spectrum has {}", what, x.size(), dimension()));
    }
}

void Simulator::draw_increments(std::uint32_t path_id, std::size_t step, std::span<double> dw) const {
    noise_.fill_normals(path_id, static_cast<std::uint32_t>(step), dw);
    for (double& v : dw) v *= sqrt_dt_;
}

void Simulator::check_finite(std::span<const double> x, std::size_t step, std::uint32_t path_id) const {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw NumericalError(fmt::format("non-finite state at step {} (t = {:.6g}) of path {}",
                                             step, static_cast<double>(step) * dt_, path_id));
        }
    }
}

void Simulator::advance(std::span<double> x, std::span<const double> dw, Workspace& ws) const {
    const std::size_t n = x.size();
    if (callbacks_.drift) {
        callbacks_.drift(x, ws.b);
    } else {
        std::fill(ws.b.begin(), ws.b.end(), 0.0);
    }
    if (callbacks_.additive_level) {
        const double level = *callbacks_.additive_level;
        for (std::size_t i = 0; i < n; ++i) ws.s[i] = level * dw[i];
    } else {
        callbacks_.diffusion_apply(x, dw, ws.s);
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = a_[i] * x[i] + c_[i] * ws.b[i] + g_[i] * ws.s[i];
}

// Linearized step at the pre-step state x, same per-mode factors as the base path.
void Simulator::advance_tangent(std::span<const double> x, std::span<double> h,
                                std::span<const double> dw, Workspace& ws) const {
    const std::size_t n = h.size();
    if (callbacks_.drift) {
        callbacks_.drift_jacobian_apply(x, h, ws.jb);
    } else {
        std::fill(ws.jb.begin(), ws.jb.end(), 0.0);
    }
    if (callbacks_.additive_level) {
        std::fill(ws.js.begin(), ws.js.end(), 0.0);
    } else {
        callbacks_.diffusion_jacobian_apply(x, h, dw, ws.js);
    }
    for (std::size_t i = 0; i < n; ++i) h[i] = a_[i] * h[i] + c_[i] * ws.jb[i] + g_[i] * ws.js[i];
}

GalerkinState Simulator::step(const GalerkinState& x, std::span<const double> dw) const {
    check_state(x, "state");
    if (dw.size() != dimension()) throw DomainError("noise increment has the wrong length");
    Workspace ws(dimension());
    GalerkinState out = x;
    advance(out.coeffs(), dw, ws);
    check_finite(out.coeffs(), 1, 0);
    return out;
}

GalerkinState Simulator::simulate_path(const GalerkinState& x0, std::uint32_t path_id,
                                       const Observer& observer) const {
    check_state(x0, "initial state");
    Workspace ws(dimension());
    GalerkinState x = x0;
    if (observer) observer(0, 0.0, x.coeffs());
    for (std::size_t k = 0; k < steps_; ++k) {
        draw_increments(path_id, k, ws.dw);
        advance(x.coeffs(), ws.dw, ws);
        check_finite(x.coeffs(), k + 1, path_id);
        if (observer) observer(k + 1, static_cast<double>(k + 1) * dt_, x.coeffs());
    }
    return x;
}

std::vector<GalerkinState> Simulator::derivative_flows(const GalerkinState& x0,
                                                       std::span<const GalerkinState> directions,
                                                       std::uint32_t path_id, GalerkinState& x_out,
                                                       const FlowObserver& observer) const {
    check_state(x0, "initial state");
    for (const auto& v : directions) check_state(v, "direction");
    if (!callbacks_.has_jacobians()) {
        throw DomainError("derivative flow needs Jacobian callbacks; use finite differences instead");
    }
    const std::size_t n = dimension();
    Workspace ws(n);
    std::vector<double> x(x0.coeffs().begin(), x0.coeffs().end());
    std::vector<std::vector<double>> h;
    h.reserve(directions.size());
    for (const auto& v : directions) h.emplace_back(v.coeffs().begin(), v.coeffs().end());

    if (observer) observer(0, 0.0, x, h);
    for (std::size_t k = 0; k < steps_; ++k) {
        draw_increments(path_id, k, ws.dw);
        for (auto& hj : h) advance_tangent(x, hj, ws.dw, ws);
        advance(x, ws.dw, ws);
        check_finite(x, k + 1, path_id);
        for (const auto& hj : h) check_finite(hj, k + 1, path_id);
        if (observer) observer(k + 1, static_cast<double>(k + 1) * dt_, x, h);
    }
    x_out = GalerkinState(std::move(x));
    std::vector<GalerkinState> out;
    out.reserve(h.size());
    for (auto& hj : h) out.emplace_back(std::move(hj));
    return out;
}

FlowResult Simulator::derivative_flow(const GalerkinState& x0, const GalerkinState& v,
                                      std::uint32_t path_id) const {
    FlowResult r;
    auto tangents = derivative_flows(x0, std::span<const GalerkinState>(&v, 1), path_id, r.x);
    r.tangent = std::move(tangents.front());
    return r;
}

std::pair<GalerkinState, GalerkinState> Simulator::coupled_pair(const GalerkinState& x0,
                                                                const GalerkinState& y0,
                                                                std::uint32_t path_id) const {
    return {simulate_path(x0, path_id), simulate_path(y0, path_id)};
}

OuMoments ou_exact(std::span<const double> x0, double t, std::span<const double> lambdas,
                   double phi0) {
    if (!(t >= 0.0)) throw DomainError("time must be non-negative");
    if (x0.size() != lambdas.size()) throw DomainError("x0 and lambdas differ in length");
    OuMoments m;
    m.mean.resize(x0.size());
    m.variance.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const double l = lambdas[i];
        if (l < 0.0) throw DomainError("eigenvalue must be non-negative");
        m.mean[i] = std::exp(-l * t) * x0[i];
        m.variance[i] = l > 0.0 ? phi0 * phi0 * (-std::expm1(-2.0 * l * t)) / (2.0 * l) : phi0 * phi0 * t;
    }
    return m;
}

void write_trajectories_csv(std::ostream& out, const Simulator& sim, const GalerkinState& x0,
                            std::span<const std::uint32_t> path_ids, std::size_t every) {
    if (every == 0) throw DomainError("output stride must be positive");
    out << "path_id,step,t";
    for (std::size_t i = 0; i < sim.dimension(); ++i) out << ",coeff_" << i;
    out << '\n';
    const std::size_t last = sim.steps();
    for (std::uint32_t id : path_ids) {
        sim.simulate_path(x0, id, [&](std::size_t step, double t, std::span<const double> x) {
            if (step % every != 0 && step != last) return;
            out << id << ',' << step << ',' << fmt::format("{:.17g}", t);
            for (double v : x) out << ',' << fmt::format("{:.17g}", v);
            out << '\n';
        });
    }
}

}  // namespace spdelab
