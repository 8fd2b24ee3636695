#include "spdelab/estimators.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "spdelab/errors.hpp"
#include "spdelab/parallel.hpp"
#include "spdelab/stats.hpp"

namespace spdelab {

// ---- test functionals -------------------------------------------------------------------

namespace {

void require_mode(std::span<const double> x, std::size_t k) {
    if (k >= x.size()) throw DomainError(fmt::format("functional uses mode {} of a {}-mode state", k, x.size()));
}

}  // namespace

TestFunctional TestFunctional::coordinate(std::size_t k) {
    TestFunctional f;
    f.id = fmt::format("coordinate:{}", k);
    f.eval = [k](std::span<const double> x) { require_mode(x, k); return x[k]; };
    f.grad = [k](std::span<const double> x, std::span<double> out) {
        require_mode(x, k);
        std::fill(out.begin(), out.end(), 0.0);
        out[k] = 1.0;
    };
    f.grad_bound = 1.0;
    return f;
}

TestFunctional TestFunctional::constant(double c) {
    TestFunctional f;
    f.id = fmt::format("constant:{:.17g}", c);
    f.eval = [c](std::span<const double>) { return c; };
    f.grad = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    f.bounded = true;
    f.sup_abs = std::abs(c);
    f.strictly_positive = c > 0.0;
    f.floor = c > 0.0 ? c : 0.0;
    return f;
}

TestFunctional TestFunctional::sin_coordinate(std::size_t k) {
    TestFunctional f = shifted_sin(k, 0.0);
    f.id = fmt::format("sin:{}", k);
    return f;
}

TestFunctional TestFunctional::shifted_sin(std::size_t k, double shift) {
    TestFunctional f;
    f.id = fmt::format("shifted_sin:{}:{:.17g}", k, shift);
    f.eval = [k, shift](std::span<const double> x) { require_mode(x, k); return shift + std::sin(x[k]); };
    f.grad = [k](std::span<const double> x, std::span<double> out) {
        require_mode(x, k);
        std::fill(out.begin(), out.end(), 0.0);
        out[k] = std::cos(x[k]);
    };
    f.bounded = true;
    f.sup_abs = std::abs(shift) + 1.0;
    f.strictly_positive = shift > 1.0;
    f.floor = shift > 1.0 ? shift - 1.0 : 0.0;
    f.grad_bound = 1.0;
    return f;
}

TestFunctional TestFunctional::parse(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    const auto index = [&](std::size_t i) -> std::size_t {
        if (i >= parts.size()) throw ConfigError("functional '" + spec + "' is missing a field");
        try {
            const long v = std::stol(parts[i]);
            if (v < 0) throw ConfigError("functional '" + spec + "' has a negative mode index");
            return static_cast<std::size_t>(v);
        } catch (const std::logic_error&) {
            throw ConfigError("functional '" + spec + "' has a malformed mode index");
        }
    };
    const auto number = [&](std::size_t i) {
        if (i >= parts.size()) throw ConfigError("functional '" + spec + "' is missing a field");
        try {
            return std::stod(parts[i]);
        } catch (const std::logic_error&) {
            throw ConfigError("functional '" + spec + "' has a malformed number");
        }
    };
    if (parts.empty()) throw ConfigError("empty functional specification");
    const auto& kind = parts[0];
    if (kind == "coordinate" && parts.size() == 2) return coordinate(index(1));
    if (kind == "constant" && parts.size() == 2) return constant(number(1));
    if (kind == "sin" && parts.size() == 2) return sin_coordinate(index(1));
    if (kind == "shifted_sin" && parts.size() == 3) return shifted_sin(index(1), number(2));
    throw ConfigError("unknown functional '" + spec +
                      "' (coordinate:K, constant:C, sin:K, shifted_sin:K:SHIFT)");
}

double TestFunctional::grad_norm_sq(std::span<const double> x) const {
    thread_local std::vector<double> g;
    g.assign(x.size(), 0.0);
    grad(x, g);
    double s = 0.0;
    for (double v : g) s += v * v;
    return s;
}

void validate_functional(const TestFunctional& f, const EigenSpectrum& spectrum, std::size_t samples,
                         std::uint64_t seed) {
    const NoiseStream noise(seed, 0x56414c44u);
    const std::size_t n = spectrum.size();
    std::vector<double> x(n);
    for (std::size_t s = 0; s < samples; ++s) {
        noise.fill_normals(static_cast<std::uint32_t>(s), 0, x);
        for (std::size_t i = 0; i < n; ++i) {
            const double l = spectrum.lambda(i);
            x[i] /= l > 0.0 ? std::sqrt(l) : 1.0;
        }
        const double v = f(x);
        const double tol = 1e-12 * std::max(1.0, std::abs(v));
        if (!std::isfinite(v)) throw DomainError(fmt::format("{}: non-finite value on sample {}", f.id, s));
        if (f.bounded && std::abs(v) > f.sup_abs + tol) {
            throw DomainError(fmt::format("{}: |f| = {:.6g} exceeds declared bound {:.6g}", f.id, v, f.sup_abs));
        }
        if (f.strictly_positive && v < f.floor - tol) {
            throw DomainError(fmt::format("{}: f = {:.6g} below declared floor {:.6g}", f.id, v, f.floor));
        }
        const double g = std::sqrt(f.grad_norm_sq(x));
        if (g > f.grad_bound * (1.0 + 1e-12) + 1e-15) {
            throw DomainError(fmt::format("{}: |grad f| = {:.6g} exceeds declared bound {:.6g}", f.id, g,
                                          f.grad_bound));
        }
    }
}

// ---- Monte Carlo primitives -------------------------------------------------------------

namespace {

void require_paths(const McConfig& cfg) {
    if (cfg.paths < 2) throw DomainError("Monte Carlo needs at least two paths");
    if (cfg.paths > std::numeric_limits<std::uint32_t>::max()) throw DomainError("too many paths");
}

void require_finite(std::span<const double> values, const char* what) {
    for (std::size_t p = 0; p < values.size(); ++p) {
        if (!std::isfinite(values[p])) {
            throw NumericalError(fmt::format("{} is not finite on path {}", what, p));
        }
    }
}

// Runs fn(path, slot) for every path; slot has `width` entries owned by that path.
template <class Fn>
std::vector<double> sample_paths(const McConfig& cfg, std::size_t width, Fn&& fn) {
    require_paths(cfg);
    std::vector<double> out(cfg.paths * width);
    parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
        fn(static_cast<std::uint32_t>(p), std::span<double>(out.data() + p * width, width));
    });
    return out;
}

// Column c of a row-major (paths x width) sample table.
std::vector<double> column(const std::vector<double>& table, std::size_t width, std::size_t c) {
    std::vector<double> col(table.size() / width);
    for (std::size_t p = 0; p < col.size(); ++p) col[p] = table[p * width + c];
    return col;
}

Estimate estimate(std::span<const double> values) {
    const RunningStats s = summarize(values);
    return {s.mean(), s.stderr_of_mean()};
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

Estimate mc_expect(const Simulator& sim, const TestFunctional& f, const GalerkinState& x,
                   const McConfig& cfg) {
    const auto values = sample_paths(cfg, 1, [&](std::uint32_t p, std::span<double> out) {
        out[0] = f(sim.simulate_path(x, p).coeffs());
    });
    require_finite(values, "f(X_t)");
    return estimate(values);
}

Estimate grad_via_flow(const Simulator& sim, const TestFunctional& f, const GalerkinState& x,
                       const GalerkinState& v, const McConfig& cfg) {
    const auto values = sample_paths(cfg, 1, [&](std::uint32_t p, std::span<double> out) {
        const auto flow = sim.derivative_flow(x, v, p);
        std::vector<double> g(x.size());
        f.grad(flow.x.coeffs(), g);
        out[0] = dot(g, flow.tangent.coeffs());
    });
    require_finite(values, "<grad f(X_t), grad_v X_t>");
    return estimate(values);
}

Estimate grad_via_fd(const Simulator& sim, const TestFunctional& f, const GalerkinState& x,
                     const GalerkinState& v, double eps, const McConfig& cfg) {
    if (!(eps > 0.0)) throw DomainError("finite-difference step must be positive");
    if (v.size() != x.size()) throw DomainError("direction and state differ in length");
    GalerkinState shifted = x;
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] += eps * v[i];
    const auto values = sample_paths(cfg, 1, [&](std::uint32_t p, std::span<double> out) {
        const auto [a, b] = sim.coupled_pair(shifted, x, p);
        out[0] = (f(a.coeffs()) - f(b.coeffs())) / eps;
    });
    require_finite(values, "finite-difference quotient");
    return estimate(values);
}

// ---- reports ----------------------------------------------------------------------------

void CheckReport::decide() { pass = lhs - k * lhs_se <= rhs + k * rhs_se; }

nlohmann::json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

nlohmann::json to_json(const CheckReport& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["functional"] = r.functional;
    j["direction"] = r.direction;
    j["t"] = json_number(r.t);
    j["lhs"] = json_number(r.lhs);
    j["lhs_se"] = json_number(r.lhs_se);
    j["rhs"] = json_number(r.rhs);
    j["rhs_se"] = json_number(r.rhs_se);
    j["constant"] = json_number(r.constant);
    j["k"] = r.k;
    j["pass"] = r.pass;
    j["paths"] = r.paths;
    j["dt"] = json_number(r.dt);
    j["n"] = r.n;
    j["seed"] = r.seed;
    j["scheme"] = r.scheme;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

namespace {

CheckReport base_report(std::string id, const Simulator& sim, const McConfig& cfg, double k) {
    if (!(k >= 0.0)) throw DomainError("slack multiplier k must be non-negative");
    CheckReport r;
    r.id = std::move(id);
    r.t = static_cast<double>(sim.steps()) * sim.dt();
    r.k = k;
    r.paths = cfg.paths;
    r.dt = sim.dt();
    r.n = sim.dimension();
    r.seed = sim.noise().seed();
    r.scheme = to_string(sim.scheme().scheme);
    r.note = "finite n and dt; the inequality is asserted for the limit system";
    return r;
}

double norm_sq(const GalerkinState& v) {
    const double s = v.norm_sq();
    if (!(s > 0.0)) throw DomainError("direction v must be non-zero");
    return s;
}

// Per path: <grad f(X_t), grad_v X_t>, |grad f(X_t)|^2, f(X_t).
std::vector<double> flow_samples(const Simulator& sim, const TestFunctional& f, const GalerkinState& x,
                                 const GalerkinState& v, const McConfig& cfg) {
    auto table = sample_paths(cfg, 3, [&](std::uint32_t p, std::span<double> out) {
        const auto flow = sim.derivative_flow(x, v, p);
        std::vector<double> g(x.size());
        f.grad(flow.x.coeffs(), g);
        out[0] = dot(g, flow.tangent.coeffs());
        out[1] = dot(g, g);
        out[2] = f(flow.x.coeffs());
    });
    require_finite(table, "functional sample");
    return table;
}

}  // namespace

CheckReport check_gradient_bound(const Simulator& sim, const RegularityProfile& profile,
                                 const TestFunctional& f, const GalerkinState& x,
                                 const GalerkinState& v, const McConfig& cfg, double k) {
    auto r = base_report("gradient", sim, cfg, k);
    r.functional = f.id;
    const double vv = norm_sq(v);
    const auto table = flow_samples(sim, f, x, v, cfg);
    const auto g = estimate(column(table, 3, 0));
    const auto q = estimate(column(table, 3, 1));
    r.constant = gradient_constant(r.t, profile.t0);
    r.lhs = g.mean * g.mean / vv;
    r.lhs_se = 2.0 * std::abs(g.mean) * g.std_error / vv;
    r.rhs = r.constant * q.mean;
    r.rhs_se = r.constant * q.std_error;
    r.decide();
    return r;
}

CheckReport check_log_harnack(const Simulator& sim, const RegularityProfile& profile,
                              const TestFunctional& f, const GalerkinState& x,
                              const GalerkinState& y, const McConfig& cfg, double k) {
    if (!f.strictly_positive) throw ConfigError("log-Harnack check needs a strictly positive functional");
    if (!(profile.lambda_sigma > 0.0)) {
        throw AssumptionError("A2", "log-Harnack check needs lambda(sigma) = inf phi^2 > 0");
    }
    auto r = base_report("logharnack", sim, cfg, k);
    r.functional = f.id;
    const auto table = sample_paths(cfg, 2, [&](std::uint32_t p, std::span<double> out) {
        const auto [xt, yt] = sim.coupled_pair(x, y, p);
        out[0] = f(xt.coeffs());
        out[1] = std::log(f(yt.coeffs()));
    });
    require_finite(table, "functional sample");
    const auto fx = estimate(column(table, 2, 0));
    const auto logfy = estimate(column(table, 2, 1));
    if (fx.mean - k * fx.std_error <= 0.0) {
        throw NumericalError("P_t f(x) is not resolved away from 0; log undefined within noise");
    }
    r.constant = logharnack_constant(r.t, profile.t0, profile.lambda_sigma);
    r.lhs = logfy.mean;
    r.lhs_se = logfy.std_error;
    r.rhs = std::log(fx.mean) + r.constant * distance_sq(x, y);
    r.rhs_se = fx.std_error / fx.mean;
    r.decide();
    return r;
}

CheckReport check_variance_gradient(const Simulator& sim, const RegularityProfile& profile,
                                    const TestFunctional& f, const GalerkinState& x,
                                    const GalerkinState& v, const McConfig& cfg, double k) {
    if (!(profile.lambda_sigma > 0.0)) {
        throw AssumptionError("A2", "variance-gradient check needs lambda(sigma) = inf phi^2 > 0");
    }
    auto r = base_report("variance", sim, cfg, k);
    r.functional = f.id;
    const double vv = norm_sq(v);
    const auto table = flow_samples(sim, f, x, v, cfg);
    const auto g = estimate(column(table, 3, 0));
    const auto values = column(table, 3, 2);
    const auto var = sample_variance(values);
    r.constant = logharnack_constant(r.t, profile.t0, profile.lambda_sigma);
    r.lhs = g.mean * g.mean / vv;
    r.lhs_se = 2.0 * std::abs(g.mean) * g.std_error / vv;
    r.rhs = r.constant * var.value;
    r.rhs_se = r.constant * var.std_error;
    r.decide();
    return r;
}

CheckReport check_poincare(const Simulator& sim, const RegularityProfile& profile,
                           const TestFunctional& f, const GalerkinState& x, const McConfig& cfg,
                           double k) {
    if (!profile.lambda_bar_sigma) {
        throw ConfigError("Poincare check needs an upper bound sup phi^2 (declare sup_sq)");
    }
    auto r = base_report("poincare", sim, cfg, k);
    r.functional = f.id;
    const auto table = sample_paths(cfg, 2, [&](std::uint32_t p, std::span<double> out) {
        const auto xt = sim.simulate_path(x, p);
        out[0] = f(xt.coeffs());
        out[1] = f.grad_norm_sq(xt.coeffs());
    });
    require_finite(table, "functional sample");
    const auto values = column(table, 2, 0);
    const auto var = sample_variance(values);
    const auto q = estimate(column(table, 2, 1));
    r.constant = poincare_constant(r.t, profile.t0, *profile.lambda_bar_sigma);
    r.lhs = var.value;
    r.lhs_se = var.std_error;
    r.rhs = r.constant * q.mean;
    r.rhs_se = r.constant * q.std_error;
    r.decide();
    return r;
}

CheckReport check_flow_bound(const Simulator& sim, const RegularityProfile& profile,
                             const GalerkinState& x, const GalerkinState& v, const McConfig& cfg,
                             double k) {
    auto r = base_report("flowbound", sim, cfg, k);
    const double vv = norm_sq(v);
    const auto values = sample_paths(cfg, 1, [&](std::uint32_t p, std::span<double> out) {
        out[0] = sim.derivative_flow(x, v, p).tangent.norm_sq() / vv;
    });
    require_finite(values, "|grad_v X_t|^2");
    const auto e = estimate(values);
    r.constant = gradient_constant(r.t, profile.t0);
    r.lhs = e.mean;
    r.lhs_se = e.std_error;
    r.rhs = r.constant;
    r.rhs_se = 0.0;
    r.decide();
    return r;
}

std::vector<CheckReport> check_flow_bounds(
    const Simulator& sim, const RegularityProfile& profile, const GalerkinState& x,
    const std::vector<std::pair<std::string, GalerkinState>>& directions,
    const std::vector<double>& times, const McConfig& cfg, double k) {
    if (directions.empty() || times.empty()) throw DomainError("need at least one direction and one time");
    std::vector<GalerkinState> vs;
    std::vector<double> vv;
    for (const auto& [label, v] : directions) {
        vs.push_back(v);
        vv.push_back(norm_sq(v));
    }
    std::vector<std::size_t> steps;
    for (double t : times) {
        if (!(t >= 0.0) || t > sim.t_end() * (1.0 + 1e-12)) {
            throw DomainError(fmt::format("time {:.6g} outside [0, t_end = {:.6g}]", t, sim.t_end()));
        }
        steps.push_back(std::min(sim.steps(), static_cast<std::size_t>(std::llround(t / sim.dt()))));
    }

    const std::size_t nd = vs.size();
    const std::size_t width = steps.size() * nd;
    const auto table = sample_paths(cfg, width, [&](std::uint32_t p, std::span<double> out) {
        GalerkinState xt;
        sim.derivative_flows(x, vs, p, xt,
                             [&](std::size_t step, double, std::span<const double>,
                                 const std::vector<std::vector<double>>& h) {
                                 for (std::size_t i = 0; i < steps.size(); ++i) {
                                     if (steps[i] != step) continue;
                                     for (std::size_t j = 0; j < nd; ++j) {
                                         double s = 0.0;
                                         for (double c : h[j]) s += c * c;
                                         out[i * nd + j] = s / vv[j];
                                     }
                                 }
                             });
    });
    require_finite(table, "|grad_v X_t|^2");

    std::vector<CheckReport> reports;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        for (std::size_t j = 0; j < nd; ++j) {
            auto r = base_report("flowbound", sim, cfg, k);
            r.t = static_cast<double>(steps[i]) * sim.dt();
            r.direction = directions[j].first;
            const auto e = estimate(column(table, width, i * nd + j));
            r.constant = gradient_constant(r.t, profile.t0);
            r.lhs = e.mean;
            r.lhs_se = e.std_error;
            r.rhs = r.constant;
            r.decide();
            reports.push_back(std::move(r));
        }
    }
    return reports;
}

std::vector<std::pair<std::string, GalerkinState>> standard_directions(std::size_t n,
                                                                       const NoiseStream& noise) {
    if (n == 0) throw DomainError("no modes");
    std::vector<std::pair<std::string, GalerkinState>> out;
    out.emplace_back("e1", GalerkinState::unit(n, 0));
    out.emplace_back(fmt::format("e{}", n), GalerkinState::unit(n, n - 1));
    GalerkinState r(n);
    noise.substream(0x44495243u).fill_normals(0, 0, r.coeffs());
    const double norm = r.norm();
    for (std::size_t i = 0; i < n; ++i) r[i] /= norm;
    out.emplace_back("random", std::move(r));
    return out;
}

// ---- convergence ------------------------------------------------------------------------

std::vector<ConvergenceRow> convergence_study(const std::function<Simulator(std::size_t)>& make,
                                              std::size_t N, const GalerkinState& x0,
                                              const std::vector<std::size_t>& n_list,
                                              const McConfig& cfg) {
    if (x0.size() != N) throw DomainError("initial state must have N coefficients");
    if (n_list.empty()) throw DomainError("empty truncation list");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] == 0 || n_list[i] > N) {
            throw DomainError(fmt::format("truncation level {} outside [1, N = {}]", n_list[i], N));
        }
        if (i > 0 && n_list[i] <= n_list[i - 1]) throw DomainError("truncation levels must be strictly ascending");
    }
    const Simulator reference = make(N);
    std::vector<Simulator> levels;
    std::vector<GalerkinState> starts;
    for (std::size_t n : n_list) {
        levels.push_back(make(n));
        if (levels.back().dimension() != n) throw DomainError("simulator factory returned the wrong size");
        starts.push_back(project(x0, n));
    }

    const std::size_t width = n_list.size();
    const auto table = sample_paths(cfg, width, [&](std::uint32_t p, std::span<double> out) {
        const auto xN = reference.simulate_path(x0, p);
        for (std::size_t j = 0; j < width; ++j) {
            const auto xn = levels[j].simulate_path(starts[j], p);
            out[j] = distance_sq(embed(xn, N), xN);
        }
    });
    require_finite(table, "truncation error");

    std::vector<ConvergenceRow> rows;
    for (std::size_t j = 0; j < width; ++j) {
        const auto e = estimate(column(table, width, j));
        rows.push_back({n_list[j], e.mean, e.std_error});
    }
    return rows;
}

double ou_truncation_error(std::span<const double> x0, double t, std::span<const double> lambdas,
                           double phi0, std::size_t n) {
    if (n > lambdas.size()) throw DomainError("truncation level exceeds the spectrum");
    const auto m = ou_exact(x0, t, lambdas, phi0);
    double s = 0.0;
    for (std::size_t i = n; i < lambdas.size(); ++i) s += m.mean[i] * m.mean[i] + m.variance[i];
    return s;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
    out << "n,error,stderr\n";
    for (const auto& r : rows) out << fmt::format("{},{:.17g},{:.17g}\n", r.n, r.error, r.std_error);
}

}  // namespace spdelab
