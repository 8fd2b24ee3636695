#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "spdelab/errors.hpp"
#include "spdelab/reaction_diffusion.hpp"

using namespace spdelab;
using std::numbers::pi;

namespace {

std::vector<double> random_coeffs(std::mt19937_64& rng, std::size_t n, double scale) {
    std::normal_distribution<double> z;
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = scale * z(rng) / (1.0 + i);
    return c;
}

/// u(xi) = sum c_m sqrt(2) sin(m pi xi) on [0, 1].
double field(const std::vector<double>& c, double xi) {
    double u = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m) u += c[m] * std::sqrt(2.0) * std::sin((m + 1) * pi * xi);
    return u;
}

}  // namespace

TEST_CASE("scalar functions") {
    const auto phi = ScalarFunctionSpec::sin_perturbed(1.0, 0.1, 1.0);
    CHECK(phi(0.0) == 1.0);
    CHECK(phi.derivative(0.0) == doctest::Approx(0.1));
    CHECK(phi.lipschitz() == doctest::Approx(0.1));
    CHECK(phi.inf_sq() == doctest::Approx(0.81));
    CHECK(*phi.sup_sq() == doctest::Approx(1.21));
    CHECK_FALSE(phi.is_constant());

    const auto psi = ScalarFunctionSpec::atan_scaled(0.5);
    CHECK(psi.lipschitz() == 0.5);
    CHECK(*psi.sup_sq() == doctest::Approx(0.25 * pi * pi / 4));
    CHECK(psi.asymptotic_slope_sq() == 0.0);

    const auto lin = ScalarFunctionSpec::affine(1.0, 0.0);
    CHECK_FALSE(lin.sup_sq().has_value());
    CHECK(lin.asymptotic_slope_sq() == 1.0);
    CHECK(ScalarFunctionSpec::affine(0.0, 0.0).is_zero());

    const auto tab = ScalarFunctionSpec::table({0.0, 1.0}, {1.0, 3.0}, 2.0);
    CHECK(tab(0.5) == 2.0);
    CHECK(tab(-4.0) == 1.0);
    CHECK(tab(9.0) == 3.0);
    CHECK_FALSE(tab.has_derivative());
    CHECK_THROWS_AS(tab.derivative(0.0), DomainError);

    CHECK(phi.with_square_bounds(0.5, 2.0).inf_sq() == 0.5);
    CHECK_THROWS_AS(phi.with_square_bounds(0.9, std::nullopt), ConfigError);
    CHECK_THROWS_AS(phi.with_square_bounds(std::nullopt, 1.0), ConfigError);
}

TEST_CASE("model validation") {
    auto m = bounded_test_model();
    CHECK_NOTHROW(m.validate());
    CHECK(m.min_quad_points() == 32);
    m.quad_points = 20;
    CHECK_THROWS_AS(m.validate(), DomainError);
    m.quad_points = 0;
    CHECK(m.effective_quad_points() == 32);
    m.alpha = 0.5;
    CHECK_THROWS_AS(m.validate(), AssumptionError);

    ReactionDiffusionModel two;
    two.domain = RectDomain::unit(2);
    two.alpha = 1.0;
    CHECK_THROWS_AS(two.validate(), AssumptionError);
    two.alpha = 1.5;
    CHECK_NOTHROW(two.validate());
}

TEST_CASE("coefficient callbacks reduce exactly in trivial cases") {
    std::mt19937_64 rng(3);
    const auto x = random_coeffs(rng, 8, 1.0);
    const auto w = random_coeffs(rng, 8, 1.0);
    std::vector<double> out(8);

    auto m = ou_preset(8, 1.7);
    const auto cb = build_callbacks(m);
    CHECK(cb.additive_level.has_value());
    CHECK(*cb.additive_level == 1.7);
    if (cb.drift) {
        cb.drift(x, out);
        for (double v : out) CHECK(v == 0.0);
    }

    m.psi = ScalarFunctionSpec::affine(1.0, 0.0);
    const auto lin = build_callbacks(m);
    lin.drift(x, out);
    for (std::size_t i = 0; i < 8; ++i) CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("pseudo-spectral projection is exact for band-limited fields") {
    std::mt19937_64 rng(5);
    for (std::size_t n : {4u, 9u, 16u}) {
        ReactionDiffusionModel m;
        m.alpha = 1.0;
        m.n = n;
        // identity on the range of u, forcing the grid route
        m.psi = ScalarFunctionSpec::table({-100.0, 100.0}, {-100.0, 100.0}, 1.0);
        m.phi = ScalarFunctionSpec::table({-100.0, 100.0}, {-99.0, 101.0}, 1.0);
        const auto cb = build_callbacks(m);
        const auto x = random_coeffs(rng, n, 1.0);
        const auto w = random_coeffs(rng, n, 1.0);
        std::vector<double> out(n);
        cb.drift(x, out);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(out[i] - x[i]) < 1e-12);
    }
}

TEST_CASE("multiplicative noise projection converges with the grid") {
    std::mt19937_64 rng(5);
    const std::size_t n = 9;
    const auto x = random_coeffs(rng, n, 1.0);
    const auto w = random_coeffs(rng, n, 1.0);
    std::vector<double> ref(n, 0.0);
    const int points = 20000;
    for (int k = 0; k < points; ++k) {
        const double xi = (k + 0.5) / points;
        const double g = (field(x, xi) + 1.0) * field(w, xi);
        for (std::size_t i = 0; i < n; ++i) ref[i] += g * std::sqrt(2.0) * std::sin((i + 1) * pi * xi) / points;
    }
    // triple sine products are not band-limited for the rule: second-order convergence only
    double prev = 1.0;
    for (std::size_t q : {18u, 37u, 75u}) {
        ReactionDiffusionModel m;
        m.alpha = 1.0;
        m.n = n;
        m.quad_points = q;
        m.phi = ScalarFunctionSpec::table({-100.0, 100.0}, {-99.0, 101.0}, 1.0);
        std::vector<double> out(n);
        build_callbacks(m).diffusion_apply(x, w, out);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(out[i] - ref[i]));
        if (prev < 1.0) CHECK(err < prev / 3.0);
        prev = err;
    }
}

TEST_CASE("nonlinear drift converges to its exact projection") {
    auto m = bounded_test_model();
    m.quad_points = 512;
    const auto cb = build_callbacks(m);
    std::mt19937_64 rng(9);
    const auto x = random_coeffs(rng, 16, 0.8);
    std::vector<double> out(16);
    cb.drift(x, out);
    const int points = 40000;
    for (std::size_t i = 0; i < 16; ++i) {
        double ref = 0.0;
        for (int k = 0; k < points; ++k) {
            const double xi = (k + 0.5) / points;
            ref += 0.5 * std::atan(field(x, xi)) * std::sqrt(2.0) * std::sin((i + 1) * pi * xi) / points;
        }
        CHECK(std::abs(out[i] - ref) < 1e-7);
    }
}

TEST_CASE("jacobians match finite differences of the coefficient maps") {
    const auto m = bounded_test_model();
    const auto cb = build_callbacks(m);
    REQUIRE(cb.has_jacobians());
    std::mt19937_64 rng(17);
    const auto x = random_coeffs(rng, 16, 1.0);
    const auto h = random_coeffs(rng, 16, 1.0);
    const auto w = random_coeffs(rng, 16, 1.0);
    std::vector<double> jb(16), js(16), plus(16), minus(16);
    cb.drift_jacobian_apply(x, h, jb);
    cb.diffusion_jacobian_apply(x, h, w, js);
    const double eps = 1e-6;
    std::vector<double> xp(x), xm(x);
    for (std::size_t i = 0; i < 16; ++i) {
        xp[i] += eps * h[i];
        xm[i] -= eps * h[i];
    }
    cb.drift(xp, plus);
    cb.drift(xm, minus);
    for (std::size_t i = 0; i < 16; ++i) CHECK(jb[i] == doctest::Approx((plus[i] - minus[i]) / (2 * eps)).epsilon(1e-6).scale(1e-3));
    cb.diffusion_apply(xp, w, plus);
    cb.diffusion_apply(xm, w, minus);
    for (std::size_t i = 0; i < 16; ++i) CHECK(js[i] == doctest::Approx((plus[i] - minus[i]) / (2 * eps)).epsilon(1e-6).scale(1e-3));
}

TEST_CASE("exact noise kernel") {
    const auto m = bounded_test_model();
    const auto k = exact_Ksigma(m);
    double oracle = 0.0;
    for (int j = 1; j < 100; ++j) oracle += 2.0 * 0.01 * std::exp(-2.0 * std::pow(j * pi, 4) * 1e-3);
    CHECK(oracle == doctest::Approx(0.01735).epsilon(1e-3));
    CHECK(eval_kernel(k, 1e-3) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(phi_limit(k) == doctest::Approx(0.01 / 90).epsilon(1e-9));
    CHECK(exact_Ksigma(ou_preset(8)).is_zero());

    // rectangle in two dimensions: prefix + envelope must dominate the exact mode sum
    ReactionDiffusionModel two;
    two.domain = RectDomain({{0.0, 1.0}, {0.0, 1.5}});
    two.alpha = 1.5;
    two.phi = ScalarFunctionSpec::sin_perturbed(1.0, 0.2, 1.0);
    const auto k2 = exact_Ksigma(two);
    for (double t : {1e-4, 1e-3, 1e-2}) {
        double direct = 0.0;
        for (int a = 1; a < 400; ++a) {
            for (int b = 1; b < 400; ++b) {
                const double l = std::pow(std::pow(a * pi, 2) + std::pow(b * pi / 1.5, 2), 1.5);
                direct += 0.04 * 4.0 / 1.5 * std::exp(-2.0 * l * t);
            }
        }
        CHECK(eval_kernel(k2, t) >= direct * (1 - 1e-9));
        CHECK(eval_kernel(k2, t) <= direct * 1.05);
    }
}

TEST_CASE("the noise kernel bounds the truncated Hilbert-Schmidt norm") {
    const auto m = bounded_test_model();
    const auto k = exact_Ksigma(m);
    const auto spectrum = m.spectrum();
    std::mt19937_64 rng(23);
    const int points = 2000;
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = random_coeffs(rng, 16, 2.0);
        const auto y = random_coeffs(rng, 16, 2.0);
        double dist = 0.0;
        for (std::size_t i = 0; i < 16; ++i) dist += (x[i] - y[i]) * (x[i] - y[i]);
        std::vector<double> mass(16, 0.0);  // int |phi(x) - phi(y)|^2 e_m^2
        for (int q = 0; q < points; ++q) {
            const double xi = (q + 0.5) / points;
            const double g = m.phi(field(x, xi)) - m.phi(field(y, xi));
            for (std::size_t j = 0; j < 16; ++j) {
                const double e = std::sqrt(2.0) * std::sin((j + 1) * pi * xi);
                mass[j] += g * g * e * e / points;
            }
        }
        for (double t : {1e-4, 1e-3, 1e-2, 0.1}) {
            double hs = 0.0;
            for (std::size_t j = 0; j < 16; ++j) hs += std::exp(-2.0 * spectrum.lambda(j) * t) * mass[j];
            CHECK(hs <= eval_kernel(k, t) * dist * (1 + 1e-9));
        }
    }
}

TEST_CASE("regularity profile of the models") {
    const auto p = build_profile(bounded_test_model());
    CHECK(p.t0.value() == doctest::Approx(0.6662).epsilon(1e-4));
    CHECK(p.t0.value() == doctest::Approx((1.0 / 6.0 - 1.0 / 9000.0) / 0.25).epsilon(1e-6));
    CHECK(p.lambda_sigma == doctest::Approx(0.81));
    CHECK(*p.lambda_bar_sigma == doctest::Approx(1.21));

    const auto ou = build_profile(ou_preset(8));
    CHECK(ou.t0.is_infinite());
    CHECK(ou.kb.is_zero());
    CHECK(ou.ksigma.is_zero());
}

TEST_CASE("growth condition") {
    const auto g = check_growth_condition(bounded_test_model(), 0.01, 1.83);
    CHECK(g.holds);
    CHECK_FALSE(check_growth_condition(bounded_test_model(), 1e-9, 1.8).holds);
    CHECK(check_growth_condition(bounded_test_model(), 1e-9, 1.83).holds);

    auto lin = ou_preset(4);
    lin.psi = ScalarFunctionSpec::affine(1.0, 0.0);
    CHECK_FALSE(check_growth_condition(lin, 0.5, 100.0).holds);
    CHECK(check_growth_condition(lin, 1.0, 1.0).holds);

    auto zero = ou_preset(4, 0.0);
    CHECK(check_growth_condition(zero, 1e-6, 1e-6).holds);
}

TEST_CASE("moment harness") {
    const auto ou = ou_preset(4);
    const auto sim = make_simulator(ou, SchemeConfig{1e-2, Scheme::exponential_mild, 3.0}, NoiseStream(2));
    const GalerkinState x0(std::vector<double>{1.0, 0.0, 0.0, 0.0});

    const auto single = moment_harness(sim.with_horizon(0.0), x0, {0.0}, 100, 1);
    REQUIRE(single.rows.size() == 1);
    CHECK(single.rows[0].second_moment == 1.0);
    CHECK(single.rows[0].std_error == 0.0);
    CHECK(single.verdict == "insufficient");

    const std::vector<double> cps{0.0, 1.0, 2.0, 2.5, 3.0};
    const auto a = moment_harness(sim, x0, cps, 4000, 1);
    const auto b = moment_harness(sim, x0, cps, 4000, 4);
    REQUIRE(a.rows.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(a.rows[i].second_moment == b.rows[i].second_moment);
        CHECK(a.rows[i].std_error == b.rows[i].std_error);
    }
    double plateau = 0.0;
    for (std::size_t i = 0; i < 4; ++i) plateau += 1.0 / (2.0 * ou.spectrum().lambda(i));
    CHECK(std::abs(a.rows.back().second_moment - plateau) <= 4 * a.rows.back().std_error);
    CHECK(a.verdict == "bounded");

    CHECK_THROWS(moment_harness(sim, x0, {1.0, 0.5}, 10, 1));
    CHECK_THROWS(moment_harness(sim, x0, {4.0}, 10, 1));

    std::ostringstream csv;
    write_moment_csv(csv, a);
    CHECK(csv.str().rfind("t,second_moment,stderr\n", 0) == 0);
}

TEST_CASE("field CSV") {
    std::ostringstream out;
    write_field_csv(out, ou_preset(2), GalerkinState(std::vector<double>{1.0, 0.0}), 3);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "xi,u(xi)");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "0,0");
    CHECK(rows[1].rfind("0.5,1.41421356", 0) == 0);
}
