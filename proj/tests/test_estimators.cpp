#include <doctest.h>

#include <cmath>
#include <sstream>

#include "spdelab/errors.hpp"
#include "spdelab/estimators.hpp"
#include "spdelab/reaction_diffusion.hpp"

using namespace spdelab;

namespace {

Simulator ou_sim(std::size_t n, double t, std::uint64_t seed = 3) {
    return make_simulator(ou_preset(n), SchemeConfig{1e-2, Scheme::exponential_mild, t}, NoiseStream(seed));
}

GalerkinState unit(std::size_t n, std::size_t k) {
    GalerkinState v(n);
    v[k] = 1.0;
    return v;
}

}  // namespace

TEST_CASE("test functionals") {
    const auto f = TestFunctional::parse("shifted_sin:1:2.5");
    const std::vector<double> x{0.0, 0.3};
    CHECK(f(x) == doctest::Approx(2.5 + std::sin(0.3)));
    CHECK(f.strictly_positive);
    CHECK(f.floor == 1.5);
    CHECK(f.grad_norm_sq(x) == doctest::Approx(std::cos(0.3) * std::cos(0.3)));
    CHECK(TestFunctional::parse("coordinate:1")(x) == 0.3);
    CHECK(TestFunctional::parse("constant:2")(x) == 2.0);
    CHECK(TestFunctional::parse("sin:0").bounded);
    CHECK_THROWS_AS(TestFunctional::parse("cubic:1"), ConfigError);
    CHECK_THROWS_AS(TestFunctional::parse("sin"), ConfigError);
    CHECK_THROWS_AS(TestFunctional::parse("sin:x"), ConfigError);
    CHECK_THROWS_AS(TestFunctional::coordinate(5)(x), DomainError);

    const auto spectrum = ou_preset(4).spectrum();
    CHECK_NOTHROW(validate_functional(f, spectrum, 1000, 1));
    auto liar = TestFunctional::sin_coordinate(0);
    liar.sup_abs = 0.1;
    CHECK_THROWS_AS(validate_functional(liar, spectrum, 1000, 1), DomainError);
}

TEST_CASE("semigroup expectations") {
    const GalerkinState x(std::vector<double>{0.4, 0.1, 0.0, 0.0});
    const auto f = TestFunctional::sin_coordinate(0);
    const McConfig cfg{500, 1};

    const auto at0 = mc_expect(ou_sim(4, 0.0), f, x, cfg);
    CHECK(at0.mean == f(x.coeffs()));
    CHECK(at0.std_error == 0.0);

    const auto one = mc_expect(ou_sim(4, 0.5), TestFunctional::constant(1.0), x, cfg);
    CHECK(one.mean == 1.0);
    CHECK(one.std_error == 0.0);

    // E sin(Z) with Z ~ N(m, s^2) is sin(m) e^{-s^2/2}
    const auto sim = ou_sim(4, 0.05);
    const auto e = mc_expect(sim, f, x, McConfig{20000, 1});
    const auto law = ou_exact(x.coeffs(), 0.05, sim.spectrum().lambdas(), 1.0);
    const double exact = std::sin(law.mean[0]) * std::exp(-law.variance[0] / 2.0);
    CHECK(std::abs(e.mean - exact) <= 4 * e.std_error);

    const auto threaded = mc_expect(sim, f, x, McConfig{20000, 4});
    CHECK(threaded.mean == e.mean);
    CHECK(threaded.std_error == e.std_error);
}

TEST_CASE("gradient estimators") {
    const GalerkinState x(std::vector<double>{0.4, 0.1, 0.0, 0.0});
    const auto v = GalerkinState(std::vector<double>{0.6, 0.8, 0.0, 0.0});
    const McConfig cfg{200, 1};

    const auto f = TestFunctional::sin_coordinate(0);
    const auto at0 = grad_via_flow(ou_sim(4, 0.0), f, x, v, cfg);
    CHECK(at0.mean == doctest::Approx(std::cos(0.4) * 0.6));
    CHECK(at0.std_error == 0.0);

    const auto sim = ou_sim(4, 0.2);
    const double decay = std::exp(-sim.spectrum().lambda(0) * 0.2);
    const auto lin = grad_via_flow(sim, TestFunctional::coordinate(0), x, unit(4, 0), cfg);
    CHECK(lin.mean == doctest::Approx(decay).epsilon(1e-12));
    CHECK(lin.std_error < 1e-14);

    for (double eps : {1e-1, 1e-3}) {
        const auto fd = grad_via_fd(sim, TestFunctional::coordinate(0), x, v, eps, cfg);
        CHECK(fd.mean == doctest::Approx(decay * 0.6).epsilon(1e-8));
    }
    const auto zero = grad_via_fd(sim, f, x, GalerkinState(4), 1e-3, cfg);
    CHECK(zero.mean == 0.0);
    CHECK(grad_via_flow(sim, f, x, GalerkinState(4), cfg).mean == 0.0);

    // flow and finite differences agree on the nonlinear model
    const auto model = bounded_test_model();
    const auto nl = make_simulator(model, SchemeConfig{1e-3, Scheme::exponential_mild, 0.1}, NoiseStream(12));
    const auto x16 = embed(x, 16);
    const auto v16 = embed(v, 16);
    const auto a = grad_via_flow(nl, f, x16, v16, McConfig{400, 1});
    const auto b = grad_via_fd(nl, f, x16, v16, 1e-5, McConfig{400, 1});
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-4));
}

TEST_CASE("degenerate checks hold with equality") {
    const auto model = bounded_test_model();
    const auto profile = build_profile(model);
    const auto sim = make_simulator(model, SchemeConfig{1e-3, Scheme::exponential_mild, 0.05}, NoiseStream(1));
    const GalerkinState x = embed(GalerkinState(std::vector<double>{0.5}), 16);
    const auto c = TestFunctional::constant(2.0);
    const McConfig cfg{50, 1};

    const auto g = check_gradient_bound(sim, profile, c, x, unit(16, 0), cfg);
    CHECK(g.lhs == 0.0);
    CHECK(g.rhs == 0.0);
    CHECK(g.pass);

    const auto lh = check_log_harnack(sim, profile, c, x, x, cfg);
    CHECK(lh.lhs == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(lh.lhs == lh.rhs);
    CHECK(lh.pass);

    // Jensen at x = y: P log f <= log P f
    const auto s = TestFunctional::shifted_sin(0, 2.0);
    const auto jensen = check_log_harnack(sim, profile, s, x, x, McConfig{500, 1});
    CHECK(jensen.lhs <= jensen.rhs);
    CHECK(jensen.pass);

    const auto var = check_variance_gradient(sim, profile, c, x, unit(16, 3), cfg);
    CHECK(var.lhs == 0.0);
    CHECK(var.rhs == 0.0);
    CHECK(var.pass);

    const auto p = check_poincare(sim, profile, c, x, cfg);
    CHECK(p.lhs == 0.0);
    CHECK(p.rhs == 0.0);
    CHECK(p.pass);

    const auto p0 = check_poincare(sim.with_horizon(0.0), profile, TestFunctional::sin_coordinate(0), x, cfg);
    CHECK(p0.lhs == 0.0);
    CHECK(p0.rhs == 0.0);
    CHECK(p0.pass);
}

TEST_CASE("check preconditions") {
    const GalerkinState x(4);
    const McConfig cfg{10, 1};
    const auto sim = ou_sim(4, 0.1);

    auto degenerate = ou_preset(4, 0.0);
    const auto p0 = build_profile(degenerate);
    CHECK_THROWS_AS(check_log_harnack(sim, p0, TestFunctional::constant(1.0), x, x, cfg), AssumptionError);
    CHECK_THROWS_AS(check_variance_gradient(sim, p0, TestFunctional::sin_coordinate(0), x, unit(4, 0), cfg),
                    AssumptionError);

    auto unbounded = ou_preset(4);
    unbounded.phi = ScalarFunctionSpec::affine(1.0, 1.0);
    const auto pu = build_profile(unbounded);
    CHECK_THROWS_AS(check_poincare(sim, pu, TestFunctional::sin_coordinate(0), x, cfg), ConfigError);

    const auto pou = build_profile(ou_preset(4));
    CHECK_THROWS_AS(check_log_harnack(sim, pou, TestFunctional::sin_coordinate(0), x, x, cfg), ConfigError);
    CHECK_THROWS_AS(check_gradient_bound(sim, pou, TestFunctional::sin_coordinate(0), x, GalerkinState(4), cfg),
                    DomainError);
}

TEST_CASE("flow bounds from a shared base path") {
    const auto model = bounded_test_model();
    const auto profile = build_profile(model);
    const double t0 = profile.t0.value();
    const auto sim = make_simulator(model, SchemeConfig{1e-3, Scheme::exponential_mild, t0}, NoiseStream(5));
    const GalerkinState x = embed(GalerkinState(std::vector<double>{0.5}), 16);
    const auto dirs = standard_directions(16, sim.noise());
    REQUIRE(dirs.size() == 3);
    CHECK(dirs[0].first == "e1");
    CHECK(dirs[2].second.norm() == doctest::Approx(1.0).epsilon(1e-14));

    const McConfig cfg{300, 1};
    const auto reports = check_flow_bounds(sim, profile, x, dirs, {t0 / 2, t0}, cfg);
    REQUIRE(reports.size() == 6);
    for (const auto& r : reports) CHECK(r.pass);
    CHECK(reports[3].rhs == doctest::Approx(36.0).epsilon(1e-3));

    const auto single = check_flow_bound(sim, profile, x, dirs[1].second, cfg);
    CHECK(single.lhs == reports[4].lhs);
    CHECK(single.lhs_se == reports[4].lhs_se);
    CHECK_THROWS_AS(check_flow_bounds(sim, profile, x, dirs, {2 * t0}, cfg), DomainError);
}

TEST_CASE("check report JSON") {
    CheckReport r;
    r.id = "gradient";
    r.lhs = 1.0;
    r.rhs = std::numeric_limits<double>::infinity();
    r.decide();
    CHECK(r.pass);
    const auto j = to_json(r);
    CHECK(j["id"] == "gradient");
    CHECK(j["rhs"] == "inf");
    CHECK(j["pass"] == true);
    CHECK(json_number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(json_number(0.1).get<double>() == 0.1);

    r.lhs = 2.0;
    r.rhs = 1.0;
    r.lhs_se = 0.3;
    r.rhs_se = 0.0;
    r.k = 4.0;
    r.decide();
    CHECK(r.pass);
    r.k = 3.0;
    r.decide();
    CHECK_FALSE(r.pass);
}

TEST_CASE("convergence study") {
    const std::size_t N = 16;
    auto make = [](std::size_t n) { return ou_sim(n, 0.1, 9); };
    std::vector<double> x0c(N);
    for (std::size_t i = 0; i < N; ++i) x0c[i] = 1.0 / (1.0 + i);
    const GalerkinState x0(x0c);
    const auto rows = convergence_study(make, N, x0, {2, 4, 8, 16}, McConfig{2000, 2});
    REQUIRE(rows.size() == 4);
    CHECK(rows.back().error == 0.0);
    CHECK(rows.back().std_error == 0.0);
    const auto spectrum = ou_preset(N).spectrum();
    const auto lambdas = spectrum.lambdas();
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const double exact = ou_truncation_error(x0c, 0.1, lambdas, 1.0, rows[i].n);
        CHECK(std::abs(rows[i].error - exact) <= 4 * rows[i].std_error);
    }
    CHECK_THROWS_AS(convergence_study(make, N, x0, {4, 2}, McConfig{10, 1}), DomainError);
    CHECK_THROWS_AS(convergence_study(make, N, x0, {4, 32}, McConfig{10, 1}), DomainError);

    std::ostringstream csv;
    write_convergence_csv(csv, rows);
    CHECK(csv.str().rfind("n,error,stderr\n2,", 0) == 0);
}

TEST_CASE("OU truncation error closed form") {
    const std::vector<double> x0{1.0, 1.0, 1.0};
    const std::vector<double> l{1.0, 2.0, 3.0};
    CHECK(ou_truncation_error(x0, 0.0, l, 1.0, 1) == 2.0);
    CHECK(ou_truncation_error(x0, 1.0, l, 0.0, 2) == doctest::Approx(std::exp(-6.0)));
    CHECK(ou_truncation_error(x0, 1.0, l, 1.0, 3) == 0.0);
    CHECK(ou_truncation_error(x0, 1.0, l, 1.0, 2) ==
          doctest::Approx(std::exp(-6.0) + -std::expm1(-6.0) / 6.0));
}
