// Acceptance criteria AC1-AC9, one PASS/FAIL line each. Exit status 0 iff all pass.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/core.h>

#include "spdelab/config.hpp"
#include "spdelab/estimators.hpp"
#include "spdelab/parallel.hpp"
#include "spdelab/reaction_diffusion.hpp"
#include "spdelab/regularity.hpp"
#include "spdelab/stats.hpp"

using namespace spdelab;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

const std::string config_dir = SPDELAB_CONFIG_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome ac1() {
    int good = 0, total = 0;
    double worst = 0.0;
    for (double t0 : {0.05, 0.6662, 12.0}) {
        for (double t : {0.01, 0.5, 4.0}) {
            for (double lambda : {0.81, 2.0}) {
                const auto ct = CriticalTime::finite(t0);
                const double closed = logharnack_constant(t, ct, lambda);
                const double rel = std::abs(logharnack_constant_from_phi(ct, t, lambda) / closed - 1.0);
                worst = std::max(worst, rel);
                good += rel <= 1e-8;
                ++total;
            }
        }
    }
    return {good == 18 && total == 18, fmt::format("{}/{} triples, worst relative error {:.2e}", good, total, worst)};
}

Outcome ac2() {
    double worst_const = 0.0;
    for (double a : {0.0, 0.5, 1.0, 4.0}) {
        for (double b : {0.25, 1.0, 3.0}) {
            const double t0 = compute_t0(KernelSpec::constant(a), KernelSpec::constant(b)).t0.value();
            worst_const = std::max(worst_const, std::abs(t0 - 1.0 / (6.0 * (a + b))));
        }
    }

    const auto profile = build_profile(bounded_test_model());
    const double bisect = profile.t0.value();
    // independent scan of 0.25 t + sum_m 0.02 (1 - e^{-2 (m pi)^4 t}) / (2 (m pi)^4)
    // terms with r t > 50 are saturated at w / r; their sum is precomputed from the tail end
    std::vector<double> rate, saturated;
    for (int m = 1; m <= 400; ++m) rate.push_back(2.0 * std::pow(m * pi, 4));
    saturated.assign(rate.size() + 1, 0.0);
    for (std::size_t i = rate.size(); i-- > 0;) saturated[i] = saturated[i + 1] + 0.02 / rate[i];
    const auto total = [&](double t) {
        double s = 0.25 * t;
        std::size_t i = 0;
        for (; i < rate.size() && rate[i] * t < 50.0; ++i) s += 0.02 * -std::expm1(-rate[i] * t) / rate[i];
        return s + saturated[i];
    };
    double scan = std::nan("");
    for (long i = 1; i <= 2000000; ++i) {
        const double t = 1e-6 * static_cast<double>(i);
        if (total(t) > 1.0 / 6.0) {
            scan = t - 1e-6;
            break;
        }
    }
    const double diff = std::abs(scan - bisect);
    return {worst_const <= 1e-9 && diff <= 1e-5,
            fmt::format("constant kernels max error {:.1e}; series kernel t0 = {:.9f}, scan {:.6f}, |diff| {:.1e}",
                        worst_const, bisect, scan, diff)};
}

Outcome ac3() {
    const std::size_t n = 8, paths = 100000;
    const auto model = ou_preset(n, 1.0);
    const auto sim = make_simulator(model, SchemeConfig{1e-2, Scheme::exponential_mild, 1.0}, NoiseStream(314159));
    std::vector<double> x0c(n);
    for (std::size_t i = 0; i < n; ++i) x0c[i] = 1.0 / (1.0 + i);
    const GalerkinState x0(x0c);
    std::vector<double> table(paths * n);
    parallel_for(paths, worker_count(), [&](std::size_t p) {
        const auto x = sim.simulate_path(x0, static_cast<std::uint32_t>(p));
        std::copy(x.coeffs().begin(), x.coeffs().end(), table.begin() + static_cast<long>(p * n));
    });
    const auto law = ou_exact(x0c, 1.0, sim.spectrum().lambdas(), 1.0);
    int mean_ok = 0, var_ok = 0;
    std::string worst;
    double worst_z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> col(paths);
        for (std::size_t p = 0; p < paths; ++p) col[p] = table[p * n + i];
        const auto s = summarize(col);
        const auto v = sample_variance(col);
        const double zm = std::abs(s.mean() - law.mean[i]) / s.stderr_of_mean();
        const double zv = std::abs(v.value - law.variance[i]) / v.std_error;
        mean_ok += zm <= 4.0;
        var_ok += zv <= 4.0;
        worst_z = std::max({worst_z, zm, zv});
    }
    return {mean_ok >= 7 && var_ok >= 7,
            fmt::format("means {}/8, variances {}/8 within 4 se (largest |z| {:.2f}); M = 1e5, dt = 1e-2",
                        mean_ok, var_ok, worst_z)};
}

Outcome ac4() {
    const auto c = load_config(config_dir + "/flowbound_bounded.ini");
    const auto profile = build_profile(c.model);
    const double t0 = profile.t0.value();
    SchemeConfig scheme = c.scheme;
    scheme.t_end = t0;
    const auto sim = make_simulator(c.model, scheme, NoiseStream(c.seed));
    const auto dirs = standard_directions(sim.dimension(), sim.noise());
    const auto reports = check_flow_bounds(sim, profile, c.initial(sim.dimension()), dirs, {t0 / 2, t0},
                                           McConfig{10000, worker_count()}, 4.0);
    int good = 0;
    std::string rows;
    for (const auto& r : reports) {
        good += r.pass;
        rows += fmt::format(" {}@{:.3f}:{:.3e}<={:.2f}", r.direction, r.t, r.lhs + 4 * r.lhs_se, r.rhs);
    }
    return {good == 6 && reports.size() == 6, fmt::format("{}/6 pass;{}", good, rows)};
}

Outcome ac5() {
    const auto c = load_config(config_dir + "/check_bounded.ini");
    const auto profile = build_profile(c.model);
    const auto base = make_simulator(c.model, c.scheme, NoiseStream(c.seed));
    const std::size_t n = base.dimension();
    const McConfig mc{20000, worker_count()};
    const auto x = c.initial(n);
    const auto y = c.second_initial(n);
    const auto f = TestFunctional::parse(c.functional);
    const auto fpos = TestFunctional::parse(c.positive_functional);
    const auto dirs = standard_directions(n, base.noise());

    int good = 0, total = 0;
    std::string failed;
    const auto tally = [&](const CheckReport& r) {
        ++total;
        if (r.pass) {
            ++good;
        } else {
            failed += fmt::format(" {}[{}]@{}", r.id, r.direction, r.t);
        }
    };
    for (double t : {0.05, 0.2}) {
        const auto sim = base.with_horizon(t);
        for (const auto& [label, v] : dirs) {
            auto g = check_gradient_bound(sim, profile, f, x, v, mc);
            g.direction = label;
            tally(g);
            auto vg = check_variance_gradient(sim, profile, f, x, v, mc);
            vg.direction = label;
            tally(vg);
        }
        tally(check_log_harnack(sim, profile, fpos, x, y, mc));
        tally(check_poincare(sim, profile, f, x, mc));
    }

    // degenerate cases hold exactly
    const auto sim = base.with_horizon(0.05);
    const auto one = TestFunctional::constant(2.0);
    const McConfig small{200, worker_count()};
    bool exact = true;
    for (const auto& r : {check_gradient_bound(sim, profile, one, x, dirs[0].second, small),
                          check_variance_gradient(sim, profile, one, x, dirs[0].second, small),
                          check_poincare(sim, profile, one, x, small),
                          check_log_harnack(sim, profile, one, x, x, small)}) {
        exact = exact && r.pass && r.lhs == r.rhs && r.lhs_se == 0.0 && r.rhs_se == 0.0;
    }
    const auto jensen = check_log_harnack(sim, profile, fpos, x, x, small);
    exact = exact && jensen.pass && jensen.lhs <= jensen.rhs;

    return {good == total && exact,
            fmt::format("{}/{} Monte Carlo checks pass (M = 2e4, k = 4); degenerate cases {}{}", good, total,
                        exact ? "exact" : "FAILED", failed.empty() ? "" : ";" + failed)};
}

std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& c) {
    ReactionDiffusionModel top = c.model;
    top.n = c.N;
    top.quad_points = std::max(c.model.quad_points, top.min_quad_points());
    SchemeConfig scheme = c.scheme;
    scheme.t_end = c.times.front();
    const NoiseStream noise(c.seed);
    const auto make = [&](std::size_t n) {
        ReactionDiffusionModel m = top;
        m.n = n;
        return make_simulator(m, scheme, noise);
    };
    return convergence_study(make, c.N, c.initial(c.N), c.n_list, {c.paths, worker_count()});
}

Outcome ac6() {
    const auto ou = load_config(config_dir + "/converge_ou.ini");
    const auto ou_rows = run_convergence(ou);
    ReactionDiffusionModel top = ou.model;
    top.n = ou.N;
    const auto spectrum = top.spectrum();
    const auto lambdas = spectrum.lambdas();
    const auto x0 = ou.initial(ou.N);
    int ou_good = 0, ou_total = 0;
    for (const auto& r : ou_rows) {
        if (r.n == ou.N) continue;
        const double exact = ou_truncation_error(x0.coeffs(), ou.times.front(), lambdas, ou.model.phi(0.0), r.n);
        ++ou_total;
        ou_good += std::abs(r.error - exact) <= 4 * r.std_error;
    }

    const auto nl = load_config(config_dir + "/converge_bounded.ini");
    const auto rows = run_convergence(nl);
    bool decreasing = true;
    std::string errs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        errs += fmt::format(" {}:{:.3e}", rows[i].n, rows[i].error);
        if (i == 0) continue;
        const double gap = rows[i - 1].error - rows[i].error;
        decreasing = decreasing && gap > 2.0 * std::hypot(rows[i - 1].std_error, rows[i].std_error);
    }
    return {ou_good == ou_total && ou_total == 4 && decreasing,
            fmt::format("OU tail sums {}/{} within 4 se; nonlinear errors {}strictly decreasing:{}", ou_good,
                        ou_total, decreasing ? "" : "NOT ", errs)};
}

Outcome ac7() {
    const auto rect = epsilon_integrability(exact_Ksigma(bounded_test_model()), 0.5);
    bool ka_infinite = true;
    for (double eps : {0.05, 0.5, 0.95}) ka_infinite = ka_infinite && !epsilon_integrability(KernelSpec::series_ka(1, 1, 2), eps).finite;
    return {rect.finite && ka_infinite,
            fmt::format("alpha = 2, d = 1, eps = 0.5: finite ({:.6g}); KA form at alpha = d: {}", rect.value,
                        ka_infinite ? "infinite" : "FINITE")};
}

MomentTable run_harness(const ExperimentConfig& c) {
    SchemeConfig scheme = c.scheme;
    scheme.t_end = c.t_end;
    const auto sim = make_simulator(c.model, scheme, NoiseStream(c.seed));
    return moment_harness(sim, c.initial(sim.dimension()), c.checkpoints, c.paths, worker_count());
}

Outcome ac8() {
    const auto b = load_config(config_dir + "/invariant_bounded.ini");
    const auto growth = check_growth_condition(b.model, b.eps0, b.C0);
    const auto table = run_harness(b);
    const auto& last = table.rows.back();

    const auto ou = load_config(config_dir + "/invariant_ou.ini");
    const auto ou_table = run_harness(ou);
    double plateau = 0.0;
    const double level = ou.model.phi(0.0);
    const auto ou_spectrum = ou.model.spectrum();
    for (double l : ou_spectrum.lambdas()) plateau += level * level / (2.0 * l);
    const auto& ou_last = ou_table.rows.back();
    const bool ou_ok = std::abs(ou_last.second_moment - plateau) <= 4 * ou_last.std_error;
    return {growth.holds && table.verdict == "bounded" && b.t_end == 20.0 && ou_ok,
            fmt::format("bounded model verdict '{}' at t = {} (E|u|^2 = {:.5f} +- {:.5f}); OU plateau {:.5f} vs "
                        "{:.5f} +- {:.5f}",
                        table.verdict, last.t, last.second_moment, last.std_error, plateau, ou_last.second_moment,
                        ou_last.std_error)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome ac9() {
    const fs::path dir = fs::temp_directory_path() / fmt::format("spdelab_ac9_{}", ::getpid());
    fs::create_directories(dir);
    const std::string bounded = fs::absolute(config_dir + "/models/bounded.ini").string();
    const std::string ou = fs::absolute(config_dir + "/models/ou.ini").string();
    const auto write = [&](const std::string& name, const std::string& text) {
        const auto p = dir / name;
        std::ofstream(p) << text;
        return p.string();
    };
    const std::string side_moments = (dir / "moments.csv").string();
    const std::string side_field = (dir / "field.csv").string();

    struct Job {
        std::string args;
        std::vector<std::string> side_files;
    };
    const std::string check_cfg = write("check.ini", "[experiment]\nmodel = " + bounded +
                                                         "\nseed = 3\npaths = 400\ntimes = 0.05\nx0 = 0.5\n"
                                                         "y0 = 0.5, 0.5\n");
    const std::vector<Job> jobs{
        {"validate " + config_dir + "/validate_bounded.ini", {}},
        {"constants " + config_dir + "/constants_bounded.ini", {}},
        {"check gradient " + check_cfg, {}},
        {"check logharnack " + check_cfg, {}},
        {"check variance " + check_cfg, {}},
        {"check poincare " + check_cfg, {}},
        {"check flowbound " + write("flow.ini", "[experiment]\nmodel = " + bounded +
                                                    "\nseed = 4\npaths = 200\ntimes = 0.1, 0.2\nx0 = 0.5\n"),
         {}},
        {"converge " + write("conv.ini", "[experiment]\nmodel = " + bounded +
                                             "\nseed = 5\npaths = 200\ntimes = 0.05\nN = 16\nn_list = 4, 8, 16\nx0 = 1\n"),
         {}},
        {"invariant " + write("inv.ini", "[experiment]\nmodel = " + ou +
                                             "\nseed = 6\npaths = 400\nt_end = 1\nx0 = 1\nmoments_csv = " +
                                             side_moments + "\n"),
         {side_moments}},
        {"dump-trajectories " + write("dump.ini", "[experiment]\nmodel = " + bounded +
                                                      "\nseed = 7\ntimes = 0.05\nx0 = 0.5\ndump_paths = 0, 1, 2\n"
                                                      "dump_every = 5\nfield_csv = " +
                                                      side_field + "\n"),
         {side_field}},
    };

    int identical = 0;
    std::string bad;
    for (const auto& job : jobs) {
        std::vector<std::string> captures;
        std::vector<int> codes;
        for (int threads : {1, 4, 1}) {
            const auto out = dir / "out.txt";
            const std::string cmd = fmt::format("'{}' {} --threads {} --out '{}' 2>/dev/null", SPDELAB_CLI_PATH,
                                                job.args, threads, out.string());
            const int status = std::system(cmd.c_str());
            codes.push_back(WIFEXITED(status) ? WEXITSTATUS(status) : -1);
            std::string bytes = slurp(out);
            for (const auto& f : job.side_files) bytes += "\n--\n" + slurp(f);
            captures.push_back(std::move(bytes));
            fs::remove(out);
        }
        const bool same = !captures[0].empty() && captures[0] == captures[1] && captures[0] == captures[2] &&
                          codes[0] == codes[1] && codes[0] == codes[2] && codes[0] >= 0 && codes[0] <= 1;
        identical += same;
        if (!same) bad += " [" + job.args.substr(0, job.args.find(' ', job.args.find(' ') + 1)) + "]";
    }
    fs::remove_all(dir);
    return {identical == static_cast<int>(jobs.size()),
            fmt::format("{}/{} commands byte-identical across --threads 1, 4 and a re-run{}", identical, jobs.size(),
                        bad)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
        {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9},
    };
    std::vector<std::string> only(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.pass;
        std::cout << fmt::format("{} {} ({:.1f} s) {}", name, o.pass ? "PASS" : "FAIL", secs, o.detail) << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
