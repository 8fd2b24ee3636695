#include "spdelab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spdelab/config.hpp"
#include "spdelab/errors.hpp"
#include "spdelab/estimators.hpp"
#include "spdelab/reaction_diffusion.hpp"
#include "spdelab/regularity.hpp"

namespace spdelab {

namespace {

using nlohmann::json;

json t0_json(const CriticalTime& t0) {
    return t0.is_infinite() ? json("inf") : json(t0.value());
}

json optional_number(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

json model_json(const ExperimentConfig& c) {
    json sides = json::array();
    for (const auto& s : c.model.domain.sides()) sides.push_back({s.lo, s.hi});
    return {{"domain", sides},
            {"alpha", c.model.alpha},
            {"psi", c.model.psi.describe()},
            {"phi", c.model.phi.describe()},
            {"n", c.model.n},
            {"quad_points", c.model.effective_quad_points()},
            {"file", c.model_source.filename().string()}};
}

json profile_json(const RegularityProfile& p) {
    json j{{"Kb", p.kb.describe()},
           {"Ksigma", p.ksigma.describe()},
           {"t0", t0_json(p.t0)},
           {"lambda_sigma", json_number(p.lambda_sigma)},
           {"lambda_bar_sigma", optional_number(p.lambda_bar_sigma)}};
    if (!p.t0_diagnostic.empty()) j["t0_diagnostic"] = p.t0_diagnostic;
    return j;
}

bool is_ou_model(const ReactionDiffusionModel& m) { return m.psi.is_zero() && m.phi.is_constant(); }

SchemeConfig horizon(const ExperimentConfig& c, double t) {
    SchemeConfig s = c.scheme;
    s.t_end = t;
    return s;
}

std::vector<std::pair<std::string, GalerkinState>> selected_directions(const ExperimentConfig& c,
                                                                       std::size_t n,
                                                                       const NoiseStream& noise) {
    auto all = standard_directions(n, noise);
    std::vector<std::pair<std::string, GalerkinState>> out;
    for (const auto& name : c.directions) {
        const std::size_t idx = name == "e1" ? 0 : name == "en" ? 1 : 2;
        out.push_back(all[idx]);
    }
    return out;
}

// ---- commands ---------------------------------------------------------------------------

int cmd_validate(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
    c.model.validate();
    const auto profile = build_profile(c.model);
    const auto spectrum = c.model.spectrum();

    json samples = json::array();
    for (double t : c.kernel_times) {
        samples.push_back({{"t", t},
                           {"Kb", json_number(eval_kernel(profile.kb, t))},
                           {"Ksigma", json_number(eval_kernel(profile.ksigma, t))},
                           {"phi_b", json_number(phi(profile.kb, t))},
                           {"phi_sigma", json_number(phi(profile.ksigma, t))}});
    }

    bool spectrum_ok = true;
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        if (!(spectrum.lambda(i) > 0.0) || (i > 0 && spectrum.lambda(i) < spectrum.lambda(i - 1))) {
            spectrum_ok = false;
        }
    }
    const bool a1 = is_time_integrable(profile.kb);
    const bool a2 = profile.lambda_sigma > 0.0;
    const bool a3 = is_time_integrable(profile.ksigma);
    json assumptions{
        {"A1", {{"holds", a1}, {"detail", "K_b = " + profile.kb.describe()}}},
        {"A2", {{"holds", a2},
                {"required", c.require_ellipticity},
                {"detail", fmt::format("lambda(sigma) = inf phi^2 = {:.17g}", profile.lambda_sigma)}}},
        {"A3", {{"holds", a3}, {"detail", "K_sigma = " + profile.ksigma.describe()}}},
        {"A4", {{"holds", spectrum_ok},
                {"detail", fmt::format("{} positive non-decreasing eigenvalues, lambda_max = {:.17g}",
                                       spectrum.size(), spectrum.lambda_max())}}},
        {"alpha", {{"holds", true},
                   {"detail", fmt::format("alpha = {:.17g} > d/2 = {:.17g}", c.model.alpha,
                                          c.model.domain.dimension() / 2.0)}}},
    };

    json report{{"command", "validate"},
                {"model", model_json(c)},
                {"profile", profile_json(profile)},
                {"phi_limit", {{"b", json_number(phi_limit(profile.kb))},
                               {"sigma", json_number(phi_limit(profile.ksigma))}}},
                {"kernel_samples", samples},
                {"assumptions", assumptions}};
    const bool ok = a1 && a3 && spectrum_ok && (a2 || !c.require_ellipticity);
    report["ok"] = ok;
    out << report.dump(2) << '\n';

    if (!a2 && c.require_ellipticity) {
        err << "assumption A2 failed: lambda(sigma) = inf phi^2 = 0 but ellipticity is required\n";
        return exit_config_error;
    }
    if (!ok) {
        err << "an assumption failed; see the report\n";
        return exit_config_error;
    }
    return exit_pass;
}

int cmd_constants(const ExperimentConfig& c, std::ostream& out) {
    const auto profile = build_profile(c.model);
    json rows = json::array();
    for (double t : c.times) {
        const bool lh_defined = t > 0.0 && profile.lambda_sigma > 0.0;
        rows.push_back(
            {{"t", t},
             {"gradient_constant", gradient_constant(t, profile.t0)},
             {"logharnack_constant",
              lh_defined ? json_number(logharnack_constant(t, profile.t0, profile.lambda_sigma)) : json("inf")},
             {"logharnack_constant_from_phi",
              lh_defined ? json_number(logharnack_constant_from_phi(profile.t0, t, profile.lambda_sigma))
                         : json("inf")},
             {"poincare_constant", profile.lambda_bar_sigma
                                       ? json_number(poincare_constant(t, profile.t0, *profile.lambda_bar_sigma))
                                       : json(nullptr)}});
    }
    json report{{"command", "constants"}, {"model", model_json(c)}, {"profile", profile_json(profile)},
                {"rows", rows}};
    out << report.dump(2) << '\n';
    return exit_pass;
}

int cmd_check(const ExperimentConfig& c, const std::string& which, std::ostream& out, std::ostream& err) {
    const auto profile = build_profile(c.model);
    const NoiseStream noise(c.seed);
    const auto base = make_simulator(c.model, horizon(c, c.times.front()), noise);
    const std::size_t n = base.dimension();
    const McConfig mc{c.paths, c.threads};
    const auto x = c.initial(n);

    const auto checked = [&](const std::string& spec) {
        auto f = TestFunctional::parse(spec);
        validate_functional(f, base.spectrum(), 100000, c.seed);
        return f;
    };

    std::vector<CheckReport> reports;
    if (which == "flowbound") {
        // one base path per id serves every direction and time
        const double last = *std::max_element(c.times.begin(), c.times.end());
        reports = check_flow_bounds(base.with_horizon(last), profile, x, selected_directions(c, n, noise),
                                    c.times, mc, c.k);
    }
    for (double t : c.times) {
        if (which == "flowbound") break;
        const auto sim = base.with_horizon(t);
        if (which == "gradient" || which == "variance") {
            const auto f = checked(c.functional);
            for (const auto& [label, v] : selected_directions(c, n, noise)) {
                CheckReport r = which == "gradient" ? check_gradient_bound(sim, profile, f, x, v, mc, c.k)
                                                    : check_variance_gradient(sim, profile, f, x, v, mc, c.k);
                r.direction = label;
                reports.push_back(std::move(r));
            }
        } else if (which == "logharnack") {
            const auto f = checked(c.positive_functional);
            reports.push_back(check_log_harnack(sim, profile, f, x, c.second_initial(n), mc, c.k));
        } else if (which == "poincare") {
            const auto f = checked(c.functional);
            reports.push_back(check_poincare(sim, profile, f, x, mc, c.k));
        } else {
            throw ConfigError("unknown check '" + which +
                              "' (gradient, logharnack, variance, poincare, flowbound)");
        }
    }

    bool all = true;
    json list = json::array();
    for (const auto& r : reports) {
        all = all && r.pass;
        list.push_back(to_json(r));
    }
    json report{{"command", "check"},       {"check", which},   {"model", model_json(c)},
                {"profile", profile_json(profile)}, {"reports", list}, {"pass", all}};
    out << report.dump(2) << '\n';
    if (!all) {
        err << which << " check failed at k = " << c.k << "\n";
        return exit_statistical_fail;
    }
    return exit_pass;
}

int cmd_converge(const ExperimentConfig& c, std::ostream& out) {
    ReactionDiffusionModel top = c.model;
    top.n = c.N;
    top.quad_points = std::max(c.model.quad_points, top.min_quad_points());
    top.validate();
    const NoiseStream noise(c.seed);
    const auto scheme = horizon(c, c.times.front());
    const auto make = [&](std::size_t n) {
        ReactionDiffusionModel m = top;
        m.n = n;
        return make_simulator(m, scheme, noise);
    };
    const auto rows = convergence_study(make, c.N, c.initial(c.N), c.n_list, {c.paths, c.threads});
    write_convergence_csv(out, rows);
    return exit_pass;
}

int cmd_invariant(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
    const auto profile = build_profile(c.model);
    const auto growth = check_growth_condition(c.model, c.eps0, c.C0);
    const auto integrability = epsilon_integrability(profile.ksigma, c.epsilon);

    json report{{"command", "invariant"},
                {"model", model_json(c)},
                {"profile", profile_json(profile)},
                {"growth_condition", {{"holds", growth.holds},
                                      {"eps0", c.eps0},
                                      {"C0", c.C0},
                                      {"slope_sq", growth.slope_sq},
                                      {"worst_s", growth.worst_s},
                                      {"worst_margin", json_number(growth.worst_margin)}}},
                {"epsilon_integrability", {{"epsilon", c.epsilon},
                                           {"finite", integrability.finite},
                                           {"value", json_number(integrability.value)}}}};

    int code = exit_pass;
    if (!growth.holds) {
        report["verdict"] = "skipped";
        report["moments"] = json::array();
        err << "growth condition fails for eps0 = " << c.eps0 << ", C0 = " << c.C0 << "\n";
        code = exit_statistical_fail;
    } else {
        const auto sim = make_simulator(c.model, horizon(c, c.t_end), NoiseStream(c.seed));
        std::vector<double> checkpoints = c.checkpoints;
        if (checkpoints.empty()) {
            if (c.t_end == 0.0) {
                checkpoints = {0.0};
            } else {
                for (int i = 0; i <= 10; ++i) checkpoints.push_back(c.t_end * i / 10.0);
            }
        }
        const auto table = moment_harness(sim, c.initial(sim.dimension()), checkpoints, c.paths, c.threads);
        json rows = json::array();
        for (const auto& r : table.rows) {
            rows.push_back({{"t", r.t}, {"second_moment", r.second_moment}, {"stderr", r.std_error}});
        }
        report["moments"] = rows;
        report["verdict"] = table.verdict;
        report["verdict_rule"] = "heuristic: last three checkpoints pairwise within 2 standard errors";
        if (is_ou_model(c.model)) {
            const double level = c.model.phi(0.0);
            double stationary = 0.0;
            for (double l : sim.spectrum().lambdas()) stationary += level * level / (2.0 * l);
            report["ou_stationary_second_moment"] = stationary;
        }
        if (!c.moments_csv.empty()) {
            std::ofstream csv(c.moments_csv);
            if (!csv) throw ConfigError("cannot write " + c.moments_csv);
            write_moment_csv(csv, table);
        }
        if (table.verdict != "bounded") code = exit_statistical_fail;
    }
    out << report.dump(2) << '\n';
    return code;
}

int cmd_dump(const ExperimentConfig& c, std::ostream& out) {
    const auto sim = make_simulator(c.model, horizon(c, c.times.front()), NoiseStream(c.seed));
    const auto x0 = c.initial(sim.dimension());
    write_trajectories_csv(out, sim, x0, c.dump_paths, c.dump_every);
    if (!c.field_csv.empty()) {
        if (c.dump_paths.empty()) throw ConfigError("field_csv needs at least one dump path");
        std::ofstream field(c.field_csv);
        if (!field) throw ConfigError("cannot write " + c.field_csv);
        write_field_csv(field, c.model, sim.simulate_path(x0, c.dump_paths.front()), c.field_points);
    }
    return exit_pass;
}

}  // namespace

int run_command(const CliOptions& options, std::ostream& out, std::ostream& err) {
    try {
        auto c = load_config(options.config);
        if (options.seed) c.seed = *options.seed;
        if (options.threads) c.threads = *options.threads;
        if (options.out) c.output = *options.out;

        std::unique_ptr<std::ofstream> file;
        std::ostream* sink = &out;
        if (!c.output.empty()) {
            file = std::make_unique<std::ofstream>(c.output);
            if (!*file) throw ConfigError("cannot write " + c.output);
            sink = file.get();
        }

        const auto& cmd = options.command;
        if (cmd == "validate") return cmd_validate(c, *sink, err);
        if (cmd == "constants") return cmd_constants(c, *sink);
        if (cmd == "check") return cmd_check(c, options.which, *sink, err);
        if (cmd == "converge") return cmd_converge(c, *sink);
        if (cmd == "invariant") return cmd_invariant(c, *sink, err);
        if (cmd == "dump-trajectories") return cmd_dump(c, *sink);
        throw ConfigError("unknown command '" + cmd + "'");
    } catch (const AssumptionError& e) {
        err << "assumption " << e.assumption() << " failed: " << e.what() << '\n';
        return exit_config_error;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return exit_numerical_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_config_error;
    }
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Spectral Galerkin laboratory for semi-linear SPDEs with multiplicative noise"};
    app.require_subcommand(1);
    CliOptions options;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("config", options.config, "experiment INI file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", options.seed, "override [experiment] seed");
        sub->add_option("--threads", options.threads, "worker threads (outputs do not depend on it)");
        sub->add_option("--out", options.out, "write the primary output to this file");
    };

    auto* validate = app.add_subcommand("validate", "build the regularity profile and check assumptions");
    common(validate);
    auto* constants = app.add_subcommand("constants", "constants over the [experiment] times");
    common(constants);
    auto* check = app.add_subcommand("check", "Monte Carlo check of one inequality");
    check->add_option("which", options.which, "gradient | logharnack | variance | poincare | flowbound")
        ->required()
        ->check(CLI::IsMember({"gradient", "logharnack", "variance", "poincare", "flowbound"}));
    common(check);
    auto* converge = app.add_subcommand("converge", "Galerkin truncation error table");
    common(converge);
    auto* invariant = app.add_subcommand("invariant", "growth condition and second-moment harness");
    common(invariant);
    auto* dump = app.add_subcommand("dump-trajectories", "coefficient trajectories as CSV");
    common(dump);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_pass : exit_config_error;
    }
    options.command = app.get_subcommands().front()->get_name();
    return run_command(options, std::cout, std::cerr);
}

}  // namespace spdelab
