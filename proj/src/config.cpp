#include "spdelab/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "spdelab/errors.hpp"

namespace spdelab {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"domain", {"lo", "hi"}},
        {"alpha", {"value"}},
        {"psi", {"form", "a", "b", "c0", "amp", "freq", "xs", "ys", "lipschitz", "inf_sq", "sup_sq"}},
        {"phi", {"form", "a", "b", "c0", "amp", "freq", "xs", "ys", "lipschitz", "inf_sq", "sup_sq"}},
        {"galerkin", {"n", "quad_points"}},
        {"experiment",
         {"model", "seed", "threads", "dt", "scheme", "paths", "k", "times", "x0", "y0", "functional",
          "positive_functional", "directions", "require_ellipticity", "kernel_times", "N", "n_list",
          "t_end", "checkpoints", "eps0", "C0", "epsilon", "moments_csv", "dump_paths", "dump_every",
          "field_csv", "field_points", "output"}},
    };
    return keys;
}

pt::ptree read_ini(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("{}: line {}: {}", path.string(), e.line(), e.message()));
    }
    for (const auto& [section, body] : tree) {
        const auto it = allowed_keys().find(section);
        if (it == allowed_keys().end() || body.empty()) {
            throw ConfigError(fmt::format("{}: unknown section or top-level key '{}'", path.string(), section));
        }
        for (const auto& [key, value] : body) {
            if (!it->second.count(key)) {
                throw ConfigError(fmt::format("{}: unknown key '{}' in [{}]", path.string(), key, section));
            }
        }
    }
    return tree;
}

std::string where(const std::string& section, const std::string& key) {
    return fmt::format("[{}] {}", section, key);
}

std::string trimmed(std::string s) {
    boost::algorithm::trim(s);
    return s;
}

double parse_double(const std::string& text, const std::string& what) {
    const std::string s = trimmed(text);
    if (s == "inf") return INFINITY;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::logic_error&) {
        throw ConfigError(what + ": '" + s + "' is not a number");
    }
    if (used != s.size()) throw ConfigError(what + ": '" + s + "' is not a number");
    return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& what) {
    const std::string s = trimmed(text);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(what + ": '" + s + "' is not a non-negative integer");
    }
    try {
        return std::stoull(s);
    } catch (const std::logic_error&) {
        throw ConfigError(what + ": '" + s + "' is out of range");
    }
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trimmed(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& s : split_list(text)) out.push_back(parse_double(s, what));
    return out;
}

class Section {
public:
    Section(const pt::ptree& tree, std::string name, bool required) : name_(std::move(name)) {
        const auto child = tree.get_child_optional(name_);
        if (!child && required) throw ConfigError("missing section [" + name_ + "]");
        if (child) body_ = *child;
    }

    bool has(const std::string& key) const { return body_.get_optional<std::string>(key).has_value(); }

    std::string text(const std::string& key) const {
        const auto v = body_.get_optional<std::string>(key);
        if (!v) throw ConfigError("missing key " + where(name_, key));
        return trimmed(*v);
    }
    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }
    double number(const std::string& key) const { return parse_double(text(key), where(name_, key)); }
    double number(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    std::optional<double> maybe_number(const std::string& key) const {
        return has(key) ? std::optional<double>(number(key)) : std::nullopt;
    }
    std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? parse_unsigned(text(key), where(name_, key)) : fallback;
    }
    std::vector<double> numbers(const std::string& key) const {
        return parse_doubles(text(key), where(name_, key));
    }
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
        return has(key) ? numbers(key) : fallback;
    }
    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto v = text(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError(where(name_, key) + ": expected true or false, got '" + v + "'");
    }

private:
    std::string name_;
    pt::ptree body_;
};

ScalarFunctionSpec parse_function(const Section& s) {
    const auto form = s.text("form");
    ScalarFunctionSpec g = [&] {
        if (form == "affine") return ScalarFunctionSpec::affine(s.number("a", 0.0), s.number("b", 0.0));
        if (form == "constant") return ScalarFunctionSpec::affine(0.0, s.number("b"));
        if (form == "sin_perturbed") {
            return ScalarFunctionSpec::sin_perturbed(s.number("c0"), s.number("amp"), s.number("freq", 1.0));
        }
        if (form == "atan_scaled") return ScalarFunctionSpec::atan_scaled(s.number("a"));
        if (form == "table") {
            return ScalarFunctionSpec::table(s.numbers("xs"), s.numbers("ys"), s.number("lipschitz"));
        }
        throw ConfigError("unknown function form '" + form +
                          "' (affine, constant, sin_perturbed, atan_scaled, table)");
    }();
    const auto inf_sq = s.maybe_number("inf_sq");
    const auto sup_sq = s.maybe_number("sup_sq");
    if (inf_sq || sup_sq) g = g.with_square_bounds(inf_sq, sup_sq);
    return g;
}

ReactionDiffusionModel parse_model(const pt::ptree& tree) {
    ReactionDiffusionModel m;
    const Section domain(tree, "domain", true);
    const auto lo = domain.numbers("lo");
    const auto hi = domain.numbers("hi");
    if (lo.empty() || lo.size() != hi.size()) {
        throw ConfigError("[domain] lo and hi must be non-empty lists of equal length");
    }
    std::vector<Interval> sides;
    for (std::size_t i = 0; i < lo.size(); ++i) sides.push_back({lo[i], hi[i]});
    try {
        m.domain = RectDomain(std::move(sides));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("[domain] ") + e.what());
    }
    m.alpha = Section(tree, "alpha", true).number("value");
    m.psi = parse_function(Section(tree, "psi", true));
    m.phi = parse_function(Section(tree, "phi", true));
    const Section galerkin(tree, "galerkin", true);
    m.n = galerkin.count("n", 0);
    if (m.n == 0) throw ConfigError("[galerkin] n must be a positive integer");
    m.quad_points = galerkin.count("quad_points", 0);
    return m;
}

std::vector<double> parse_state(const Section& s, const std::string& key) {
    if (!s.has(key)) return {};
    const auto text = s.text(key);
    if (text == "zero") return {};
    return s.numbers(key);
}

}  // namespace

GalerkinState ExperimentConfig::initial(std::size_t n) const {
    if (x0.size() > n) throw ConfigError(fmt::format("x0 has {} coefficients but only {} modes", x0.size(), n));
    std::vector<double> c(n, 0.0);
    std::copy(x0.begin(), x0.end(), c.begin());
    return GalerkinState(std::move(c));
}

GalerkinState ExperimentConfig::second_initial(std::size_t n) const {
    if (y0.size() > n) throw ConfigError(fmt::format("y0 has {} coefficients but only {} modes", y0.size(), n));
    std::vector<double> c(n, 0.0);
    std::copy(y0.begin(), y0.end(), c.begin());
    return GalerkinState(std::move(c));
}

ReactionDiffusionModel load_model(const std::filesystem::path& path) {
    return parse_model(read_ini(path));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    const auto tree = read_ini(path);
    ExperimentConfig c;
    c.source = path;
    const Section e(tree, "experiment", false);

    if (e.has("model")) {
        c.model_source = path.parent_path() / e.text("model");
        for (const auto* name : {"domain", "alpha", "psi", "phi", "galerkin"}) {
            if (tree.get_child_optional(name)) {
                throw ConfigError(fmt::format("[{}] given inline and via [experiment] model", name));
            }
        }
        c.model = load_model(c.model_source);
    } else {
        c.model_source = path;
        c.model = parse_model(tree);
    }

    const auto positive = [](double v, const char* key) {
        if (!(v > 0.0)) throw ConfigError(fmt::format("[experiment] {} must be positive", key));
        return v;
    };
    const auto non_negative_list = [](std::vector<double> v, const char* key) {
        for (double x : v) {
            if (!(x >= 0.0) || !std::isfinite(x)) {
                throw ConfigError(fmt::format("[experiment] {} entries must be finite and >= 0", key));
            }
        }
        return v;
    };

    c.seed = e.count("seed", c.seed);
    c.threads = static_cast<unsigned>(e.count("threads", c.threads));
    c.scheme.dt = positive(e.number("dt", c.scheme.dt), "dt");
    if (e.has("scheme")) c.scheme.scheme = scheme_from_string(e.text("scheme"));
    c.paths = e.count("paths", c.paths);
    if (c.paths < 2) throw ConfigError("[experiment] paths must be at least 2");
    c.k = e.number("k", c.k);
    if (!(c.k >= 0.0)) throw ConfigError("[experiment] k must be non-negative");
    c.times = non_negative_list(e.numbers("times", c.times), "times");
    if (c.times.empty()) throw ConfigError("[experiment] times is empty");
    c.x0 = parse_state(e, "x0");
    c.y0 = e.has("y0") ? parse_state(e, "y0") : c.x0;
    c.functional = e.text("functional", c.functional);
    c.positive_functional = e.text("positive_functional", c.positive_functional);
    if (e.has("directions")) c.directions = split_list(e.text("directions"));
    for (const auto& d : c.directions) {
        if (d != "e1" && d != "en" && d != "random") {
            throw ConfigError("[experiment] directions accepts e1, en, random; got '" + d + "'");
        }
    }
    c.require_ellipticity = e.flag("require_ellipticity", c.require_ellipticity);
    c.kernel_times = e.numbers("kernel_times", c.kernel_times);
    for (double t : c.kernel_times) positive(t, "kernel_times");

    c.N = e.count("N", c.N);
    if (e.has("n_list")) {
        c.n_list.clear();
        for (double v : e.numbers("n_list")) {
            if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("[experiment] n_list holds positive integers");
            c.n_list.push_back(static_cast<std::size_t>(v));
        }
    }

    c.t_end = e.number("t_end", c.t_end);
    if (!(c.t_end >= 0.0)) throw ConfigError("[experiment] t_end must be non-negative");
    c.checkpoints = non_negative_list(e.numbers("checkpoints", {}), "checkpoints");
    c.eps0 = positive(e.number("eps0", c.eps0), "eps0");
    c.C0 = positive(e.number("C0", c.C0), "C0");
    c.epsilon = e.number("epsilon", c.epsilon);
    if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ConfigError("[experiment] epsilon must lie in (0, 1)");
    c.moments_csv = e.text("moments_csv", "");

    if (e.has("dump_paths")) {
        c.dump_paths.clear();
        for (const auto& s : split_list(e.text("dump_paths"))) {
            c.dump_paths.push_back(static_cast<std::uint32_t>(parse_unsigned(s, "[experiment] dump_paths")));
        }
    }
    c.dump_every = e.count("dump_every", c.dump_every);
    if (c.dump_every == 0) throw ConfigError("[experiment] dump_every must be positive");
    c.field_csv = e.text("field_csv", "");
    c.field_points = e.count("field_points", c.field_points);
    c.output = e.text("output", "");
    return c;
}

}  // namespace spdelab
