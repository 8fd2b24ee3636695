#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spdelab/regularity.hpp"
#include "spdelab/simulator.hpp"

namespace spdelab {

/// f: H_n -> R with its exact gradient and declared properties.
struct TestFunctional {
    std::string id;
    std::function<double(std::span<const double>)> eval;
    /// Writes grad f(x) into out.
    std::function<void(std::span<const double>, std::span<double>)> grad;
    bool bounded = false;
    double sup_abs = 0.0;            ///< |f| <= sup_abs when bounded
    bool strictly_positive = false;
    double floor = 0.0;              ///< f >= floor > 0 when strictly positive
    double grad_bound = 0.0;         ///< |grad f| <= grad_bound

    /// <u, e_k>
    static TestFunctional coordinate(std::size_t k);
    static TestFunctional constant(double c);
    /// sin <u, e_k>
    static TestFunctional sin_coordinate(std::size_t k);
    /// shift + sin <u, e_k>, strictly positive for shift > 1
    static TestFunctional shifted_sin(std::size_t k, double shift);

    /// "coordinate:K", "constant:C", "sin:K", "shifted_sin:K:SHIFT". Throws ConfigError.
    static TestFunctional parse(const std::string& spec);

    double operator()(std::span<const double> x) const { return eval(x); }
    double grad_norm_sq(std::span<const double> x) const;
};

/// Checks the declared bounds on `samples` Gaussian states with per-mode variance 1/lambda_i
/// (1 for lambda_i = 0) and on the gradient norm. Throws DomainError naming the violation.
void validate_functional(const TestFunctional& f, const EigenSpectrum& spectrum, std::size_t samples,
                         std::uint64_t seed);

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
};

struct McConfig {
    std::size_t paths = 1000;
    unsigned threads = 1;
};

/// P_t f(x) with t = sim.t_end().
Estimate mc_expect(const Simulator& sim, const TestFunctional& f, const GalerkinState& x,
                   const McConfig& cfg);

/// grad_v P_t f(x) = E <grad f(X_t), grad_v X_t>.
Estimate grad_via_flow(const Simulator& sim, const TestFunctional& f, const GalerkinState& x,
                       const GalerkinState& v, const McConfig& cfg);

/// E (f(X_t^{x + eps v}) - f(X_t^x)) / eps over coupled pairs.
Estimate grad_via_fd(const Simulator& sim, const TestFunctional& f, const GalerkinState& x,
                     const GalerkinState& v, double eps, const McConfig& cfg);

/// One statistical inequality check lhs <= rhs. `rhs` is the full right-hand side, the
/// constant already applied. pass <=> lhs - k lhs_se <= rhs + k rhs_se.
struct CheckReport {
    std::string id;
    std::string functional;
    std::string direction;
    double t = 0.0;
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    double rhs_se = 0.0;
    double constant = 0.0;
    double k = 4.0;
    bool pass = false;
    std::size_t paths = 0;
    double dt = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string scheme;
    std::string note;

    void decide();
};

nlohmann::json to_json(const CheckReport& r);

/// JSON value for a double; infinities become the strings "inf" / "-inf", NaN "nan".
nlohmann::json json_number(double v);

/// |grad P_t f|^2 / |v|^2 <= 6^{1 + t/t0} P_t |grad f|^2, directional.
CheckReport check_gradient_bound(const Simulator& sim, const RegularityProfile& profile,
                                 const TestFunctional& f, const GalerkinState& x,
                                 const GalerkinState& v, const McConfig& cfg, double k = 4.0);

/// P_t log f(y) <= log P_t f(x) + C_LH(t) |x - y|^2, both sides on the same path ids.
CheckReport check_log_harnack(const Simulator& sim, const RegularityProfile& profile,
                              const TestFunctional& f, const GalerkinState& x,
                              const GalerkinState& y, const McConfig& cfg, double k = 4.0);

/// |grad P_t f|^2 / |v|^2 <= C_LH(t) (P_t f^2 - (P_t f)^2).
CheckReport check_variance_gradient(const Simulator& sim, const RegularityProfile& profile,
                                    const TestFunctional& f, const GalerkinState& x,
                                    const GalerkinState& v, const McConfig& cfg, double k = 4.0);

/// P_t f^2 - (P_t f)^2 <= C_P(t) P_t |grad f|^2. Throws ConfigError without lambda_bar.
CheckReport check_poincare(const Simulator& sim, const RegularityProfile& profile,
                           const TestFunctional& f, const GalerkinState& x, const McConfig& cfg,
                           double k = 4.0);

/// E |grad_v X_t|^2 / |v|^2 <= 6^{(t + t0)/t0}.
CheckReport check_flow_bound(const Simulator& sim, const RegularityProfile& profile,
                             const GalerkinState& x, const GalerkinState& v, const McConfig& cfg,
                             double k = 4.0);

/// check_flow_bound for several labelled directions and times (each <= sim.t_end()) from one
/// base path per path id. Reports are ordered by time, then direction.
std::vector<CheckReport> check_flow_bounds(
    const Simulator& sim, const RegularityProfile& profile, const GalerkinState& x,
    const std::vector<std::pair<std::string, GalerkinState>>& directions,
    const std::vector<double>& times, const McConfig& cfg, double k = 4.0);

/// e_1, e_n and a fixed random unit vector drawn from a substream of `noise`.
std::vector<std::pair<std::string, GalerkinState>> standard_directions(std::size_t n,
                                                                       const NoiseStream& noise);

struct ConvergenceRow {
    std::size_t n = 0;
    double error = 0.0;
    double std_error = 0.0;
};

/// E |X_t^n - X_t^N|^2 for each n in n_list, X^n zero-padded into H_N. make(m) must return
/// the m-mode simulator; all levels share noise addresses. x0 has N coefficients.
std::vector<ConvergenceRow> convergence_study(const std::function<Simulator(std::size_t)>& make,
                                              std::size_t N, const GalerkinState& x0,
                                              const std::vector<std::size_t>& n_list,
                                              const McConfig& cfg);

/// Exact truncation error of the OU system: sum_{i >= n} e^{-2 l t} x0_i^2 + phi0^2 (1 - e^{-2 l t}) / (2 l).
double ou_truncation_error(std::span<const double> x0, double t, std::span<const double> lambdas,
                           double phi0, std::size_t n);

/// CSV `n,error,stderr`.
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows);

}  // namespace spdelab
