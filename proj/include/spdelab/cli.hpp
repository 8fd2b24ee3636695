#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace spdelab {

/// Process exit codes.
enum ExitCode : int {
    exit_pass = 0,
    exit_statistical_fail = 1,
    exit_config_error = 2,
    exit_numerical_failure = 3,
};

struct CliOptions {
    std::string command;       ///< validate, constants, check, converge, invariant, dump-trajectories
    std::string which;         ///< check kind: gradient, logharnack, variance, poincare, flowbound
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
};

/// Runs one command. The primary output goes to options.out, the config's `output` key, or
/// `out` (in that order); diagnostics go to `err`. Returns an ExitCode.
int run_command(const CliOptions& options, std::ostream& out, std::ostream& err);

/// Parses argv with CLI11 and dispatches to run_command.
int cli_main(int argc, char** argv);

}  // namespace spdelab
