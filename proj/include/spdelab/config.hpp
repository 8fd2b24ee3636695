#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spdelab/reaction_diffusion.hpp"
#include "spdelab/simulator.hpp"

namespace spdelab {

/// Everything one experiment file specifies. Model sections ([domain] [alpha] [psi] [phi]
/// [galerkin]) come from the file named by `experiment.model`, or from the experiment file
/// itself when that key is absent.
struct ExperimentConfig {
    std::filesystem::path source;
    std::filesystem::path model_source;
    ReactionDiffusionModel model;

    std::uint64_t seed = 1;
    unsigned threads = 1;
    SchemeConfig scheme;                 ///< t_end is set per run
    std::size_t paths = 1000;
    double k = 4.0;
    std::vector<double> times{0.1};
    std::vector<double> x0;              ///< coefficients, zero-padded to the mode count
    std::vector<double> y0;
    std::string functional = "sin:0";
    std::string positive_functional = "shifted_sin:0:2";
    std::vector<std::string> directions{"e1", "en", "random"};
    bool require_ellipticity = false;
    std::vector<double> kernel_times{1e-3, 1e-2, 0.1, 1.0};

    // converge
    std::size_t N = 64;
    std::vector<std::size_t> n_list{4, 8, 16, 32};

    // invariant
    double t_end = 20.0;
    std::vector<double> checkpoints;     ///< empty: 11 evenly spaced points on [0, t_end]
    double eps0 = 0.5;
    double C0 = 2.0;
    double epsilon = 0.5;
    std::string moments_csv;

    // dump-trajectories
    std::vector<std::uint32_t> dump_paths{0, 1, 2, 3};
    std::size_t dump_every = 1;
    std::string field_csv;
    std::size_t field_points = 101;

    std::string output;                  ///< default output path; empty means stdout

    /// x0 / y0 padded to n coefficients.
    GalerkinState initial(std::size_t n) const;
    GalerkinState second_initial(std::size_t n) const;
};

/// Reads an INI experiment file. Throws ConfigError on missing files, unknown sections or
/// keys, and malformed values.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Reads only the model sections of an INI file.
ReactionDiffusionModel load_model(const std::filesystem::path& path);

}  // namespace spdelab
