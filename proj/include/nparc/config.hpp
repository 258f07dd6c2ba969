#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nparc/bellman.hpp"

namespace nparc {

/// Every parameter of a run. Text form: one "key = value" per line, '#'
/// starts a comment, vectors are comma separated. Keys carry their units:
/// *_annual values are per year and are prorated with periods_per_year.
struct RunConfig {
    std::uint64_t seed = 1;

    // Market and model.
    int t0 = 400;
    int horizon = 10;
    int periods_per_year = 10;
    double rate_annual = 0.02;
    std::vector<double> mean_annual{0.09, 0.13};
    std::vector<double> vol_annual{0.25, 0.4};
    /// Upper-triangular correlations, row by row.
    std::vector<double> correlation{0.85};
    double risk_aversion = 0.05;
    double initial_wealth = 100.0;
    std::vector<double> control_lower{0.0, 0.0};
    std::vector<double> control_upper{1.0, 1.0};

    // Uncertainty set and dual problem.
    double alpha = 0.1;
    double order = 2.0;
    int moments = 2;
    int bernstein_degree = 3;
    double radius_scale = RadiusConfig{}.c_scale;
    double radius_exponent = 0.0;

    // Solver.
    int design_points = 1000;
    int paths = 1000;
    SgdaConfig sgda;
    double design_corr_low = -0.95;
    double design_corr_high = 0.95;
    int design_wealth_paths = 2000;
    double design_wealth_quantile = 0.005;
    double design_wealth_margin = 0.05;
    int warm_start_chunk = 8;
    double gp_jitter = 1e-6;
    int gp_restarts = 5;
    double gp_min_length_scale = 1e-2;
    double gp_max_length_scale = 1e2;
    int gp_max_iterations = 60;
    int qmc_points = 256;
    double abort_fraction = 0.2;
    unsigned workers = 1;

    // Locations.
    std::string data_path = "data.csv";
    std::string checkpoint_dir = "checkpoints";
    std::string output_dir = "out";

    /// Throws InvalidConfig on any violated invariant.
    void validate() const;

    Problem problem() const;
    SolverConfig solver() const;

    /// Parses and validates; unknown keys and malformed values throw InvalidConfig.
    static RunConfig load(std::istream& in);
    static RunConfig load_file(const std::string& path);
    void save(std::ostream& out) const;

    bool operator==(const RunConfig&) const = default;
};

/// Historical noise CSV: header z1,...,zn then one observation per row.
void write_data_csv(std::ostream& out, const Matrix& data);
Matrix read_data_csv(std::istream& in);

}  // namespace nparc
