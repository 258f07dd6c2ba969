#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nparc/bellman.hpp"

namespace nparc {

/// One out-of-sample trajectory.
struct PathRecord {
    int path_id = 0;
    std::vector<double> wealth;   // T + 1 entries, wealth[0] = initial wealth
    std::vector<Vector> controls;  // T entries
    double terminal_loss = 0.0;
};

struct SummaryStats {
    double mean_utility = 0.0;  // -(mean terminal loss)
    double variance = 0.0;      // sample variance of terminal wealth
    double quantile_30 = 0.0;
    double quantile_90 = 0.0;
    double max = 0.0;
    double min = 0.0;
    int paths = 0;
};

/// Simulates `paths` trajectories under the true model from the initial
/// state built from `data` (t0 noise rows). Path i draws its noise from the
/// "eval" substream i, so strategies run with the same seed share noise.
/// Each path updates its own copula estimate with its own observations.
std::vector<PathRecord> forward_simulate(const SolveArtifacts& artifacts, const Problem& problem,
                                         int paths, std::uint64_t seed, const Matrix& data,
                                         int moments, unsigned workers = 1);

/// Linear interpolation between order statistics (type 7).
double quantile_type7(std::vector<double> values, double q);

SummaryStats summarize_paths(const std::vector<PathRecord>& paths, double risk_aversion);

/// path_id,terminal_wealth,terminal_loss
void write_paths_csv(std::ostream& out, const std::vector<PathRecord>& paths);
/// One row per statistic, one column per strategy.
void write_stats_table(std::ostream& out, const std::vector<std::string>& names,
                       const std::vector<SummaryStats>& stats);
/// strategy,t,mean,q05,q25,q50,q75,q95 for every time step.
void write_wealth_quantiles(std::ostream& out, const std::string& name,
                            const std::vector<PathRecord>& paths, bool header = true);

}  // namespace nparc
