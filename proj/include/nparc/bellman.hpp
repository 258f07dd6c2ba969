#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nparc/copula.hpp"
#include "nparc/gp.hpp"
#include "nparc/model.hpp"
#include "nparc/sgda.hpp"

namespace nparc {

enum class StrategyKind {
    AdaptiveRobustCopula,     // robust, known marginals (Bernstein terms)
    AdaptiveRobustEmpirical,  // robust, no marginal information
    TrueModelOptimal,         // expectation under the true model
};

/// "arc", "are", "tr".
std::string to_string(StrategyKind kind);
/// Accepts the short names and the full enumerator names.
StrategyKind parse_strategy(const std::string& name);

/// Placement of the design points of one time layer.
struct DesignConfig {
    int count = 1000;
    /// Correlation range of the Gaussian copulas the design samples are drawn from.
    double corr_low = -0.95;
    double corr_high = 0.95;
    /// Paths under random controls used to bracket the reachable wealth.
    int wealth_paths = 2000;
    double wealth_quantile = 0.005;
    /// Relative widening of the bracketed wealth range.
    double wealth_margin = 0.05;

    void validate() const;
};

/// A design state together with the copula sample it summarizes.
struct DesignPoint {
    AugmentedState state;
    WeightedSample copula;
};

struct SolverConfig {
    int t0 = 400;
    double alpha = 0.1;
    int moments = 2;
    RadiusConfig radius;
    SgdaConfig sgda;
    DesignConfig design;
    GpFitOptions gp;
    /// Size of the quasi-Monte Carlo sample of the true copula.
    int qmc_points = 256;
    /// Optional explicit reference noise for the true-model expectation
    /// (n x M, equal weights). Replaces the quasi-Monte Carlo sample.
    Matrix reference_noise;
    /// Optional finite control set searched exhaustively by the true-model solver.
    std::vector<Vector> candidate_controls;
    /// Optional explicit design points per time (index t); empty layers use
    /// the generated placement.
    std::vector<std::vector<DesignPoint>> explicit_design;
    /// Design points solved sequentially with warm starts form one chunk.
    int warm_start_chunk = 8;
    unsigned workers = 1;
    /// Abort when more than this share of a layer fails to converge.
    double abort_fraction = 0.2;
    /// One container per (t, kind); existing layers are loaded instead of solved.
    std::string checkpoint_dir;

    void validate() const;
};

/// Model, market and control set shared by every stage.
struct Problem {
    TrueModel model;
    MarketParams market;
    ControlBox box;
};

struct LayerArtifacts {
    int time = 0;
    /// Hash of the solve inputs; checkpoints resume only when it matches.
    std::uint64_t fingerprint = 0;
    Matrix design;                 // N x D reduced design states
    Vector values;                 // inner-problem values
    Matrix controls;               // N x n optimal controls
    std::vector<char> converged;   // per design point
    GpSurrogate value;
    std::vector<GpSurrogate> policy;  // one surrogate per control component

    double nonconverged_share() const;
    /// Policy surrogate at a reduced state, projected onto the box.
    Vector control(const Vector& reduced, const ControlBox& box) const;
    void save(std::ostream& out) const;
    static LayerArtifacts load(std::istream& in);
};

struct SolveArtifacts {
    StrategyKind kind = StrategyKind::TrueModelOptimal;
    std::vector<LayerArtifacts> layers;  // index t = 0..T-1
    std::string config_echo;

    /// Throws IncompleteArtifacts unless a layer exists for every t < horizon.
    void check_complete(int horizon) const;
};

/// V_T(y) = loss(wealth). Throws InvalidInput unless y.time == horizon.
double terminal_value(const AugmentedState& y, const MarketParams& market);

/// N design states at time t: wealth log-spaced over the bracketed reachable
/// range, copula samples of t0 + t points from Gaussian copulas with random
/// correlation. Deterministic given the seed.
std::vector<DesignPoint> design_points(int t, int count, std::uint64_t seed, const Problem& problem,
                                       int t0, int moments, const DesignConfig& cfg);

/// Equal-weight quasi-Monte Carlo sample of the true copula (n x count).
Matrix true_copula_sample(const TrueModel& model, int count);

/// Result of the inner problem at one design point.
struct InnerSolution {
    double value = 0.0;
    Vector control;
    bool converged = true;
    DualPoint dual;
};

/// Solves the inner problem of `kind` at one design point against V_next.
InnerSolution solve_inner(StrategyKind kind, const DesignPoint& point, const ValueFn& next,
                          const Problem& problem, const SolverConfig& cfg,
                          const Matrix& reference_u, std::uint64_t sgda_seed,
                          const DualPoint* warm = nullptr);

/// Backward recursion t = T-1, ..., 0. `data` holds the t0 historical noise
/// vectors (rows); their copula sample anchors the first design point at t = 0.
/// Checkpointed layers solved from different inputs are recomputed.
SolveArtifacts backward_solve(StrategyKind kind, const Matrix& data, const Problem& problem,
                              const SolverConfig& cfg, std::uint64_t seed,
                              std::ostream* log = nullptr);

/// Loads the checkpointed layers 0..horizon-1 of `kind` from `dir`.
/// Throws IncompleteArtifacts when any layer is missing.
SolveArtifacts load_artifacts(const std::string& dir, StrategyKind kind, int horizon);

}  // namespace nparc
