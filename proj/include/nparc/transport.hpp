#pragma once

#include "nparc/model.hpp"

namespace nparc {

/// Finite probability measure on [0,1]^n: atoms are columns of `points`.
struct DiscreteMeasure {
    Matrix points;  // n x count
    Vector weights;

    /// Equal weights on every column.
    static DiscreteMeasure uniform(Matrix points);
    int size() const { return static_cast<int>(weights.size()); }
    int dim() const { return static_cast<int>(points.rows()); }
    /// Throws InvalidInput unless weights are >= 0 and sum to 1 within 1e-12.
    void validate() const;
};

/// Largest atom count per measure accepted by the exact solver.
inline constexpr int kMaxTransportAtoms = 200;

/// Result of an exact discrete optimal-transport solve.
struct TransportPlan {
    Matrix flow;      // a.size() x b.size()
    double cost = 0;  // sum flow_ij |x_i - y_j|^p
};

/// Exact min-cost transport between two discrete measures with cost
/// |x - y|^p (Euclidean), by successive shortest augmenting paths.
TransportPlan optimal_transport(const DiscreteMeasure& a, const DiscreteMeasure& b, double p);

/// Exact Wasserstein-p distance, (min cost)^{1/p}.
double wasserstein_p(const DiscreteMeasure& a, const DiscreteMeasure& b, double p);

/// d_{F*}(xi, zeta): Euclidean distance between the marginal-CDF images.
double premetric_dF(const Vector& xi, const Vector& zeta, const TrueModel& model);

/// Sum over marginals of max_j |F_i(x_j) - x_j| taken over the distinct atom
/// positions x_j of marginal i. Zero exactly when every atom of every marginal
/// sits at its own cumulative mass, i.e. the marginal is the discrete uniform
/// law on its support. Test-only stand-in for the copula penalty.
double marginal_mismatch(const DiscreteMeasure& c);

}  // namespace nparc
