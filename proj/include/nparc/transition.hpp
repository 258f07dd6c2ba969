#pragma once

#include <functional>

#include "nparc/copula.hpp"
#include "nparc/gp.hpp"
#include "nparc/model.hpp"

namespace nparc {

/// Value of a successor reduced state; fills `gradient` (same length as the
/// input) when it is non-null.
using ValueFn = std::function<double(const Vector& reduced, Vector* gradient)>;

/// V_T(y) = loss(wealth); independent of the copula summary.
ValueFn terminal_value_fn(double risk_aversion);
/// GP surrogate prediction. The surrogate must outlive the returned function.
ValueFn surrogate_value_fn(const GpSurrogate& gp);

struct Transition {
    AugmentedState state;
    WeightedSample copula;
};

/// One step of the augmented state: wealth by wealth_step, copula estimate by
/// update_copula, summary recomputed from the new estimate, time + 1.
/// Throws InvalidInput when y.time >= horizon.
Transition transition_G(const AugmentedState& y, const WeightedSample& copula, const Vector& a,
                        const Vector& z, const TrueModel& model, const MarketParams& market);

/// Everything needed to evaluate V_next at the successor of a reduced state
/// when the next pseudo-observation is u, without the underlying sample.
struct SuccessorContext {
    double wealth = 0.0;
    Vector summary;
    int count = 0;  // points in the current copula estimate
    int moments = 2;
    const TrueModel* model = nullptr;
    double rate = 0.0;
    ValueFn next;
};

struct SuccessorValue {
    double value = 0.0;
    Vector d_control;  // dV/da
    Vector d_uniform;  // dV/du
    Vector z;          // F*^{-1}(u)
};

/// V_next([wealth_step(x, a, F*^{-1}(u), r), advance_summary(summary, u)]) and,
/// if requested, its exact gradients with respect to a and u.
SuccessorValue successor_value(const SuccessorContext& ctx, const Vector& a, const Vector& u,
                               bool gradients);

}  // namespace nparc
