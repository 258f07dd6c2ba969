#pragma once

#include <cstdint>
#include <iosfwd>

#include "nparc/model.hpp"

namespace nparc {

/// Matern-3/2 kernel (1 + sqrt(3) d) exp(-sqrt(3) d) with d the Euclidean
/// distance after dividing each coordinate by its length scale.
double matern32(const Vector& x, const Vector& x2, const Vector& length_scales);

struct GpFitOptions {
    /// Jitter added to the kernel diagonal, relative to the variance of the
    /// targets (targets are standardized before fitting).
    double relative_jitter = 1e-6;
    int restarts = 5;
    double min_length_scale = 1e-2;
    double max_length_scale = 1e2;
    int max_optimizer_iterations = 60;
    std::uint64_t seed = 0;
};

/// Gaussian-process regression surrogate with a Matern-3/2 ARD kernel.
///
/// Inputs are scaled to [0,1] per feature using the training ranges, targets
/// are standardized, and the prediction is
///     mean + sd * sum_j nu_j k(x_scaled, x_j_scaled)
/// with nu = (K + eps^2 I)^{-1} y_standardized. A fitted model is immutable.
class GpSurrogate {
public:
    GpSurrogate() = default;

    /// Fits length scales by maximizing the log marginal likelihood
    /// (multi-start L-BFGS in log space) and solves for the dual weights.
    static GpSurrogate fit(const Matrix& inputs, const Vector& targets,
                           const GpFitOptions& options = {});

    /// Builds a model with fixed length scales (in scaled-input units).
    static GpSurrogate with_length_scales(const Matrix& inputs, const Vector& targets,
                                          const Vector& length_scales,
                                          double relative_jitter = 1e-6);

    double predict(const Vector& x) const;
    /// Exact gradient of `predict` with respect to the raw input.
    Vector predict_gradient(const Vector& x) const;
    /// Value and gradient in one pass.
    double predict_with_gradient(const Vector& x, Vector& gradient) const;

    int input_dim() const { return static_cast<int>(inputs_.cols()); }
    int size() const { return static_cast<int>(inputs_.rows()); }
    const Matrix& training_inputs() const { return inputs_; }
    const Vector& training_targets() const { return targets_; }
    const Vector& length_scales() const { return length_scales_; }
    const Vector& dual_weights() const { return nu_; }
    double relative_jitter() const { return relative_jitter_; }
    double log_marginal_likelihood() const { return log_likelihood_; }
    /// || (K + eps^2 I) nu - y_standardized ||_inf.
    double solve_residual() const;

    /// Text container: header, length scales, jitter, then one training row
    /// per line. Dual weights are recomputed on load.
    void save(std::ostream& out) const;
    static GpSurrogate load(std::istream& in);

private:
    void prepare(const Matrix& inputs, const Vector& targets);
    void solve_weights();
    Vector scale_input(const Vector& x) const;

    Matrix inputs_;     // raw N x D
    Vector targets_;    // raw N
    Matrix scaled_;     // N x D in [0,1]
    Vector offset_;     // per-feature minimum
    Vector span_;       // per-feature range (1 when constant)
    double y_mean_ = 0.0;
    double y_sd_ = 1.0;
    Vector y_std_;
    Vector length_scales_;
    double relative_jitter_ = 1e-6;
    Vector nu_;
    double log_likelihood_ = 0.0;
};

}  // namespace nparc
