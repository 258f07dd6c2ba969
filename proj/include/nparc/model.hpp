#pragma once

#include <Eigen/Dense>

#include "nparc/rng.hpp"

namespace nparc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Standard normal CDF, density and quantile.
double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double u);

/// Per-period Gaussian log-return model F*. Marginals are N(mean_i, cov_ii),
/// continuous and strictly increasing, so the copula C* is unique.
class TrueModel {
public:
    TrueModel(Vector mean, Matrix covariance);

    /// Builds the per-period model from annualized moments: mean / periods,
    /// covariance / periods.
    static TrueModel from_annual(const Vector& annual_mean, const Vector& annual_vol,
                                 const Matrix& correlation, int periods_per_year);

    int dim() const { return static_cast<int>(mean_.size()); }
    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    double marginal_sd(int i) const { return sd_(i); }
    Matrix correlation() const;

    double marginal_cdf(int i, double z) const;
    double marginal_pdf(int i, double z) const;
    double marginal_quantile(int i, double u) const;

    /// F* o z, componentwise.
    Vector to_uniform(const Vector& z) const;
    /// F*^{-1} o u, componentwise.
    Vector from_uniform(const Vector& u) const;

    Vector sample(Rng& rng) const;
    /// Maps a vector of independent standard normals to a draw of Z.
    Vector sample_from_normals(const Vector& standard_normals) const;

private:
    Vector mean_;
    Matrix covariance_;
    Vector sd_;
    Matrix chol_;
};

struct MarketParams {
    double rate_per_period = 0.002;
    int horizon = 10;
    double risk_aversion = 0.05;
    double initial_wealth = 100.0;

    /// Throws InvalidConfig when an invariant is violated.
    void validate() const;
};

/// Compact box A of admissible controls (proportions of wealth per asset).
struct ControlBox {
    Vector lower;
    Vector upper;

    static ControlBox unit(int dim);
    int dim() const { return static_cast<int>(lower.size()); }
    bool contains(const Vector& a, double tol = 0.0) const;
    Vector project(const Vector& a) const;
    Vector center() const { return 0.5 * (lower + upper); }
    void validate() const;
};

/// Reduced augmented state: wealth X_t, copula summary and the time index.
struct AugmentedState {
    double wealth = 0.0;
    Vector copula_summary;
    int time = 0;

    /// [wealth, summary...], the regression input of the surrogates.
    Vector reduced() const;
};

/// x((1 - sum a)(1 + r) + sum_i a_i e^{z_i}).
double wealth_step(double x, const Vector& a, const Vector& z, double r);

/// Loss l(x) = -U(x) with U(x) = (1 - e^{-lambda x}) / lambda.
double loss(double x, double risk_aversion);
/// dl/dx.
double loss_derivative(double x, double risk_aversion);

}  // namespace nparc
