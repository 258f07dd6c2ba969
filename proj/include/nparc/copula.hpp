#pragma once

#include <iosfwd>
#include <string>

#include "nparc/model.hpp"

namespace nparc {

/// Empirical copula estimate: t0 + t equally weighted pseudo-observations in
/// [0,1]^n. Values are immutable; `updated` returns a new sample.
class WeightedSample {
public:
    WeightedSample() = default;
    /// `points` is n x count, one pseudo-observation per column. The elapsed
    /// period count is count - t0.
    WeightedSample(Matrix points, int t0);

    /// Pseudo-observes every row of `data` (rows are noise vectors).
    static WeightedSample from_data(const Matrix& data, const TrueModel& model);

    int dim() const { return static_cast<int>(points_.rows()); }
    int size() const { return static_cast<int>(points_.cols()); }
    int t0() const { return t0_; }
    int elapsed() const { return size() - t0_; }
    double weight() const { return 1.0 / size(); }
    const Matrix& points() const { return points_; }
    auto point(int j) const { return points_.col(j); }

    /// C_hat(u) = share of points with every coordinate <= u.
    double cdf(const Vector& u) const;

    /// One more equally weighted point; t advances by one.
    WeightedSample updated(const Vector& point) const;

private:
    Matrix points_;
    int t0_ = 0;
};

/// Reduced description of a copula estimate: raw marginal moments
/// E[u_i^k], k = 1..m, and central pairwise covariances.
struct CopulaSummary {
    Matrix marginal_moments;  // n x m
    Vector pair_covariances;  // n(n-1)/2, ordered (0,1), (0,2), ..., (1,2), ...

    /// Moments row by row, then covariances.
    Vector flatten() const;
    static CopulaSummary unflatten(const Vector& flat, int dim, int moments);
};

/// Length of the flattened summary: m n + n(n-1)/2.
int summary_size(int dim, int moments);

/// (F*^{(1)}(z_1), ..., F*^{(n)}(z_n)).
Vector pseudo_observe(const Vector& z, const TrueModel& model);

/// Recursive estimator update R(t, C_hat_t, z).
WeightedSample update_copula(const WeightedSample& c, const Vector& z, const TrueModel& model);

CopulaSummary summarize(const WeightedSample& c, int moments);

/// Advances a flattened summary of a `count`-point sample by one new point u,
/// without access to the points themselves. If `jacobian` is non-null it
/// receives d(summary')/du (summary_size x n).
Vector advance_summary(const Vector& flat, int dim, int moments, int count, const Vector& u,
                       Matrix* jacobian = nullptr);

struct RadiusConfig {
    /// Leading constant. The default is calibrated by simulation so that the
    /// ball covers the bivariate Gaussian copula (rho = 0.85) with
    /// probability >= 0.9 at 100 observations for alpha = 0.1, p = 2.
    double c_scale = 0.22;
    /// Decay exponent; <= 0 selects 1 / max(n, 2p).
    double exponent = 0.0;
    int dim = 2;
    double order = 2.0;

    double effective_exponent() const;
};

/// r(alpha, t0, t) = c (t0 + t)^{-exponent} sqrt(ln(1 / alpha)).
double radius(double alpha, int t0, int t, const RadiusConfig& cfg);

/// CSV with header u1,...,un,weight; one point per row.
void write_sample_csv(std::ostream& out, const WeightedSample& c);
WeightedSample read_sample_csv(std::istream& in, int t0);
/// CSV with header kind,i,j,value: (moment, i, k) rows then (covariance, i, j) rows.
void write_summary_csv(std::ostream& out, const CopulaSummary& s);

}  // namespace nparc
