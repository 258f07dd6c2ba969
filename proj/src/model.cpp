#include "nparc/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "nparc/errors.hpp"

namespace nparc {

namespace {

using ErfPolicy = boost::math::policies::policy<
    boost::math::policies::overflow_error<boost::math::policies::errno_on_error>,
    boost::math::policies::domain_error<boost::math::policies::errno_on_error>>;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_quantile(double u) {
    if (u <= 0.0) return -std::numeric_limits<double>::infinity();
    if (u >= 1.0) return std::numeric_limits<double>::infinity();
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u, ErfPolicy());
}

TrueModel::TrueModel(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const auto n = mean_.size();
    if (n < 1) throw InvalidConfig("true model needs at least one dimension");
    if (covariance_.rows() != n || covariance_.cols() != n)
        throw InvalidConfig("covariance shape does not match mean");
    if (!all_finite(mean_) || !covariance_.allFinite())
        throw InvalidConfig("true model parameters must be finite");
    if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvalidConfig("covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_);
    if (eig.eigenvalues().minCoeff() <= 0.0)
        throw InvalidConfig("covariance is not positive definite");
    sd_ = covariance_.diagonal().cwiseSqrt();
    chol_ = covariance_.llt().matrixL();
}

TrueModel TrueModel::from_annual(const Vector& annual_mean, const Vector& annual_vol,
                                 const Matrix& correlation, int periods_per_year) {
    if (periods_per_year < 1) throw InvalidConfig("periods_per_year must be >= 1");
    const auto n = annual_mean.size();
    if (annual_vol.size() != n || correlation.rows() != n || correlation.cols() != n)
        throw InvalidConfig("annual moments have inconsistent dimensions");
    Matrix cov = annual_vol.asDiagonal() * correlation * annual_vol.asDiagonal();
    cov = 0.5 * (cov + cov.transpose());
    return TrueModel(annual_mean / periods_per_year, cov / periods_per_year);
}

Matrix TrueModel::correlation() const {
    Vector inv = sd_.cwiseInverse();
    return inv.asDiagonal() * covariance_ * inv.asDiagonal();
}

double TrueModel::marginal_cdf(int i, double z) const {
    return normal_cdf((z - mean_(i)) / sd_(i));
}

double TrueModel::marginal_pdf(int i, double z) const {
    return normal_pdf((z - mean_(i)) / sd_(i)) / sd_(i);
}

double TrueModel::marginal_quantile(int i, double u) const {
    return mean_(i) + sd_(i) * normal_quantile(u);
}

Vector TrueModel::to_uniform(const Vector& z) const {
    Vector u(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) u(i) = marginal_cdf(static_cast<int>(i), z(i));
    return u;
}

Vector TrueModel::from_uniform(const Vector& u) const {
    Vector z(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
        z(i) = marginal_quantile(static_cast<int>(i), u(i));
    return z;
}

Vector TrueModel::sample(Rng& rng) const {
    std::normal_distribution<double> normal;
    Vector e(dim());
    for (int i = 0; i < dim(); ++i) e(i) = normal(rng);
    return sample_from_normals(e);
}

Vector TrueModel::sample_from_normals(const Vector& standard_normals) const {
    return mean_ + chol_ * standard_normals;
}

void MarketParams::validate() const {
    if (horizon < 1) throw InvalidConfig("horizon T must be >= 1");
    if (!(risk_aversion > 0.0)) throw InvalidConfig("risk_aversion must be > 0");
    if (!(initial_wealth > 0.0)) throw InvalidConfig("initial_wealth must be > 0");
    if (!std::isfinite(rate_per_period)) throw InvalidConfig("interest rate must be finite");
}

ControlBox ControlBox::unit(int dim) {
    return ControlBox{Vector::Zero(dim), Vector::Ones(dim)};
}

bool ControlBox::contains(const Vector& a, double tol) const {
    if (a.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) < lower(i) - tol || a(i) > upper(i) + tol) return false;
    return true;
}

Vector ControlBox::project(const Vector& a) const { return a.cwiseMax(lower).cwiseMin(upper); }

void ControlBox::validate() const {
    if (lower.size() != upper.size() || lower.size() == 0)
        throw InvalidConfig("control box bounds must have equal, nonzero length");
    if (!lower.allFinite() || !upper.allFinite())
        throw InvalidConfig("control box must be bounded");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
        if (lower(i) > upper(i)) throw InvalidConfig("control box lower > upper");
}

Vector AugmentedState::reduced() const {
    Vector v(1 + copula_summary.size());
    v(0) = wealth;
    v.tail(copula_summary.size()) = copula_summary;
    return v;
}

double wealth_step(double x, const Vector& a, const Vector& z, double r) {
    if (!std::isfinite(x) || !all_finite(a) || !all_finite(z) || !std::isfinite(r))
        throw InvalidInput("wealth_step: non-finite input");
    if (a.size() != z.size()) throw InvalidInput("wealth_step: control and noise sizes differ");
    double growth = (1.0 - a.sum()) * (1.0 + r);
    for (Eigen::Index i = 0; i < a.size(); ++i) growth += a(i) * std::exp(z(i));
    return x * growth;
}

double loss(double x, double risk_aversion) {
    if (!(risk_aversion > 0.0)) throw InvalidConfig("risk_aversion must be > 0");
    return std::expm1(-risk_aversion * x) / risk_aversion;
}

double loss_derivative(double x, double risk_aversion) {
    if (!(risk_aversion > 0.0)) throw InvalidConfig("risk_aversion must be > 0");
    return -std::exp(-risk_aversion * x);
}

}  // namespace nparc
