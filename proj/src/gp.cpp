#include "nparc/gp.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

#include <ceres/ceres.h>

#include "nparc/errors.hpp"
#include "nparc/rng.hpp"

namespace nparc {

namespace {

constexpr double kSqrt3 = 1.7320508075688772935;

double matern_from_distance(double d) { return (1.0 + kSqrt3 * d) * std::exp(-kSqrt3 * d); }

struct Likelihood {
    double value = -std::numeric_limits<double>::infinity();
    Vector grad;  // with respect to log length scales
    bool ok = false;
};

// Log marginal likelihood of standardized targets under the Matern-3/2 kernel
// with log length scales `theta` and gradient with respect to theta.
Likelihood log_likelihood(const Matrix& x, const Vector& y, const Vector& theta, double jitter,
                          bool want_grad) {
    const auto n = x.rows();
    const auto dim = x.cols();
    const Vector inv_s2 = (-2.0 * theta.array()).exp();
    Matrix k(n, n);
    Matrix e(n, n);  // exp(-sqrt(3) r), reused by the gradient
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0 + jitter;
        e(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double r = std::sqrt(((x.row(i) - x.row(j)).array().square() *
                                        inv_s2.transpose().array())
                                           .sum());
            const double ex = std::exp(-kSqrt3 * r);
            k(i, j) = k(j, i) = (1.0 + kSqrt3 * r) * ex;
            e(i, j) = e(j, i) = ex;
        }
    }
    Eigen::LLT<Matrix> llt(k);
    Likelihood out;
    if (llt.info() != Eigen::Success) return out;
    const Vector alpha = llt.solve(y);
    const Matrix& l = llt.matrixLLT();
    double log_det_half = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_det_half += std::log(l(i, i));
    out.value = -0.5 * y.dot(alpha) - log_det_half -
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(out.value)) return out;
    out.ok = true;
    if (!want_grad) return out;
    const Matrix w = alpha * alpha.transpose() - llt.solve(Matrix::Identity(n, n));
    out.grad = Vector::Zero(dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            // dK_ij / dtheta_d = 3 e^{-sqrt3 r} (dx_d / s_d)^2
            const double f = 3.0 * e(i, j) * w(i, j);  // symmetric pair counted twice, halved
            for (Eigen::Index d = 0; d < dim; ++d) {
                const double dx = x(i, d) - x(j, d);
                out.grad(d) += f * dx * dx * inv_s2(d);
            }
        }
    }
    return out;
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

class NegativeLikelihood final : public ceres::FirstOrderFunction {
public:
    NegativeLikelihood(const Matrix& x, const Vector& y, double jitter, double lo, double hi)
        : x_(x), y_(y), jitter_(jitter), lo_(lo), hi_(hi) {}

    bool Evaluate(const double* params, double* cost, double* gradient) const override {
        const auto dim = x_.cols();
        Vector theta(dim), dtheta(dim);
        for (Eigen::Index d = 0; d < dim; ++d) {
            const double s = logistic(params[d]);
            theta(d) = lo_ + (hi_ - lo_) * s;
            dtheta(d) = (hi_ - lo_) * s * (1.0 - s);
        }
        const Likelihood l = log_likelihood(x_, y_, theta, jitter_, gradient != nullptr);
        if (!l.ok) return false;
        *cost = -l.value;
        if (gradient)
            for (Eigen::Index d = 0; d < dim; ++d) gradient[d] = -l.grad(d) * dtheta(d);
        return true;
    }

    int NumParameters() const override { return static_cast<int>(x_.cols()); }

private:
    const Matrix& x_;
    const Vector& y_;
    double jitter_;
    double lo_;
    double hi_;
};

}  // namespace

double matern32(const Vector& x, const Vector& x2, const Vector& length_scales) {
    if (x.size() != x2.size() || x.size() != length_scales.size())
        throw InvalidInput("matern32: dimension mismatch");
    if ((length_scales.array() <= 0.0).any())
        throw InvalidInput("matern32: length scales must be positive");
    return matern_from_distance(((x - x2).array() / length_scales.array()).matrix().norm());
}

void GpSurrogate::prepare(const Matrix& inputs, const Vector& targets) {
    if (inputs.rows() < 2) throw InvalidInput("GP fit needs at least two training points");
    if (inputs.rows() != targets.size()) throw InvalidInput("GP inputs and targets differ in count");
    if (!targets.allFinite()) throw InvalidInput("GP targets must be finite");
    if (!inputs.allFinite()) throw InvalidInput("GP inputs must be finite");
    inputs_ = inputs;
    targets_ = targets;
    offset_ = inputs.colwise().minCoeff().transpose();
    span_ = inputs.colwise().maxCoeff().transpose() - offset_;
    for (Eigen::Index d = 0; d < span_.size(); ++d)
        if (!(span_(d) > 1e-12 * std::max(1.0, std::abs(offset_(d))))) span_(d) = 1.0;
    scaled_.resize(inputs.rows(), inputs.cols());
    for (Eigen::Index i = 0; i < inputs.rows(); ++i)
        scaled_.row(i) = scale_input(inputs.row(i).transpose()).transpose();
    y_mean_ = targets.mean();
    const double var = (targets.array() - y_mean_).square().mean();
    y_sd_ = var > 0.0 ? std::sqrt(var) : 1.0;
    y_std_ = (targets.array() - y_mean_) / y_sd_;
}

Vector GpSurrogate::scale_input(const Vector& x) const {
    return ((x - offset_).array() / span_.array()).matrix();
}

void GpSurrogate::solve_weights() {
    const Likelihood l =
        log_likelihood(scaled_, y_std_, length_scales_.array().log().matrix(), relative_jitter_, false);
    const auto n = scaled_.rows();
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0 + relative_jitter_;
        for (Eigen::Index j = 0; j < i; ++j)
            k(i, j) = k(j, i) = matern32(scaled_.row(i).transpose(), scaled_.row(j).transpose(),
                                         length_scales_);
    }
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success || !l.ok)
        throw ConditioningError("kernel matrix is not positive definite with jitter " +
                                    std::to_string(relative_jitter_),
                                relative_jitter_ * 100.0);
    nu_ = llt.solve(y_std_);
    log_likelihood_ = l.value;
    const double residual = (k * nu_ - y_std_).lpNorm<Eigen::Infinity>();
    if (!nu_.allFinite() || residual > 1e-8 * std::max(1.0, y_std_.lpNorm<Eigen::Infinity>()))
        throw ConditioningError("kernel solve residual " + std::to_string(residual) +
                                    " exceeds tolerance",
                                relative_jitter_ * 100.0);
}

double GpSurrogate::solve_residual() const {
    const auto n = scaled_.rows();
    Vector r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double acc = relative_jitter_ * nu_(i);
        for (Eigen::Index j = 0; j < n; ++j)
            acc += matern32(scaled_.row(i).transpose(), scaled_.row(j).transpose(),
                            length_scales_) *
                   nu_(j);
        r(i) = acc - y_std_(i);
    }
    return r.lpNorm<Eigen::Infinity>();
}

GpSurrogate GpSurrogate::with_length_scales(const Matrix& inputs, const Vector& targets,
                                            const Vector& length_scales, double relative_jitter) {
    if (length_scales.size() != inputs.cols() || (length_scales.array() <= 0.0).any())
        throw InvalidInput("length scales must be positive, one per input dimension");
    if (!(relative_jitter > 0.0)) throw InvalidInput("jitter must be positive");
    GpSurrogate gp;
    gp.prepare(inputs, targets);
    gp.length_scales_ = length_scales;
    gp.relative_jitter_ = relative_jitter;
    gp.solve_weights();
    return gp;
}

GpSurrogate GpSurrogate::fit(const Matrix& inputs, const Vector& targets,
                             const GpFitOptions& options) {
    if (!(options.relative_jitter > 0.0)) throw InvalidInput("jitter must be positive");
    if (!(options.min_length_scale > 0.0 && options.max_length_scale > options.min_length_scale))
        throw InvalidInput("length-scale bounds must satisfy 0 < min < max");
    GpSurrogate gp;
    gp.prepare(inputs, targets);
    gp.relative_jitter_ = options.relative_jitter;
    const auto dim = inputs.cols();
    const double lo = std::log(options.min_length_scale);
    const double hi = std::log(options.max_length_scale);

    auto to_param = [&](double theta) {
        const double s = std::clamp((theta - lo) / (hi - lo), 1e-6, 1.0 - 1e-6);
        return std::log(s / (1.0 - s));
    };

    Rng rng(substream_seed(options.seed, "gp-restarts"));
    std::uniform_real_distribution<double> start_dist(std::log(0.1), std::log(3.0));

    ceres::GradientProblemSolver::Options solver_options;
    solver_options.logging_type = ceres::SILENT;
    solver_options.minimizer_progress_to_stdout = false;
    solver_options.max_num_iterations = options.max_optimizer_iterations;
    solver_options.function_tolerance = 1e-9;
    solver_options.gradient_tolerance = 1e-7;

    double best_value = std::numeric_limits<double>::infinity();
    Vector best_theta;
    const int restarts = std::max(1, options.restarts);
    for (int start = 0; start < restarts; ++start) {
        std::vector<double> params(static_cast<std::size_t>(dim));
        for (Eigen::Index d = 0; d < dim; ++d)
            params[static_cast<std::size_t>(d)] =
                to_param(start == 0 ? std::log(0.5) : start_dist(rng));
        auto* objective = new NegativeLikelihood(gp.scaled_, gp.y_std_, gp.relative_jitter_, lo, hi);
        ceres::GradientProblem problem(objective);
        double initial_cost = 0.0;
        if (!objective->Evaluate(params.data(), &initial_cost, nullptr)) continue;
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(solver_options, problem, params.data(), &summary);
        double cost = 0.0;
        if (!objective->Evaluate(params.data(), &cost, nullptr)) continue;
        if (cost < best_value) {
            best_value = cost;
            best_theta.resize(dim);
            for (Eigen::Index d = 0; d < dim; ++d)
                best_theta(d) = lo + (hi - lo) * logistic(params[static_cast<std::size_t>(d)]);
        }
    }
    if (best_theta.size() == 0)
        throw ConditioningError("no length-scale start produced a positive definite kernel",
                                options.relative_jitter * 100.0);
    gp.length_scales_ = best_theta.array().exp();
    gp.solve_weights();
    return gp;
}

double GpSurrogate::predict(const Vector& x) const {
    if (x.size() != input_dim()) throw InvalidInput("GP predict: wrong input dimension");
    const Vector xs = scale_input(x);
    const Vector inv_s2 = length_scales_.array().square().inverse();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < scaled_.rows(); ++j) {
        const double r = std::sqrt(
            ((scaled_.row(j).transpose() - xs).array().square() * inv_s2.array()).sum());
        acc += nu_(j) * matern_from_distance(r);
    }
    return y_mean_ + y_sd_ * acc;
}

double GpSurrogate::predict_with_gradient(const Vector& x, Vector& gradient) const {
    if (x.size() != input_dim()) throw InvalidInput("GP predict: wrong input dimension");
    const Vector xs = scale_input(x);
    const Vector inv_s2 = length_scales_.array().square().inverse();
    const auto dim = xs.size();
    double acc = 0.0;
    Vector g = Vector::Zero(dim);
    Vector diff(dim);
    for (Eigen::Index j = 0; j < scaled_.rows(); ++j) {
        diff = xs - scaled_.row(j).transpose();
        const double r = std::sqrt((diff.array().square() * inv_s2.array()).sum());
        const double ex = std::exp(-kSqrt3 * r);
        acc += nu_(j) * (1.0 + kSqrt3 * r) * ex;
        // d/dx (1 + sqrt3 r) e^{-sqrt3 r} = -3 e^{-sqrt3 r} (x - x_j) / s^2
        g.array() -= 3.0 * nu_(j) * ex * diff.array() * inv_s2.array();
    }
    gradient = (y_sd_ * g.array() / span_.array()).matrix();
    return y_mean_ + y_sd_ * acc;
}

Vector GpSurrogate::predict_gradient(const Vector& x) const {
    Vector g;
    predict_with_gradient(x, g);
    return g;
}

void GpSurrogate::save(std::ostream& out) const {
    out.precision(17);
    out << "nparc-gp 1\n";
    out << size() << ' ' << input_dim() << '\n';
    out << "relative_jitter " << relative_jitter_ << '\n';
    out << "length_scales";
    for (Eigen::Index d = 0; d < length_scales_.size(); ++d) out << ' ' << length_scales_(d);
    out << '\n';
    for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
        for (Eigen::Index d = 0; d < inputs_.cols(); ++d) out << inputs_(i, d) << ' ';
        out << targets_(i) << '\n';
    }
}

GpSurrogate GpSurrogate::load(std::istream& in) {
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "nparc-gp" || version != 1)
        throw DataError("not an nparc GP container");
    int n = 0, dim = 0;
    if (!(in >> n >> dim) || n < 2 || dim < 1) throw DataError("bad GP container shape");
    double jitter = 0.0;
    if (!(in >> tag >> jitter) || tag != "relative_jitter") throw DataError("bad GP jitter record");
    if (!(in >> tag) || tag != "length_scales") throw DataError("bad GP length-scale record");
    Vector scales(dim);
    for (int d = 0; d < dim; ++d)
        if (!(in >> scales(d))) throw DataError("truncated GP length scales");
    Matrix x(n, dim);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d)
            if (!(in >> x(i, d))) throw DataError("truncated GP training data");
        if (!(in >> y(i))) throw DataError("truncated GP training data");
    }
    return with_length_scales(x, y, scales, jitter);
}

}  // namespace nparc
