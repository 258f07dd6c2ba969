#include "nparc/sgda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "nparc/errors.hpp"
#include "nparc/rng.hpp"

namespace nparc {

namespace {

double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

double distance_power(const Vector& diff, double p) {
    const double d2 = diff.squaredNorm();
    return p == 2.0 ? d2 : std::pow(d2, 0.5 * p);
}

// Gradient of |diff|^p with respect to diff.
Vector distance_power_gradient(const Vector& diff, double p) {
    const double d2 = diff.squaredNorm();
    if (d2 == 0.0) return Vector::Zero(diff.size());
    if (p == 2.0) return 2.0 * diff;
    return p * std::pow(d2, 0.5 * p - 1.0) * diff;
}

// Inner term h(u) = V(successor(a, u)) - gamma d^p(u, u_hat) - sum g beta(u)
// and, when requested, dh/du and the remaining partial derivatives.
struct InnerTerm {
    double value = 0.0;
    double distance_p = 0.0;
    SuccessorValue succ;
    Vector d_u;
};

InnerTerm inner_term(const DualPoint& pt, const Vector& u_hat, const DualContext& ctx,
                     const SgdaConfig& cfg, bool gradients) {
    const TrueModel& model = *ctx.successor.model;
    const int n = model.dim();
    const int big_k = cfg.bernstein_degree;
    InnerTerm out;
    out.succ = successor_value(ctx.successor, pt.a, pt.u, gradients);
    Vector diff;
    if (ctx.space == DistanceSpace::Copula) {
        diff = pt.u - u_hat;
    } else {
        diff = out.succ.z - model.from_uniform(u_hat);
    }
    out.distance_p = distance_power(diff, cfg.order);
    out.value = out.succ.value - pt.gamma * out.distance_p;
    if (gradients) {
        Vector dd = distance_power_gradient(diff, cfg.order);
        if (ctx.space == DistanceSpace::Noise)
            for (int i = 0; i < n; ++i) dd(i) /= model.marginal_pdf(i, out.succ.z(i));
        out.d_u = out.succ.d_uniform - pt.gamma * dd;
    }
    if (ctx.marginal_terms && pt.g.size() > 0) {
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k <= big_k; ++k) {
                out.value -= pt.g(i, k) * bernstein(k, big_k, pt.u(i));
                if (gradients) out.d_u(i) -= pt.g(i, k) * bernstein_derivative(k, big_k, pt.u(i));
            }
        }
    }
    return out;
}

double constant_terms(const DualPoint& pt, const DualContext& ctx, const SgdaConfig& cfg) {
    double v = pt.gamma * std::pow(ctx.radius, cfg.order);
    if (ctx.marginal_terms && pt.g.size() > 0) v += pt.g.sum() / (cfg.bernstein_degree + 1);
    return v;
}

Vector clamp_uniform(const Vector& u, double margin) {
    return u.cwiseMax(margin).cwiseMin(1.0 - margin);
}

// Projected gradient ascent on the inner term with Barzilai-Borwein steps
// safeguarded by Armijo backtracking.
double maximize_inner(DualPoint& pt, const Vector& u_hat, const DualContext& ctx,
                      const SgdaConfig& cfg) {
    pt.u = clamp_uniform(pt.u, cfg.u_margin);
    InnerTerm cur = inner_term(pt, u_hat, ctx, cfg, true);
    double step = 0.05 / std::max(cur.d_u.lpNorm<Eigen::Infinity>(), 1e-12);
    for (int it = 0; it < 50; ++it) {
        const Vector u_old = pt.u;
        Vector u_new = clamp_uniform(u_old + step * cur.d_u, cfg.u_margin);
        if ((u_new - u_old).lpNorm<Eigen::Infinity>() < 1e-10) break;
        bool accepted = false;
        while (step > 1e-14) {
            const Vector move = u_new - u_old;
            pt.u = u_new;
            InnerTerm trial = inner_term(pt, u_hat, ctx, cfg, true);
            if (trial.value >= cur.value + 1e-4 * cur.d_u.dot(move)) {
                const Vector dg = trial.d_u - cur.d_u;
                const double sy = -move.dot(dg);
                const double gain = trial.value - cur.value;
                cur = std::move(trial);
                accepted = true;
                step = sy > 0.0 ? move.squaredNorm() / sy : 4.0 * step;
                if (gain <= 1e-13 * (1.0 + std::abs(cur.value))) it = 50;
                break;
            }
            step *= 0.25;
            u_new = clamp_uniform(u_old + step * cur.d_u, cfg.u_margin);
            if ((u_new - u_old).lpNorm<Eigen::Infinity>() == 0.0) break;
        }
        if (!accepted) {
            pt.u = u_old;
            break;
        }
    }
    return cur.value;
}

class DualSaddle final : public SaddleProblem {
public:
    DualSaddle(const DualContext& ctx, const Matrix& data, const SgdaConfig& cfg, double scale_a,
               double scale_u, double scale_gamma, double box_width)
        : ctx_(ctx),
          data_(data),
          cfg_(cfg),
          n_(ctx.successor.model->dim()),
          g_size_(ctx.marginal_terms ? n_ * (cfg.bernstein_degree + 1) : 0),
          scale_a_(scale_a),
          scale_u_(scale_u),
          scale_gamma_(scale_gamma),
          box_width_(box_width),
          r_eff_(std::max(ctx.radius, 0.05)),
          r_eff_p_(std::pow(r_eff_, cfg.order)) {}

    int samples() const override { return static_cast<int>(data_.cols()); }
    int size() const { return n_ + 1 + g_size_; }

    Vector pack(const DualPoint& pt) const {
        Vector x(size());
        x.head(n_) = pt.a;
        x(n_) = pt.gamma;
        if (g_size_ > 0) x.tail(g_size_) = pt.g.reshaped();
        return x;
    }

    DualPoint unpack(const Vector& x, const Vector& u) const {
        DualPoint pt;
        pt.a = x.head(n_);
        pt.gamma = x(n_);
        if (g_size_ > 0) pt.g = x.tail(g_size_).reshaped(n_, cfg_.bernstein_degree + 1);
        pt.u = u;
        return pt;
    }

    void descent_gradient(const Vector& x, const Vector& y, int j, Vector& grad) const override {
        const DualGradient dg = dual_gradient(unpack(x, y), data_.col(j), ctx_, cfg_);
        grad.resize(size());
        grad.head(n_) = dg.a;
        grad(n_) = dg.gamma;
        if (g_size_ > 0) grad.tail(g_size_) = dg.g.reshaped();
    }

    void ascent_gradient(const Vector& x, const Vector& y, int j, Vector& grad) const override {
        grad = inner_term(unpack(x, y), data_.col(j), ctx_, cfg_, true).d_u;
    }

    void project_descent(Vector& x) const override {
        x.head(n_) = ctx_.box.project(x.head(n_));
        x(n_) = std::max(x(n_), 0.0);
    }

    void project_ascent(Vector& y) const override { y = clamp_uniform(y, cfg_.u_margin); }

    Vector descent_scale(const Vector&) const override {
        Vector s(size());
        s.head(n_).setConstant(box_width_ / scale_a_);
        s(n_) = scale_gamma_ / r_eff_p_;
        if (g_size_ > 0) s.tail(g_size_).setConstant(scale_u_);
        return s;
    }

    // The transport term has curvature ~ p (p-1) gamma r^{p-2} in the space
    // where distance is measured; dividing by it keeps the ascent step stable
    // when gamma is large.
    Vector ascent_scale(const Vector& x, const Vector& y) const override {
        const double curvature =
            cfg_.order * std::max(cfg_.order - 1.0, 1.0) * x(n_) * r_eff_p_ / (r_eff_ * r_eff_);
        Vector s(n_);
        const TrueModel& model = *ctx_.successor.model;
        for (int i = 0; i < n_; ++i) {
            double c = curvature;
            if (ctx_.space == DistanceSpace::Noise) {
                const double f = model.marginal_pdf(i, model.marginal_quantile(i, y(i)));
                c /= f * f;
            }
            s(i) = kAscentWidth / (scale_u_ + kAscentWidth * c);
        }
        return s;
    }

    Vector descent_units(const Vector&) const override {
        Vector s(size());
        s.head(n_).setConstant(box_width_);
        s(n_) = scale_gamma_;
        if (g_size_ > 0) s.tail(g_size_).setConstant(scale_u_);
        return s;
    }

    bool stall_on_ascent() const override { return false; }

    double trace_objective(const Vector& x, const Matrix& ys) const override {
        double total = 0.0;
        for (int j = 0; j < samples(); ++j)
            total += dual_objective(unpack(x, ys.col(j)), data_.col(j), ctx_, cfg_);
        return total / samples();
    }

    double trace_scalar(const Vector& x) const override { return x(n_); }

private:
    static constexpr double kAscentWidth = 0.1;
    const DualContext& ctx_;
    const Matrix& data_;
    const SgdaConfig& cfg_;
    int n_;
    int g_size_;
    double scale_a_;
    double scale_u_;
    double scale_gamma_;
    double box_width_;
    double r_eff_;
    double r_eff_p_;
};

struct Refined {
    Vector x;
    Matrix argmax;
    double value = 0.0;
    int iterations = 0;
    bool stationary = false;
};

double full_value(const DualPoint& pt, const DualContext& ctx, const Matrix& data,
                  const SgdaConfig& cfg, const Matrix* warm, bool from_data, Matrix* argmax) {
    const int count = static_cast<int>(data.cols());
    if (argmax) argmax->resize(data.rows(), count);
    double total = 0.0;
    DualPoint work = pt;
    for (int j = 0; j < count; ++j) {
        const Vector u_hat = data.col(j);
        double best = -std::numeric_limits<double>::infinity();
        Vector best_u;
        auto attempt = [&](const Vector& from) {
            work.u = from;
            const double v = maximize_inner(work, u_hat, ctx, cfg);
            if (v > best) best = v, best_u = work.u;
        };
        if (from_data || !warm) attempt(u_hat);
        if (warm && warm->cols() == count) attempt(warm->col(j));
        total += best;
        if (argmax) argmax->col(j) = best_u;
    }
    return constant_terms(pt, ctx, cfg) + total / count;
}

// Projected quasi-Newton descent on the full-sample dual value, in units
// where every coordinate has natural scale one. Coordinates held at a bound
// by the gradient are frozen; the gradient is taken at the inner maximizers.
Refined refine(const DualSaddle& problem, Vector x, const Matrix& warm, const DualContext& ctx,
               const Matrix& data, const SgdaConfig& cfg) {
    const int count = static_cast<int>(data.cols());
    const int dim = static_cast<int>(x.size());
    const Vector scale = problem.descent_units(x);
    auto value_at = [&](const Vector& at, const Matrix* from, bool from_data, Matrix& argmax) {
        return full_value(problem.unpack(at, Vector()), ctx, data, cfg, from, from_data, &argmax);
    };
    // Gradient with respect to the scaled coordinates x / scale.
    auto gradient = [&](const Vector& at, const Matrix& argmax) {
        Vector total = Vector::Zero(dim);
        Vector g;
        for (int j = 0; j < count; ++j) {
            problem.descent_gradient(at, argmax.col(j), j, g);
            total += g;
        }
        return Vector((total / count).array() * scale.array());
    };
    auto free_mask = [&](const Vector& at, const Vector& grad) {
        Vector probe = at - (scale.array() * grad.array()).matrix() * 1e-6;
        problem.project_descent(probe);
        Vector mask(dim);
        for (int i = 0; i < dim; ++i) {
            const bool pinned = std::abs(probe(i) - at(i)) < 1e-15 * (1.0 + std::abs(at(i))) &&
                                grad(i) != 0.0;
            mask(i) = pinned ? 0.0 : 1.0;
        }
        return mask;
    };

    Refined out;
    problem.project_descent(x);
    out.x = x;
    out.value = value_at(x, &warm, true, out.argmax);
    Matrix inv_h = Matrix::Identity(dim, dim);
    Vector grad = gradient(out.x, out.argmax);
    Matrix argmax;
    bool fresh = true;
    // Values of the last few iterates; a kinked optimum never has a small
    // gradient, so a stalled value also counts as stationary.
    constexpr int kStallSpan = 5;
    std::vector<double> history{out.value};
    for (; out.iterations < cfg.refine_iters; ++out.iterations) {
        Vector probe = out.x - (scale.array() * grad.array()).matrix();
        problem.project_descent(probe);
        if (((probe - out.x).array() / scale.array()).abs().maxCoeff() < cfg.refine_tol) {
            out.stationary = true;
            break;
        }
        const Vector mask = free_mask(out.x, grad);
        Vector dir = -(mask.asDiagonal() * inv_h * mask.asDiagonal() * grad);
        if (grad.dot(dir) >= 0.0) {
            inv_h.setIdentity();
            fresh = true;
            dir = -(mask.array() * grad.array()).matrix();
        }
        // Never move more than one natural unit per iteration.
        const double longest = dir.lpNorm<Eigen::Infinity>();
        if (longest > 1.0) dir /= longest;
        bool accepted = false;
        double step = 1.0;
        Vector trial;
        // Trials restart the inner problems from the current maximizers only;
        // an accepted point is re-evaluated from the data points as well.
        while (true) {
            trial = out.x + step * (scale.array() * dir.array()).matrix();
            problem.project_descent(trial);
            const Vector move = ((trial - out.x).array() / scale.array()).matrix();
            if (move.lpNorm<Eigen::Infinity>() < 1e-2 * cfg.refine_tol) break;
            const double v = value_at(trial, &out.argmax, false, argmax);
            if (v <= out.value + 1e-4 * grad.dot(move)) {
                Matrix checked;
                out.value = value_at(trial, &argmax, true, checked);
                argmax = std::move(checked);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!fresh) {
                inv_h.setIdentity();
                fresh = true;
                continue;
            }
            out.stationary = true;
            break;
        }
        fresh = false;
        history.push_back(out.value);
        if (static_cast<int>(history.size()) > kStallSpan &&
            history[history.size() - 1 - kStallSpan] - out.value <=
                1e-9 * (1.0 + std::abs(out.value))) {
            out.stationary = true;
            out.x = trial;
            out.argmax = argmax;
            ++out.iterations;
            break;
        }
        const Vector s_k = ((trial - out.x).array() / scale.array()).matrix();
        out.x = trial;
        out.argmax = argmax;
        const Vector next_grad = gradient(out.x, out.argmax);
        const Vector y_k = next_grad - grad;
        grad = next_grad;
        const double sy = s_k.dot(y_k);
        if (sy > 1e-12 * s_k.norm() * y_k.norm()) {
            const double rho = 1.0 / sy;
            const Matrix left = Matrix::Identity(dim, dim) - rho * s_k * y_k.transpose();
            inv_h = left * inv_h * left.transpose() + rho * s_k * s_k.transpose();
        }
    }
    // Final value with restarts from the data points as well.
    out.value = value_at(out.x, &out.argmax, true, argmax);
    out.argmax = argmax;
    return out;
}

}  // namespace

double bernstein(int k, int K, double u) {
    if (K < 0 || k < 0 || k > K) throw InvalidInput("bernstein: need 0 <= k <= K");
    return binomial(K, k) * std::pow(u, k) * std::pow(1.0 - u, K - k);
}

double bernstein_derivative(int k, int K, double u) {
    if (K < 0 || k < 0 || k > K) throw InvalidInput("bernstein: need 0 <= k <= K");
    if (K == 0) return 0.0;
    const double left = k >= 1 ? bernstein(k - 1, K - 1, u) : 0.0;
    const double right = k <= K - 1 ? bernstein(k, K - 1, u) : 0.0;
    return K * (left - right);
}

void SgdaConfig::validate() const {
    if (!(descent_step > 0.0) || !(ascent_step > 0.0)) throw InvalidConfig("SGDA steps must be > 0");
    if (!(decay_iters > 0.0)) throw InvalidConfig("SGDA decay_iters must be > 0");
    if (averaging_power < 0) throw InvalidConfig("SGDA averaging_power must be >= 0");
    if (ascent_steps < 1) throw InvalidConfig("SGDA ascent_steps must be >= 1");
    if (max_iters < 1) throw InvalidConfig("SGDA max_iters must be >= 1");
    if (stall_window < 1) throw InvalidConfig("SGDA stall_window must be >= 1");
    if (!(stall_tol >= 0.0)) throw InvalidConfig("SGDA stall_tol must be >= 0");
    if (bernstein_degree < 0) throw InvalidConfig("Bernstein degree K must be >= 0");
    if (!(order >= 1.0)) throw InvalidConfig("Wasserstein order p must be >= 1");
    if (!(u_margin > 0.0 && u_margin < 0.5)) throw InvalidConfig("u_margin must lie in (0, 0.5)");
    if (refine_iters < 0) throw InvalidConfig("SGDA refine_iters must be >= 0");
    if (!(refine_tol > 0.0)) throw InvalidConfig("SGDA refine_tol must be > 0");
}

double SaddleProblem::trace_objective(const Vector&, const Matrix&) const {
    return std::numeric_limits<double>::quiet_NaN();
}

double SaddleProblem::trace_scalar(const Vector&) const {
    return std::numeric_limits<double>::quiet_NaN();
}

SaddleResult sgda(const SaddleProblem& problem, Vector x0, Matrix y0, const SgdaConfig& cfg,
                  std::ostream* trace) {
    cfg.validate();
    const int samples = problem.samples();
    if (samples < 1 || y0.cols() != samples) throw InvalidInput("sgda: one ascent block per sample");

    Rng rng(substream_seed(cfg.seed, "sgda-samples"));
    std::uniform_int_distribution<int> pick(0, samples - 1);

    Vector x = std::move(x0);
    Matrix ys = std::move(y0);
    problem.project_descent(x);
    for (int j = 0; j < samples; ++j) {
        Vector y = ys.col(j);
        problem.project_ascent(y);
        ys.col(j) = y;
    }
    const Vector x_scale = problem.descent_scale(x);
    const Vector x_units = problem.descent_units(x);
    const bool ascent_stall = problem.stall_on_ascent();

    Vector x_avg = x;
    Matrix y_avg = ys;
    std::vector<long> y_count(static_cast<std::size_t>(samples), 0);
    Vector x_prev = x_avg;
    Matrix y_prev = y_avg;
    const double rho = cfg.averaging_power;

    if (trace) {
        trace->precision(10);
        *trace << "l,objective,gamma,step,moved\n";
    }

    SaddleResult res;
    Vector gx, gy, y;
    int l = 0;
    for (; l < cfg.max_iters; ++l) {
        const int j = samples == 1 ? 0 : pick(rng);
        const double decay = 1.0 / (1.0 + l / cfg.decay_iters);

        y = ys.col(j);
        for (int k = 0; k < cfg.ascent_steps; ++k) {
            problem.ascent_gradient(x, y, j, gy);
            y.array() += cfg.ascent_step * decay * problem.ascent_scale(x, y).array() * gy.array();
            problem.project_ascent(y);
        }
        ys.col(j) = y;

        problem.descent_gradient(x, y, j, gx);
        x.array() -= cfg.descent_step * decay * x_scale.array() * gx.array();
        problem.project_descent(x);

        x_avg += (rho + 1.0) / (l + 1.0 + rho) * (x - x_avg);
        const long c = ++y_count[static_cast<std::size_t>(j)];
        y_avg.col(j) += (rho + 1.0) / (c + rho) * (y - y_avg.col(j));

        if ((l + 1) % cfg.stall_window == 0) {
            double moved = ((x_avg - x_prev).array().abs() / x_units.array()).maxCoeff();
            if (ascent_stall) moved = std::max(moved, (y_avg - y_prev).lpNorm<Eigen::Infinity>());
            if (trace)
                *trace << (l + 1) << ',' << problem.trace_objective(x_avg, y_avg) << ','
                       << problem.trace_scalar(x_avg) << ',' << cfg.descent_step * decay << ','
                       << moved << '\n';
            x_prev = x_avg;
            y_prev = y_avg;
            if (l + 1 >= 2 * cfg.stall_window && moved < cfg.stall_tol) {
                res.converged = true;
                ++l;
                break;
            }
        }
    }
    res.iterations = l;
    res.x = std::move(x_avg);
    res.ys = std::move(y_avg);
    res.last_x = std::move(x);
    res.last_ys = std::move(ys);
    return res;
}

double dual_objective(const DualPoint& pt, const Vector& u_hat, const DualContext& ctx,
                      const SgdaConfig& cfg) {
    return constant_terms(pt, ctx, cfg) + inner_term(pt, u_hat, ctx, cfg, false).value;
}

DualGradient dual_gradient(const DualPoint& pt, const Vector& u_hat, const DualContext& ctx,
                           const SgdaConfig& cfg) {
    const int n = ctx.successor.model->dim();
    const int big_k = cfg.bernstein_degree;
    const InnerTerm term = inner_term(pt, u_hat, ctx, cfg, true);
    DualGradient g;
    g.a = term.succ.d_control;
    g.gamma = std::pow(ctx.radius, cfg.order) - term.distance_p;
    g.u = term.d_u;
    if (ctx.marginal_terms) {
        g.g.resize(n, big_k + 1);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k <= big_k; ++k)
                g.g(i, k) = 1.0 / (big_k + 1) - bernstein(k, big_k, pt.u(i));
    }
    return g;
}

double dual_value(const DualPoint& pt, const DualContext& ctx, const Matrix& pseudo_data,
                  const SgdaConfig& cfg, const std::vector<const Matrix*>& starts,
                  Matrix* argmax) {
    const int count = static_cast<int>(pseudo_data.cols());
    if (count < 1) throw InvalidInput("dual_value: no data points");
    if (argmax) argmax->resize(pseudo_data.rows(), count);
    double total = 0.0;
    DualPoint work = pt;
    for (int j = 0; j < count; ++j) {
        const Vector u_hat = pseudo_data.col(j);
        work.u = u_hat;
        double best = maximize_inner(work, u_hat, ctx, cfg);
        Vector best_u = work.u;
        for (const Matrix* s : starts) {
            if (!s || s->cols() != count) continue;
            work.u = s->col(j);
            const double v = maximize_inner(work, u_hat, ctx, cfg);
            if (v > best) best = v, best_u = work.u;
        }
        total += best;
        if (argmax) argmax->col(j) = best_u;
    }
    return constant_terms(pt, ctx, cfg) + total / count;
}

SgdaSolution sgda_solve(const DualContext& ctx, const Matrix& pseudo_data, const SgdaConfig& cfg,
                        const DualPoint* init, std::ostream* trace) {
    cfg.validate();
    ctx.box.validate();
    if (!ctx.successor.model) throw InvalidInput("sgda_solve: missing model");
    const TrueModel& model = *ctx.successor.model;
    const int n = model.dim();
    const int count = static_cast<int>(pseudo_data.cols());
    if (count < 1) throw InvalidInput("sgda_solve: pseudo_data must be nonempty");
    if (pseudo_data.rows() != n || ctx.box.dim() != n)
        throw InvalidInput("sgda_solve: dimension mismatch");
    if (!(ctx.radius >= 0.0)) throw InvalidInput("sgda_solve: radius must be >= 0");

    DualPoint start;
    start.a = init && init->a.size() == n ? ctx.box.project(init->a) : ctx.box.center();

    // Natural gradient scales at the starting control.
    const int probes = std::min(count, 64);
    double s_a = 0.0, s_u = 0.0, s_dist = 0.0;
    for (int q = 0; q < probes; ++q) {
        const int j = static_cast<int>((static_cast<long>(q) * count) / probes);
        const Vector u = clamp_uniform(pseudo_data.col(j), cfg.u_margin);
        const SuccessorValue sv = successor_value(ctx.successor, start.a, u, true);
        s_a += sv.d_control.norm();
        s_u += sv.d_uniform.norm();
        if (ctx.space == DistanceSpace::Copula) {
            s_dist += sv.d_uniform.norm();
        } else {
            Vector dz = sv.d_uniform;
            for (int i = 0; i < n; ++i) dz(i) *= model.marginal_pdf(i, sv.z(i));
            s_dist += dz.norm();
        }
    }
    constexpr double kFloor = 1e-10;
    s_a = std::max(s_a / probes, kFloor);
    s_u = std::max(s_u / probes, kFloor);
    s_dist = std::max(s_dist / probes, kFloor);
    const double r_eff = std::max(ctx.radius, 0.05);
    const double scale_gamma = s_dist / (cfg.order * std::pow(r_eff, cfg.order - 1.0));
    double width = (ctx.box.upper - ctx.box.lower).maxCoeff();
    if (!(width > 0.0)) width = 1.0;

    start.gamma = init && init->gamma > 0.0 ? init->gamma : scale_gamma;
    if (ctx.marginal_terms) {
        start.g = init && init->g.rows() == n && init->g.cols() == cfg.bernstein_degree + 1
                      ? init->g
                      : Matrix::Zero(n, cfg.bernstein_degree + 1);
    }

    DualSaddle problem(ctx, pseudo_data, cfg, s_a, s_u, scale_gamma, width);
    Matrix y0(n, count);
    for (int j = 0; j < count; ++j) y0.col(j) = clamp_uniform(pseudo_data.col(j), cfg.u_margin);
    SaddleResult res = sgda(problem, problem.pack(start), y0, cfg, trace);

    SgdaSolution out;
    out.iterations = res.iterations;
    out.converged = res.converged;
    if (cfg.refine_iters > 0) {
        Refined ref = refine(problem, res.x, res.ys, ctx, pseudo_data, cfg);
        out.point = problem.unpack(ref.x, Vector());
        out.value = ref.value;
        out.adversary = std::move(ref.argmax);
        out.refine_iterations = ref.iterations;
        out.converged = out.converged || ref.stationary;
    } else {
        out.point = problem.unpack(res.x, Vector());
        out.point.a = ctx.box.project(out.point.a);
        out.point.gamma = std::max(out.point.gamma, 0.0);
        out.value = dual_value(out.point, ctx, pseudo_data, cfg, {&res.ys}, &out.adversary);
    }
    out.point.u = out.adversary.col(0);
    return out;
}

}  // namespace nparc
