// Acceptance checks. Prints one PASS/FAIL line per criterion; pass criterion
// numbers as arguments to run a subset. Exit status is 1 if any check fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nparc/bellman.hpp"
#include "nparc/config.hpp"
#include "nparc/copula.hpp"
#include "nparc/evaluation.hpp"
#include "nparc/gp.hpp"
#include "nparc/rng.hpp"
#include "nparc/sgda.hpp"
#include "nparc/transition.hpp"
#include "nparc/transport.hpp"

using namespace nparc;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

Matrix history(const Problem& p, int rows, std::uint64_t seed) {
    Rng rng = make_rng(seed, "data");
    Matrix data(rows, p.model.dim());
    for (int r = 0; r < rows; ++r) data.row(r) = p.model.sample(rng).transpose();
    return data;
}

Vector random_weights(Rng& rng, int count) {
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    Vector w(count);
    for (int i = 0; i < count; ++i) w(i) = unif(rng);
    return w / w.sum();
}

// Minimum cost over the vertices of the transportation polytope: every basic
// feasible plan is found by solving the marginal equations on m + n - 1 cells.
double brute_force_cost(const DiscreteMeasure& a, const DiscreteMeasure& b, double p) {
    const int m = a.size(), n = b.size(), cells = m * n, basis = m + n - 1;
    Matrix eq = Matrix::Zero(m + n, cells);
    Vector rhs(m + n);
    rhs << a.weights, b.weights;
    Vector cost(cells);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            eq(i, i * n + j) = 1.0;
            eq(m + j, i * n + j) = 1.0;
            cost(i * n + j) = std::pow((a.points.col(i) - b.points.col(j)).norm(), p);
        }
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << cells); ++mask) {
        if (__builtin_popcount(static_cast<unsigned>(mask)) != basis) continue;
        std::vector<int> cols;
        for (int c = 0; c < cells; ++c)
            if (mask & (1 << c)) cols.push_back(c);
        Matrix sub(m + n, basis);
        for (int k = 0; k < basis; ++k) sub.col(k) = eq.col(cols[static_cast<std::size_t>(k)]);
        Eigen::ColPivHouseholderQR<Matrix> qr(sub);
        if (qr.rank() < basis) continue;
        const Vector x = qr.solve(rhs);
        if ((sub * x - rhs).cwiseAbs().maxCoeff() > 1e-12 || x.minCoeff() < -1e-13) continue;
        double c = 0.0;
        for (int k = 0; k < basis; ++k) c += x(k) * cost(cols[static_cast<std::size_t>(k)]);
        best = std::min(best, c);
    }
    return best;
}

Outcome transport_oracle() {
    Rng rng = make_rng(1, "acceptance");
    std::uniform_int_distribution<int> atoms(1, 3);
    std::uniform_real_distribution<double> unif;
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        DiscreteMeasure a, b;
        for (DiscreteMeasure* d : {&a, &b}) {
            const int k = atoms(rng);
            d->points.resize(2, k);
            for (int c = 0; c < k; ++c) d->points.col(c) << unif(rng), unif(rng);
            d->weights = random_weights(rng, k);
        }
        for (double p : {1.0, 2.0}) {
            const double exact = std::pow(brute_force_cost(a, b, p), 1.0 / p);
            worst = std::max(worst, std::abs(wasserstein_p(a, b, p) - exact));
        }
    }
    return {worst <= 1e-9, "max |W - brute force| = " + fmt(worst) + " over 100 solves"};
}

Outcome bernstein_integral() {
    Rng rng = make_rng(2, "acceptance");
    std::uniform_real_distribution<double> unif;
    std::vector<double> u(1000000);
    for (double& v : u) v = unif(rng);
    double worst = 0.0;
    for (int big_k : {1, 2, 4})
        for (int k = 0; k <= big_k; ++k) {
            double s = 0.0, s2 = 0.0;
            for (double v : u) {
                const double b = bernstein(k, big_k, v);
                s += b;
                s2 += b * b;
            }
            const double mean = s / u.size();
            const double se = std::sqrt((s2 / u.size() - mean * mean) / u.size());
            worst = std::max(worst, std::abs(mean - 1.0 / (big_k + 1)) / se);
        }
    return {worst <= 3.0, "max deviation = " + fmt(worst) + " standard errors"};
}

Outcome gp_gradients() {
    Rng rng = make_rng(3, "acceptance");
    std::uniform_real_distribution<double> unif;
    double worst = 0.0;
    for (int model = 0; model < 10; ++model) {
        const int dim = 2 + model % 3, count = 40;
        Vector freq(dim), phase(dim);
        for (int d = 0; d < dim; ++d) freq(d) = 1.0 + 3.0 * unif(rng), phase(d) = 6.0 * unif(rng);
        auto f = [&](const Vector& x) {
            double s = 0.0;
            for (int d = 0; d < dim; ++d) s += std::sin(freq(d) * x(d) + phase(d));
            return s + x.prod();
        };
        Matrix x(count, dim);
        Vector y(count);
        for (int i = 0; i < count; ++i) {
            for (int d = 0; d < dim; ++d) x(i, d) = unif(rng);
            y(i) = f(x.row(i).transpose());
        }
        GpFitOptions opts;
        opts.seed = static_cast<std::uint64_t>(model);
        const GpSurrogate gp = GpSurrogate::fit(x, y, opts);
        const double h = 1e-5;
        for (int probe = 0; probe < 100; ++probe) {
            Vector at(dim);
            for (int d = 0; d < dim; ++d) at(d) = unif(rng);
            const Vector g = gp.predict_gradient(at);
            Vector fd(dim);
            for (int d = 0; d < dim; ++d) {
                Vector up = at, dn = at;
                up(d) += h;
                dn(d) -= h;
                fd(d) = (gp.predict(up) - gp.predict(dn)) / (2.0 * h);
            }
            worst = std::max(worst, (g - fd).norm() / fd.norm());
        }
    }
    return {worst < 1e-5, "max relative error = " + fmt(worst) + " at 1000 points"};
}

Outcome copula_recursion() {
    RunConfig rc;
    const Problem p = rc.problem();
    const Matrix data = history(p, 110, 4);
    WeightedSample c = WeightedSample::from_data(data.topRows(10), p.model);
    Matrix grid(2, 100);
    for (int k = 0; k < 100; ++k) grid.col(k) << (k % 10 + 0.5) / 10.0, (k / 10 + 0.5) / 10.0;
    double worst = 0.0;
    for (int r = 10; r < 110; ++r) {
        const Vector z = data.row(r).transpose();
        const WeightedSample next = update_copula(c, z, p.model);
        const Vector u = pseudo_observe(z, p.model);
        for (int k = 0; k < grid.cols(); ++k) {
            const double ind = (u.array() <= grid.col(k).array()).all() ? 1.0 : 0.0;
            const double expected = (c.size() * c.cdf(grid.col(k)) + ind) / (c.size() + 1.0);
            worst = std::max(worst, std::abs(next.cdf(grid.col(k)) - expected));
        }
        c = next;
    }
    auto sorted = [](const Matrix& m) {
        std::vector<std::vector<double>> cols;
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            cols.emplace_back(m.col(j).data(), m.col(j).data() + m.rows());
        std::sort(cols.begin(), cols.end());
        return cols;
    };
    const bool same = sorted(c.points()) == sorted(WeightedSample::from_data(data, p.model).points());
    return {worst <= 1e-15 && same,
            "max CDF deviation = " + fmt(worst) + ", batch multiset " + (same ? "equal" : "differs")};
}

Outcome penalty_iff() {
    Rng rng = make_rng(5, "acceptance");
    std::uniform_int_distribution<int> sizes(2, 15);
    int zero = 0, positive = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const int m = sizes(rng);
        std::vector<int> perm(static_cast<std::size_t>(m));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix pts(2, m);
        for (int k = 0; k < m; ++k) pts.col(k) << (k + 1.0) / m, (perm[static_cast<std::size_t>(k)] + 1.0) / m;
        zero += marginal_mismatch(DiscreteMeasure::uniform(pts)) == 0.0;
        Matrix moved = pts;
        moved.row(inst % 2) = (moved.row(inst % 2).array() + 0.1).min(1.0);
        positive += marginal_mismatch(DiscreteMeasure::uniform(moved)) > 0.0;
    }
    return {zero == 20 && positive == 20,
            std::to_string(zero) + "/20 zero before, " + std::to_string(positive) + "/20 positive after"};
}

class Bilinear final : public SaddleProblem {
public:
    void descent_gradient(const Vector&, const Vector& y, int, Vector& g) const override { g = y; }
    void ascent_gradient(const Vector& x, const Vector&, int, Vector& g) const override { g = x; }
    void project_descent(Vector& x) const override { x = x.cwiseMax(-1.0).cwiseMin(1.0); }
    void project_ascent(Vector& y) const override { y = y.cwiseMax(-1.0).cwiseMin(1.0); }
};

Outcome sgda_saddle() {
    Bilinear problem;
    Rng rng = make_rng(6, "acceptance");
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    int hits = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SgdaConfig cfg;
        cfg.seed = seed;
        const SaddleResult r =
            sgda(problem, Vector::Constant(1, unif(rng)), Matrix::Constant(1, 1, unif(rng)), cfg);
        const double dist = std::max(std::abs(r.x(0)), std::abs(r.ys(0, 0)));
        worst = std::max(worst, dist);
        hits += dist < 1e-2;
    }
    return {hits == 10, std::to_string(hits) + "/10 seeds, max distance " + fmt(worst)};
}

// min over gamma >= 0 of gamma r^2 + mean_j max_u [V(a, u) - gamma |u - u_j|^2],
// the inner maximum taken over a 200 x 200 grid plus the data point itself.
double grid_dual(const DualContext& ctx, const Matrix& data, const Vector& a) {
    const int side = 200, cells = side * side, count = static_cast<int>(data.cols());
    Matrix u(2, cells + 1);
    for (int k = 0; k < cells; ++k) u.col(k) << (k % side + 0.5) / side, (k / side + 0.5) / side;
    std::vector<Vector> values(static_cast<std::size_t>(count));
    std::vector<Vector> dist(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        u.col(cells) = data.col(j);
        Vector v(cells + 1), d(cells + 1);
        for (int k = 0; k <= cells; ++k) {
            v(k) = successor_value(ctx.successor, a, u.col(k), false).value;
            d(k) = (u.col(k) - data.col(j)).squaredNorm();
        }
        values[static_cast<std::size_t>(j)] = v;
        dist[static_cast<std::size_t>(j)] = d;
    }
    const double r2 = ctx.radius * ctx.radius;
    auto objective = [&](double gamma, double* slope) {
        double total = 0.0, moved = 0.0;
        for (int j = 0; j < count; ++j) {
            Eigen::Index at = 0;
            total += (values[static_cast<std::size_t>(j)] - gamma * dist[static_cast<std::size_t>(j)]).maxCoeff(&at);
            moved += dist[static_cast<std::size_t>(j)](at);
        }
        if (slope) *slope = r2 - moved / count;
        return gamma * r2 + total / count;
    };
    double hi = 1.0, slope = 0.0;
    for (objective(hi, &slope); slope < 0.0 && hi < 1e12; objective(hi, &slope)) hi *= 2.0;
    double lo = 0.0;
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - golden * (hi - lo), x2 = lo + golden * (hi - lo);
    double f1 = objective(x1, nullptr), f2 = objective(x2, nullptr);
    for (int it = 0; it < 80; ++it) {
        if (f1 <= f2) {
            hi = x2, x2 = x1, f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = objective(x1, nullptr);
        } else {
            lo = x1, x1 = x2, f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = objective(x2, nullptr);
        }
    }
    return std::min({f1, f2, objective(0.0, nullptr)});
}

Outcome inner_oracle() {
    RunConfig rc;
    rc.horizon = 1;
    const Problem p = rc.problem();
    const int t0 = 30;
    DesignConfig design;
    design.wealth_paths = 500;
    const auto points = design_points(0, 5, 7, p, t0, 2, design);
    SgdaConfig cfg;
    cfg.bernstein_degree = 0;
    double worst = 0.0;
    for (std::size_t s = 0; s < points.size(); ++s) {
        const DesignPoint& pt = points[s];
        DualContext ctx;
        ctx.successor.wealth = pt.state.wealth;
        ctx.successor.summary = pt.state.copula_summary;
        ctx.successor.count = pt.copula.size();
        ctx.successor.moments = 2;
        ctx.successor.model = &p.model;
        ctx.successor.rate = p.market.rate_per_period;
        ctx.successor.next = terminal_value_fn(p.market.risk_aversion);
        ctx.radius = radius(0.1, t0, 0, RadiusConfig{});
        ctx.box = p.box;
        cfg.seed = s;
        const SgdaSolution sol = sgda_solve(ctx, pt.copula.points(), cfg);
        double oracle = grid_dual(ctx, pt.copula.points(), sol.point.a);
        for (int i = 0; i <= 5; ++i)
            for (int k = 0; k <= 5; ++k)
                oracle = std::min(oracle, grid_dual(ctx, pt.copula.points(),
                                                    (Vector(2) << i / 5.0, k / 5.0).finished()));
        const double gap = std::abs(sol.value - oracle) / std::abs(oracle);
        // Same comparison with the control pinned inside the box, where the
        // adversary has to move.
        const Vector pinned = (Vector(2) << 0.3 + 0.1 * static_cast<double>(s), 0.6).finished();
        DualContext fixed = ctx;
        fixed.box = ControlBox{pinned, pinned};
        const SgdaSolution pinned_sol = sgda_solve(fixed, pt.copula.points(), cfg);
        const double pinned_oracle = grid_dual(fixed, pt.copula.points(), pinned);
        const double pinned_gap = std::abs(pinned_sol.value - pinned_oracle) / std::abs(pinned_oracle);
        std::cerr << "  inner state " << s << ": wealth " << pt.state.wealth << " sgda " << sol.value
                  << " grid " << oracle << " | pinned sgda " << pinned_sol.value << " grid "
                  << pinned_oracle << '\n';
        worst = std::max({worst, gap, pinned_gap});
    }
    return {worst < 5e-2, "max relative gap = " + fmt(worst) + " over 5 states, free and pinned control"};
}

Outcome dp_oracle() {
    RunConfig rc;
    rc.horizon = 2;
    rc.t0 = 20;
    const Problem p = rc.problem();
    SolverConfig cfg = rc.solver();
    cfg.checkpoint_dir.clear();
    cfg.gp.relative_jitter = 1e-12;
    Matrix noise(2, 2);
    noise << 0.06, -0.05, 0.09, -0.08;
    cfg.reference_noise = noise;
    cfg.candidate_controls = {Vector::Zero(2), (Vector(2) << 0.6, 0.2).finished(),
                              (Vector(2) << 0.3, 0.9).finished()};
    const Matrix data = history(p, rc.t0, 8);
    const WeightedSample anchor = WeightedSample::from_data(data, p.model);
    auto root = [&](double wealth) {
        DesignPoint d;
        d.state.wealth = wealth;
        d.state.time = 0;
        d.state.copula_summary = summarize(anchor, 2).flatten();
        d.copula = anchor;
        return d;
    };
    std::vector<DesignPoint> first{root(100.0), root(90.0)};
    std::vector<DesignPoint> second;
    for (const Vector& a : cfg.candidate_controls)
        for (int m = 0; m < 2; ++m) {
            const Transition tr = transition_G(first[0].state, anchor, a, noise.col(m), p.model, p.market);
            second.push_back({tr.state, tr.copula});
        }
    cfg.explicit_design = {first, second};
    const SolveArtifacts art = backward_solve(StrategyKind::TrueModelOptimal, data, p, cfg, 1);

    const double r = p.market.rate_per_period, lambda = p.market.risk_aversion;
    auto best = [&](const std::function<double(double)>& value_of, double x) {
        double v = std::numeric_limits<double>::infinity();
        for (const Vector& a : cfg.candidate_controls)
            v = std::min(v, 0.5 * (value_of(wealth_step(x, a, noise.col(0), r)) +
                                   value_of(wealth_step(x, a, noise.col(1), r))));
        return v;
    };
    const double exact = best([&](double x1) { return best([&](double x2) { return loss(x2, lambda); }, x1); }, 100.0);
    const double diff = std::abs(art.layers[0].values(0) - exact);
    return {diff <= 1e-6, "|V0 - tree| = " + fmt(diff) + " (tree " + fmt(exact) + ")"};
}

Outcome zero_uncertainty() {
    RunConfig rc;
    rc.horizon = 3;
    rc.t0 = 100;
    rc.design_points = 100;
    rc.radius_scale = 0.0;
    // Bernstein terms cancel at degree 0; with higher degrees a zero-radius
    // ball around a finite sample violates the marginal constraints.
    rc.bernstein_degree = 0;
    rc.design_corr_low = 0.85;
    rc.design_corr_high = 0.85;
    const Problem p = rc.problem();
    SolverConfig cfg = rc.solver();
    cfg.checkpoint_dir.clear();
    const Matrix data = history(p, rc.t0, 9);
    const SolveArtifacts arc = backward_solve(StrategyKind::AdaptiveRobustCopula, data, p, cfg, 9);
    const SolveArtifacts tr = backward_solve(StrategyKind::TrueModelOptimal, data, p, cfg, 9);
    double worst = 0.0;
    for (int j = 0; j < 100; j += 10) {
        const double a = arc.layers[0].values(j), t = tr.layers[0].values(j);
        worst = std::max(worst, std::abs(a - t) / std::abs(t));
    }
    return {worst <= 2e-2, "max relative difference = " + fmt(worst) + " at 10 points"};
}

Outcome table_ordering() {
    int utility_ok = 0, variance_ok = 0;
    for (int rep = 0; rep < 10; ++rep) {
        RunConfig rc;
        rc.seed = 100 + static_cast<std::uint64_t>(rep);
        rc.t0 = 100;
        rc.horizon = 3;
        rc.design_points = 200;
        rc.paths = 500;
        const Problem p = rc.problem();
        SolverConfig cfg = rc.solver();
        cfg.checkpoint_dir.clear();
        const Matrix data = history(p, rc.t0, rc.seed);
        std::vector<SummaryStats> s;
        for (StrategyKind k : {StrategyKind::TrueModelOptimal, StrategyKind::AdaptiveRobustCopula,
                               StrategyKind::AdaptiveRobustEmpirical}) {
            const SolveArtifacts art = backward_solve(k, data, p, cfg, rc.seed);
            s.push_back(summarize_paths(forward_simulate(art, p, rc.paths, rc.seed, data, rc.moments),
                                        rc.risk_aversion));
        }
        const bool u = s[0].mean_utility >= s[1].mean_utility && s[1].mean_utility >= s[2].mean_utility;
        const bool v = s[0].variance <= s[1].variance && s[1].variance <= s[2].variance;
        utility_ok += u;
        variance_ok += v;
        std::cerr << "  replication " << rep << ": utility tr/arc/are " << s[0].mean_utility << ' '
                  << s[1].mean_utility << ' ' << s[2].mean_utility << " variance " << s[0].variance << ' '
                  << s[1].variance << ' ' << s[2].variance << '\n';
    }
    return {utility_ok >= 8 && variance_ok >= 8, "utility ordering " + std::to_string(utility_ok) +
                                                     "/10, reversed variance ordering " +
                                                     std::to_string(variance_ok) + "/10"};
}

Outcome coverage() {
    RunConfig rc;
    const Problem p = rc.problem();
    const DiscreteMeasure reference = DiscreteMeasure::uniform(true_copula_sample(p.model, 200));
    const double r = radius(rc.alpha, 100, 0, rc.solver().radius);
    int covered = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const WeightedSample c = WeightedSample::from_data(history(p, 100, 1000 + static_cast<std::uint64_t>(rep)), p.model);
        covered += wasserstein_p(DiscreteMeasure::uniform(c.points()), reference, 2.0) <= r;
    }
    const double share = covered / 200.0;
    return {share >= 1.0 - rc.alpha, "coverage " + fmt(share) + " at radius " + fmt(r)};
}

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;  // 0 when unbounded
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "transport matches brute-force plans", 10, transport_oracle},
        {2, "bernstein integral", 5, bernstein_integral},
        {3, "surrogate gradients", 30, gp_gradients},
        {4, "copula recursion", 0, copula_recursion},
        {5, "marginal penalty vanishes exactly on uniform marginals", 0, penalty_iff},
        {6, "bilinear saddle", 0, sgda_saddle},
        {7, "inner problem against grid search", 300, inner_oracle},
        {8, "true-model recursion against the exhaustive tree", 0, dp_oracle},
        {9, "zero radius reproduces the true-model values", 0, zero_uncertainty},
        {10, "strategy ordering", 7200, table_ordering},
        {11, "radius coverage", 600, coverage},
    };
    std::vector<int> chosen;
    for (int i = 1; i < argc; ++i) chosen.push_back(std::atoi(argv[i]));
    bool ok = true;
    for (const Criterion& c : all) {
        if (!chosen.empty() && std::find(chosen.begin(), chosen.end(), c.id) == chosen.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.budget_seconds <= 0 || secs < c.budget_seconds;
        const bool pass = out.pass && in_time;
        ok = ok && pass;
        std::cout << "criterion " << c.id << " " << (pass ? "PASS" : "FAIL") << " " << c.name << ": "
                  << out.detail << " (" << fmt(secs) << " s" << (in_time ? "" : ", over budget") << ")"
                  << std::endl;
    }
    return ok ? 0 : 1;
}
