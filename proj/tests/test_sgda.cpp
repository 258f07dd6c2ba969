#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nparc/copula.hpp"
#include "nparc/errors.hpp"
#include "nparc/gp.hpp"
#include "nparc/rng.hpp"
#include "nparc/sgda.hpp"
#include "nparc/transition.hpp"
#include "nparc/transport.hpp"

using namespace nparc;

namespace {

class Bilinear final : public SaddleProblem {
public:
    void descent_gradient(const Vector&, const Vector& y, int, Vector& g) const override { g = y; }
    void ascent_gradient(const Vector& x, const Vector&, int, Vector& g) const override { g = x; }
    void project_descent(Vector& x) const override { x = x.cwiseMax(-1.0).cwiseMin(1.0); }
    void project_ascent(Vector& y) const override { y = y.cwiseMax(-1.0).cwiseMin(1.0); }
};

TrueModel market_model() {
    Matrix corr(2, 2);
    corr << 1.0, 0.85, 0.85, 1.0;
    return TrueModel::from_annual((Vector(2) << 0.09, 0.13).finished(),
                                  (Vector(2) << 0.25, 0.4).finished(), corr, 10);
}

struct Fixture {
    TrueModel model = market_model();
    WeightedSample sample;
    GpSurrogate gp;
    DualContext ctx;
    SgdaConfig cfg;

    explicit Fixture(int points = 20) {
        Rng rng = make_rng(21, "test");
        Matrix data(points, 2);
        for (int r = 0; r < points; ++r) data.row(r) = model.sample(rng).transpose();
        sample = WeightedSample::from_data(data, model);
        // Surrogate over [wealth, summary] states around the sample summary.
        const Vector summary = summarize(sample, 2).flatten();
        Matrix x(40, 1 + summary.size());
        Vector y(40);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int i = 0; i < 40; ++i) {
            x(i, 0) = 100.0 + 15.0 * unif(rng);
            for (Eigen::Index k = 0; k < summary.size(); ++k) x(i, 1 + k) = summary(k) + 0.02 * unif(rng);
            y(i) = loss(x(i, 0), 0.05) + 0.3 * (x(i, 1) - summary(0));
        }
        gp = GpSurrogate::with_length_scales(x, y, Vector::Constant(x.cols(), 0.8));
        ctx.successor.wealth = 100.0;
        ctx.successor.summary = summary;
        ctx.successor.count = sample.size();
        ctx.successor.moments = 2;
        ctx.successor.model = &model;
        ctx.successor.rate = 0.002;
        ctx.successor.next = surrogate_value_fn(gp);
        ctx.radius = 0.1;
        ctx.box = ControlBox::unit(2);
        cfg.bernstein_degree = 3;
    }

    DualPoint point(Rng& rng) const {
        std::uniform_real_distribution<double> unif(0.05, 0.95);
        DualPoint p;
        p.a = (Vector(2) << unif(rng), unif(rng)).finished();
        p.gamma = 2.0 * unif(rng);
        p.g = Matrix(2, cfg.bernstein_degree + 1);
        for (Eigen::Index i = 0; i < p.g.size(); ++i) p.g(i) = unif(rng) - 0.5;
        p.u = (Vector(2) << unif(rng), unif(rng)).finished();
        return p;
    }
};

}  // namespace

TEST_CASE("bernstein basis") {
    for (int k : {1, 2, 4}) {
        CHECK(bernstein(0, k, 0.0) == 1.0);
        CHECK(bernstein(k, k, 1.0) == 1.0);
        for (double u : {0.0, 0.13, 0.5, 0.77, 1.0}) {
            double total = 0.0;
            for (int j = 0; j <= k; ++j) total += bernstein(j, k, u);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
    const double h = 1e-6;
    CHECK(bernstein_derivative(1, 3, 0.4) ==
          doctest::Approx((bernstein(1, 3, 0.4 + h) - bernstein(1, 3, 0.4 - h)) / (2 * h)).epsilon(1e-8));
    CHECK_THROWS_AS(bernstein(4, 3, 0.5), InvalidInput);
}

TEST_CASE("bernstein integral by Monte Carlo") {
    Rng rng = make_rng(1, "test");
    std::uniform_real_distribution<double> unif;
    std::vector<double> u(200000);
    for (double& v : u) v = unif(rng);
    for (int big_k : {1, 2, 4}) {
        for (int k = 0; k <= big_k; ++k) {
            double s = 0.0, s2 = 0.0;
            for (double v : u) {
                const double b = bernstein(k, big_k, v);
                s += b;
                s2 += b * b;
            }
            const double mean = s / u.size();
            const double se = std::sqrt((s2 / u.size() - mean * mean) / u.size());
            CHECK(std::abs(mean - 1.0 / (big_k + 1)) <= 3.0 * se);
        }
    }
}

TEST_CASE("dual objective special cases") {
    Fixture f;
    Rng rng = make_rng(2, "test");
    DualPoint p = f.point(rng);
    const Vector u_hat = f.sample.point(3);
    const SuccessorValue sv = successor_value(f.ctx.successor, p.a, p.u, false);

    DualPoint plain = p;
    plain.gamma = 0.0;
    plain.g.setZero();
    CHECK(dual_objective(plain, u_hat, f.ctx, f.cfg) == doctest::Approx(sv.value).epsilon(1e-14));

    DualPoint centred = p;
    centred.g.setZero();
    centred.u = u_hat;
    const SuccessorValue at_hat = successor_value(f.ctx.successor, p.a, u_hat, false);
    CHECK(dual_objective(centred, u_hat, f.ctx, f.cfg) ==
          doctest::Approx(p.gamma * 0.01 + at_hat.value).epsilon(1e-14));
    const DualGradient g = dual_gradient(centred, u_hat, f.ctx, f.cfg);
    CHECK(g.gamma == doctest::Approx(0.01).epsilon(1e-14));
    for (int i = 0; i < 2; ++i) CHECK(std::abs(g.g.row(i).sum()) < 1e-14);
}

TEST_CASE("dual objective matches an independent composition") {
    Fixture f;
    Rng rng = make_rng(3, "test");
    MarketParams market;
    market.rate_per_period = 0.002;
    market.horizon = 5;
    for (int trial = 0; trial < 10; ++trial) {
        const DualPoint p = f.point(rng);
        const Vector u_hat = f.sample.point(trial);
        AugmentedState y;
        y.wealth = f.ctx.successor.wealth;
        y.copula_summary = f.ctx.successor.summary;
        const Vector z = f.model.from_uniform(p.u);
        const Transition next = transition_G(y, f.sample, p.a, z, f.model, market);
        double expected = f.gp.predict(next.state.reduced());
        expected -= p.gamma * std::pow(premetric_dF(z, f.model.from_uniform(u_hat), f.model), 2.0);
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k <= 3; ++k) expected += p.g(i, k) * (0.25 - bernstein(k, 3, p.u(i)));
        expected += p.gamma * 0.01;
        CHECK(dual_objective(p, u_hat, f.ctx, f.cfg) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("dual gradient matches central differences") {
    Fixture f;
    Rng rng = make_rng(4, "test");
    for (DistanceSpace space : {DistanceSpace::Copula, DistanceSpace::Noise}) {
        f.ctx.space = space;
        for (int trial = 0; trial < 25; ++trial) {
            const DualPoint p = f.point(rng);
            const Vector u_hat = f.sample.point(trial % f.sample.size());
            const DualGradient g = dual_gradient(p, u_hat, f.ctx, f.cfg);
            auto rel_ok = [](double analytic, double numeric) {
                return std::abs(analytic - numeric) <= 1e-4 * std::max(std::abs(numeric), 1e-4);
            };
            const double h = 1e-6;
            for (int i = 0; i < 2; ++i) {
                DualPoint up = p, dn = p;
                up.a(i) += h;
                dn.a(i) -= h;
                CHECK(rel_ok(g.a(i), (dual_objective(up, u_hat, f.ctx, f.cfg) - dual_objective(dn, u_hat, f.ctx, f.cfg)) / (2 * h)));
                up = p;
                dn = p;
                up.u(i) += h;
                dn.u(i) -= h;
                CHECK(rel_ok(g.u(i), (dual_objective(up, u_hat, f.ctx, f.cfg) - dual_objective(dn, u_hat, f.ctx, f.cfg)) / (2 * h)));
                for (int k = 0; k <= 3; ++k) {
                    up = p;
                    dn = p;
                    up.g(i, k) += h;
                    dn.g(i, k) -= h;
                    CHECK(rel_ok(g.g(i, k), (dual_objective(up, u_hat, f.ctx, f.cfg) - dual_objective(dn, u_hat, f.ctx, f.cfg)) / (2 * h)));
                }
            }
            DualPoint up = p, dn = p;
            up.gamma += h;
            dn.gamma -= h;
            CHECK(rel_ok(g.gamma, (dual_objective(up, u_hat, f.ctx, f.cfg) - dual_objective(dn, u_hat, f.ctx, f.cfg)) / (2 * h)));
        }
    }
}

TEST_CASE("bilinear saddle point") {
    Bilinear problem;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SgdaConfig cfg;
        cfg.seed = seed;
        const SaddleResult r = sgda(problem, Vector::Constant(1, 0.8), Matrix::Constant(1, 1, -0.6), cfg);
        CHECK(std::abs(r.x(0)) < 1e-2);
        CHECK(std::abs(r.ys(0, 0)) < 1e-2);
    }
}

TEST_CASE("sgda replays bit for bit") {
    Fixture f;
    SgdaConfig cfg;
    cfg.max_iters = 1500;
    cfg.seed = 17;
    std::ostringstream t1, t2;
    const SgdaSolution a = sgda_solve(f.ctx, f.sample.points(), cfg, nullptr, &t1);
    const SgdaSolution b = sgda_solve(f.ctx, f.sample.points(), cfg, nullptr, &t2);
    CHECK(t1.str() == t2.str());
    CHECK(a.value == b.value);
    CHECK(a.point.a == b.point.a);
    CHECK(a.point.gamma == b.point.gamma);
}

TEST_CASE("zero radius single atom: worst case is the data point") {
    Fixture f;
    f.ctx.radius = 0.0;
    f.ctx.marginal_terms = false;
    f.cfg.bernstein_degree = 0;
    const Vector u_hat = (Vector(2) << 0.35, 0.6).finished();
    const Matrix data = u_hat;
    f.ctx.box = ControlBox{(Vector(2) << 0.3, 0.2).finished(), (Vector(2) << 0.3, 0.2).finished()};
    const SgdaSolution s = sgda_solve(f.ctx, data, f.cfg);
    const double direct = successor_value(f.ctx.successor, f.ctx.box.lower, u_hat, false).value;
    CHECK(s.value == doctest::Approx(direct).epsilon(1e-3));
    CHECK((s.adversary.col(0) - u_hat).norm() < 2e-2);
}

TEST_CASE("sgda config validation") {
    SgdaConfig cfg;
    cfg.descent_step = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = SgdaConfig{};
    cfg.u_margin = 0.7;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = SgdaConfig{};
    cfg.ascent_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}
