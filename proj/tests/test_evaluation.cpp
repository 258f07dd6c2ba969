#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nparc/bellman.hpp"
#include "nparc/errors.hpp"
#include "nparc/evaluation.hpp"
#include "nparc/rng.hpp"

using namespace nparc;

namespace {

Problem small_problem(int horizon) {
    Matrix corr(2, 2);
    corr << 1.0, 0.85, 0.85, 1.0;
    Problem p{TrueModel::from_annual((Vector(2) << 0.09, 0.13).finished(),
                                     (Vector(2) << 0.25, 0.4).finished(), corr, 10),
              MarketParams{}, ControlBox::unit(2)};
    p.market.horizon = horizon;
    return p;
}

SolverConfig small_solver(int t0, int points) {
    SolverConfig cfg;
    cfg.t0 = t0;
    cfg.design.count = points;
    cfg.design.wealth_paths = 300;
    cfg.qmc_points = 64;
    cfg.gp.restarts = 2;
    return cfg;
}

Matrix history(const Problem& p, int rows) {
    Rng rng = make_rng(77, "data");
    Matrix data(rows, p.model.dim());
    for (int r = 0; r < rows; ++r) data.row(r) = p.model.sample(rng).transpose();
    return data;
}

std::vector<PathRecord> with_terminal(const std::vector<double>& wealth) {
    std::vector<PathRecord> paths;
    for (std::size_t i = 0; i < wealth.size(); ++i) {
        PathRecord r;
        r.path_id = static_cast<int>(i);
        r.wealth = {100.0, wealth[i]};
        paths.push_back(r);
    }
    return paths;
}

double sort_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t below = static_cast<std::size_t>(pos);
    if (below + 1 >= v.size()) return v.back();
    return v[below] * (1.0 - (pos - below)) + v[below + 1] * (pos - below);
}

}  // namespace

TEST_CASE("quantiles match a sort-based reference") {
    Rng rng = make_rng(1, "test");
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(5 + trial * 7));
        for (double& x : v) x = normal(rng);
        for (double q : {0.0, 0.05, 0.3, 0.5, 0.9, 1.0})
            CHECK(quantile_type7(v, q) == doctest::Approx(sort_quantile(v, q)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(quantile_type7({}, 0.5), InvalidInput);
    CHECK_THROWS_AS(quantile_type7({1.0}, 1.5), InvalidInput);
}

TEST_CASE("summary of identical outcomes") {
    const SummaryStats s = summarize_paths(with_terminal({103.0, 103.0, 103.0}), 0.05);
    CHECK(s.variance == 0.0);
    CHECK(s.quantile_30 == 103.0);
    CHECK(s.quantile_90 == 103.0);
    CHECK(s.max == 103.0);
    CHECK(s.min == 103.0);
    CHECK(s.mean_utility == doctest::Approx(-loss(103.0, 0.05)));
}

TEST_CASE("summary statistics") {
    const SummaryStats s = summarize_paths(with_terminal({90.0, 100.0, 110.0, 120.0}), 0.05);
    CHECK(s.variance == doctest::Approx(500.0 / 3.0));
    CHECK(s.quantile_90 == doctest::Approx(117.0));
    CHECK(s.paths == 4);
    std::ostringstream table;
    write_stats_table(table, {"A"}, {s});
    CHECK(table.str().rfind("statistic,A\nexpected_utility,", 0) == 0);
}

TEST_CASE("all-cash policy gives deterministic wealth") {
    Problem p = small_problem(3);
    p.box = ControlBox{Vector::Zero(2), Vector::Zero(2)};
    const Matrix data = history(p, 30);
    const SolveArtifacts art = backward_solve(StrategyKind::TrueModelOptimal, data, p, small_solver(30, 5), 1);
    const auto paths = forward_simulate(art, p, 50, 4, data, 2);
    const double expected = 100.0 * std::pow(1.0 + p.market.rate_per_period, 3);
    for (const auto& r : paths) CHECK(r.wealth.back() == doctest::Approx(expected).epsilon(1e-14));
    CHECK(summarize_paths(paths, 0.05).variance == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("simulation is reproducible and shares noise across worker counts") {
    const Problem p = small_problem(2);
    const Matrix data = history(p, 30);
    const SolveArtifacts art = backward_solve(StrategyKind::TrueModelOptimal, data, p, small_solver(30, 8), 1);
    const auto a = forward_simulate(art, p, 40, 11, data, 2, 1);
    const auto b = forward_simulate(art, p, 40, 11, data, 2, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].wealth == b[i].wealth);
        CHECK(a[i].terminal_loss == b[i].terminal_loss);
    }
    SolveArtifacts partial = art;
    partial.layers.pop_back();
    CHECK_THROWS_AS(forward_simulate(partial, p, 5, 1, data, 2), IncompleteArtifacts);
}

TEST_CASE("wealth paths stay inside the design range") {
    const Problem p = small_problem(3);
    const Matrix data = history(p, 30);
    const SolverConfig cfg = small_solver(30, 10);
    const SolveArtifacts art = backward_solve(StrategyKind::TrueModelOptimal, data, p, cfg, 2);
    const auto paths = forward_simulate(art, p, 400, 3, data, 2);
    for (int t = 1; t < 3; ++t) {
        const Matrix& design = art.layers[static_cast<std::size_t>(t)].design;
        const double lo = design.col(0).minCoeff(), hi = design.col(0).maxCoeff();
        int inside = 0;
        for (const auto& r : paths) inside += r.wealth[static_cast<std::size_t>(t)] >= lo && r.wealth[static_cast<std::size_t>(t)] <= hi;
        CHECK(inside >= 0.95 * paths.size());
    }
}

TEST_CASE("Monte Carlo error shrinks with the path count") {
    const Problem p = small_problem(2);
    const Matrix data = history(p, 30);
    const SolveArtifacts art = backward_solve(StrategyKind::TrueModelOptimal, data, p, small_solver(30, 8), 1);
    std::vector<double> errors;
    for (int count : {250, 1000, 4000}) {
        const auto paths = forward_simulate(art, p, count, 5, data, 2);
        double mean = 0.0, ss = 0.0;
        for (const auto& r : paths) mean += r.terminal_loss;
        mean /= count;
        for (const auto& r : paths) ss += (r.terminal_loss - mean) * (r.terminal_loss - mean);
        errors.push_back(std::sqrt(ss / (count - 1) / count));
    }
    CHECK(errors[0] / errors[1] == doctest::Approx(2.0).epsilon(0.2));
    CHECK(errors[1] / errors[2] == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("wealth quantile table") {
    std::ostringstream out;
    write_wealth_quantiles(out, "tr", with_terminal({90.0, 110.0}));
    CHECK(out.str() == "strategy,t,mean,q05,q25,q50,q75,q95\ntr,0,100,100,100,100,100,100\n"
                       "tr,1,100,91,95,100,105,109\n");
}
