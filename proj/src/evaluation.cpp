#include "nparc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "nparc/errors.hpp"
#include "nparc/parallel.hpp"
#include "nparc/rng.hpp"
#include "nparc/transition.hpp"

namespace nparc {

std::vector<PathRecord> forward_simulate(const SolveArtifacts& artifacts, const Problem& problem,
                                         int paths, std::uint64_t seed, const Matrix& data,
                                         int moments, unsigned workers) {
    if (paths < 1) throw InvalidInput("forward_simulate needs at least one path");
    const MarketParams& market = problem.market;
    market.validate();
    artifacts.check_complete(market.horizon);
    const WeightedSample start = WeightedSample::from_data(data, problem.model);
    AugmentedState y0;
    y0.wealth = market.initial_wealth;
    y0.copula_summary = summarize(start, moments).flatten();
    y0.time = 0;

    std::vector<PathRecord> out(static_cast<std::size_t>(paths));
    parallel_for(out.size(), workers, [&](std::size_t i) {
        Rng rng = make_rng(seed, "eval", i);
        PathRecord& rec = out[i];
        rec.path_id = static_cast<int>(i);
        rec.wealth.reserve(static_cast<std::size_t>(market.horizon + 1));
        rec.wealth.push_back(y0.wealth);
        Transition cur{y0, start};
        for (int t = 0; t < market.horizon; ++t) {
            const Vector a = artifacts.layers[static_cast<std::size_t>(t)].control(
                cur.state.reduced(), problem.box);
            const Vector z = problem.model.sample(rng);
            cur = transition_G(cur.state, cur.copula, a, z, problem.model, market);
            rec.controls.push_back(a);
            rec.wealth.push_back(cur.state.wealth);
        }
        rec.terminal_loss = loss(rec.wealth.back(), market.risk_aversion);
    });
    return out;
}

double quantile_type7(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInput("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("quantile level must lie in [0,1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SummaryStats summarize_paths(const std::vector<PathRecord>& paths, double risk_aversion) {
    if (paths.empty()) throw InvalidInput("cannot summarize zero paths");
    std::vector<double> terminal;
    terminal.reserve(paths.size());
    double loss_sum = 0.0;
    for (const auto& p : paths) {
        terminal.push_back(p.wealth.back());
        loss_sum += loss(p.wealth.back(), risk_aversion);
    }
    const double count = static_cast<double>(terminal.size());
    SummaryStats s;
    s.paths = static_cast<int>(terminal.size());
    s.mean_utility = -loss_sum / count;
    double mean = 0.0;
    for (double w : terminal) mean += w;
    mean /= count;
    double ss = 0.0;
    for (double w : terminal) ss += (w - mean) * (w - mean);
    s.variance = terminal.size() > 1 ? ss / (count - 1.0) : 0.0;
    s.quantile_30 = quantile_type7(terminal, 0.30);
    s.quantile_90 = quantile_type7(terminal, 0.90);
    s.max = *std::max_element(terminal.begin(), terminal.end());
    s.min = *std::min_element(terminal.begin(), terminal.end());
    return s;
}

void write_paths_csv(std::ostream& out, const std::vector<PathRecord>& paths) {
    out << std::setprecision(17) << "path_id,terminal_wealth,terminal_loss\n";
    for (const auto& p : paths) out << p.path_id << ',' << p.wealth.back() << ',' << p.terminal_loss << '\n';
}

void write_stats_table(std::ostream& out, const std::vector<std::string>& names,
                       const std::vector<SummaryStats>& stats) {
    if (names.size() != stats.size()) throw InvalidInput("one name per strategy column");
    out << std::setprecision(10) << "statistic";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    auto row = [&](const char* label, double SummaryStats::*field) {
        out << label;
        for (const auto& s : stats) out << ',' << s.*field;
        out << '\n';
    };
    row("expected_utility", &SummaryStats::mean_utility);
    row("variance", &SummaryStats::variance);
    row("q30", &SummaryStats::quantile_30);
    row("q90", &SummaryStats::quantile_90);
    row("max", &SummaryStats::max);
    row("min", &SummaryStats::min);
}

void write_wealth_quantiles(std::ostream& out, const std::string& name,
                            const std::vector<PathRecord>& paths, bool header) {
    if (paths.empty()) throw InvalidInput("no paths to summarize");
    out << std::setprecision(10);
    if (header) out << "strategy,t,mean,q05,q25,q50,q75,q95\n";
    const std::size_t steps = paths.front().wealth.size();
    std::vector<double> col(paths.size());
    for (std::size_t t = 0; t < steps; ++t) {
        double mean = 0.0;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            col[i] = paths[i].wealth[t];
            mean += col[i];
        }
        mean /= static_cast<double>(paths.size());
        out << name << ',' << t << ',' << mean;
        for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) out << ',' << quantile_type7(col, q);
        out << '\n';
    }
}

}  // namespace nparc
