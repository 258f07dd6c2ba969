#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nparc/bellman.hpp"
#include "nparc/config.hpp"
#include "nparc/copula.hpp"
#include "nparc/errors.hpp"
#include "nparc/evaluation.hpp"
#include "nparc/rng.hpp"

namespace fs = std::filesystem;
using namespace nparc;

namespace {

struct Options {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string kind;
    unsigned workers = 0;
    std::string out;
};

RunConfig effective_config(const Options& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : RunConfig::load_file(o.config_path);
    if (o.seed_set) cfg.seed = o.seed;
    if (o.workers > 0) cfg.workers = o.workers;
    cfg.validate();
    return cfg;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

Matrix load_data(const RunConfig& cfg) {
    std::ifstream in(cfg.data_path);
    if (!in) throw DataError("cannot read data file '" + cfg.data_path + "'; run generate first");
    return read_data_csv(in);
}

int cmd_generate(const Options& o) {
    const RunConfig cfg = effective_config(o);
    const Problem p = cfg.problem();
    Rng rng = make_rng(cfg.seed, "data");
    Matrix data(cfg.t0, p.model.dim());
    for (int r = 0; r < cfg.t0; ++r) data.row(r) = p.model.sample(rng).transpose();
    const fs::path path = o.out.empty() ? fs::path(cfg.data_path) : fs::path(o.out);
    auto out = open_out(path);
    write_data_csv(out, data);
    std::cout << "wrote " << cfg.t0 << " observations to " << path.string() << '\n';
    return 0;
}

int cmd_estimate(const Options& o) {
    const RunConfig cfg = effective_config(o);
    const Problem p = cfg.problem();
    const Matrix data = load_data(cfg);
    const WeightedSample c = WeightedSample::from_data(data, p.model);
    const fs::path dir = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
    {
        auto out = open_out(dir / "copula.csv");
        write_sample_csv(out, c);
    }
    {
        auto out = open_out(dir / "summary.csv");
        write_summary_csv(out, summarize(c, cfg.moments));
    }
    const double r = radius(cfg.alpha, c.size(), 0, cfg.solver().radius);
    std::cout << "points=" << c.size() << " radius=" << r << " dir=" << dir.string() << '\n';
    return 0;
}

int cmd_solve(const Options& o) {
    if (o.kind.empty()) throw InvalidConfig("solve needs --kind (arc, are or tr)");
    const RunConfig cfg = effective_config(o);
    const StrategyKind kind = parse_strategy(o.kind);
    SolverConfig solver = cfg.solver();
    if (!o.out.empty()) solver.checkpoint_dir = o.out;
    const Matrix data = load_data(cfg);
    backward_solve(kind, data, cfg.problem(), solver, cfg.seed, &std::cout);
    std::cout << "solved kind=" << to_string(kind) << " checkpoints=" << solver.checkpoint_dir << '\n';
    return 0;
}

std::vector<PathRecord> simulate_kind(const RunConfig& cfg, const Problem& p, const Matrix& data,
                                      StrategyKind kind, const std::string& dir) {
    const SolveArtifacts art = load_artifacts(dir, kind, cfg.horizon);
    return forward_simulate(art, p, cfg.paths, cfg.seed, data, cfg.moments, cfg.workers);
}

int cmd_simulate(const Options& o) {
    if (o.kind.empty()) throw InvalidConfig("simulate needs --kind (arc, are or tr)");
    const RunConfig cfg = effective_config(o);
    const StrategyKind kind = parse_strategy(o.kind);
    const Problem p = cfg.problem();
    const Matrix data = load_data(cfg);
    const auto paths = simulate_kind(cfg, p, data, kind, cfg.checkpoint_dir);
    const fs::path dir = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
    {
        auto out = open_out(dir / ("paths_" + to_string(kind) + ".csv"));
        write_paths_csv(out, paths);
    }
    const SummaryStats s = summarize_paths(paths, cfg.risk_aversion);
    std::cout << "kind=" << to_string(kind) << " expected_utility=" << s.mean_utility
              << " variance=" << s.variance << " q30=" << s.quantile_30 << " q90=" << s.quantile_90
              << " max=" << s.max << " min=" << s.min << '\n';
    return 0;
}

int cmd_compare(const Options& o) {
    const RunConfig cfg = effective_config(o);
    const Problem p = cfg.problem();
    const Matrix data = load_data(cfg);
    const fs::path dir = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
    const std::vector<std::pair<StrategyKind, std::string>> kinds = {
        {StrategyKind::AdaptiveRobustCopula, "AR"},
        {StrategyKind::AdaptiveRobustEmpirical, "AR (No Marginals)"},
        {StrategyKind::TrueModelOptimal, "TR"},
    };
    std::vector<std::string> names;
    std::vector<SummaryStats> stats;
    auto quantiles = open_out(dir / "wealth_quantiles.csv");
    bool header = true;
    for (const auto& [kind, name] : kinds) {
        const auto paths = simulate_kind(cfg, p, data, kind, cfg.checkpoint_dir);
        names.push_back(name);
        stats.push_back(summarize_paths(paths, cfg.risk_aversion));
        write_wealth_quantiles(quantiles, to_string(kind), paths, header);
        header = false;
    }
    auto table = open_out(dir / "stats.csv");
    write_stats_table(table, names, stats);
    write_stats_table(std::cout, names, stats);
    return 0;
}

int exit_code(const Error& e) {
    const std::string& c = e.code();
    if (c == "INVALID_CONFIG" || c == "INVALID_INPUT") return 2;
    if (c == "DATA_ERROR" || c == "INCOMPLETE_ARTIFACTS") return 3;
    if (c == "NON_CONVERGENCE") return 4;
    return 1;
}

void report(const std::string& code, const std::string& what) {
    std::string msg = what;
    for (char& ch : msg)
        if (ch == '\n' || ch == '"') ch = ' ';
    std::cerr << "error code=" << code << " message=\"" << msg << "\"\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive robust control under copula uncertainty"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "key = value configuration file");
        sub->add_option("--seed", o.seed, "master seed (overrides the config)")
            ->each([&](const std::string&) { o.seed_set = true; });
        sub->add_option("--workers", o.workers, "worker thread cap (overrides the config)");
        sub->add_option("--out", o.out, "output file or directory");
    };
    auto* gen = app.add_subcommand("generate", "write t0 synthetic historical observations");
    auto* est = app.add_subcommand("estimate", "write the empirical copula and its summary");
    auto* sol = app.add_subcommand("solve", "run the backward recursion for one strategy");
    auto* sim = app.add_subcommand("simulate", "forward-simulate one solved strategy");
    auto* cmp = app.add_subcommand("compare", "simulate all strategies and write the statistics table");
    for (auto* sub : {gen, est, sol, sim, cmp}) add_common(sub);
    for (auto* sub : {sol, sim}) sub->add_option("--kind", o.kind, "arc, are or tr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report("USAGE", e.what());
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_generate(o);
        if (est->parsed()) return cmd_estimate(o);
        if (sol->parsed()) return cmd_solve(o);
        if (sim->parsed()) return cmd_simulate(o);
        if (cmp->parsed()) return cmd_compare(o);
    } catch (const Error& e) {
        report(e.code(), e.what());
        return exit_code(e);
    } catch (const std::exception& e) {
        report("INTERNAL", e.what());
        return 1;
    }
    return 0;
}
