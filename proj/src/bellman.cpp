#include "nparc/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>

#include "nparc/errors.hpp"
#include "nparc/parallel.hpp"
#include "nparc/rng.hpp"
#include "nparc/transition.hpp"

namespace nparc {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Cholesky factor of the n x n equicorrelation matrix.
Matrix equicorrelation_factor(int n, double rho) {
    if (n > 1) rho = std::max(rho, -1.0 / (n - 1) + 1e-3);
    rho = std::min(rho, 1.0 - 1e-9);
    Matrix r = Matrix::Constant(n, n, rho);
    r.diagonal().setOnes();
    return r.llt().matrixL();
}

Vector random_control(const ControlBox& box, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector a(box.dim());
    for (int i = 0; i < box.dim(); ++i) a(i) = box.lower(i) + unit(rng) * (box.upper(i) - box.lower(i));
    return a;
}

double expected_next(const SuccessorContext& ctx, const Vector& a, const Matrix& reference_u,
                     Vector* gradient) {
    double total = 0.0;
    if (gradient) gradient->setZero(a.size());
    for (Eigen::Index m = 0; m < reference_u.cols(); ++m) {
        const SuccessorValue sv = successor_value(ctx, a, reference_u.col(m), gradient != nullptr);
        total += sv.value;
        if (gradient) *gradient += sv.d_control;
    }
    const double inv = 1.0 / static_cast<double>(reference_u.cols());
    if (gradient) *gradient *= inv;
    return total * inv;
}

// Projected gradient descent with Armijo backtracking on the expected value.
InnerSolution minimize_expectation(const SuccessorContext& ctx, const ControlBox& box,
                                   const Matrix& reference_u, const Vector& start) {
    Vector a = box.project(start);
    Vector grad;
    double value = expected_next(ctx, a, reference_u, &grad);
    double width = (box.upper - box.lower).maxCoeff();
    if (!(width > 0.0)) return {value, a, true, {}};
    double step = 0.1 * width / std::max(grad.lpNorm<Eigen::Infinity>(), 1e-300);
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        const Vector old = a;
        bool accepted = false;
        while (step * grad.lpNorm<Eigen::Infinity>() > 1e-14 * width) {
            const Vector trial = box.project(old - step * grad);
            const Vector move = trial - old;
            if (move.lpNorm<Eigen::Infinity>() == 0.0) break;
            Vector trial_grad;
            const double v = expected_next(ctx, trial, reference_u, &trial_grad);
            if (v <= value + 1e-4 * grad.dot(move)) {
                a = trial;
                value = v;
                grad = trial_grad;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || (a - old).lpNorm<Eigen::Infinity>() < 1e-9 * width) {
            converged = true;
            break;
        }
    }
    return {value, a, converged, {}};
}

std::filesystem::path checkpoint_path(const std::string& dir, StrategyKind kind, int t) {
    return std::filesystem::path(dir) / (to_string(kind) + "_t" + std::to_string(t) + ".layer");
}

void put(std::ostream& out, const Matrix& m) {
    out << m.rows() << 'x' << m.cols();
    for (Eigen::Index i = 0; i < m.size(); ++i) out << ' ' << m.data()[i];
    out << ';';
}

// FNV-1a over a text rendering of every input that changes the solved layers.
std::uint64_t solve_fingerprint(StrategyKind kind, const Matrix& data, const Problem& problem,
                                const SolverConfig& cfg, std::uint64_t seed) {
    std::ostringstream s;
    s.precision(17);
    s << to_string(kind) << ' ' << seed << ';';
    put(s, data);
    put(s, problem.model.mean());
    put(s, problem.model.covariance());
    const MarketParams& mk = problem.market;
    s << mk.rate_per_period << ' ' << mk.horizon << ' ' << mk.risk_aversion << ' ' << mk.initial_wealth << ';';
    put(s, problem.box.lower);
    put(s, problem.box.upper);
    s << cfg.t0 << ' ' << cfg.alpha << ' ' << cfg.moments << ' ' << cfg.radius.c_scale << ' '
      << cfg.radius.exponent << ' ' << cfg.radius.dim << ' ' << cfg.radius.order << ';';
    const SgdaConfig& g = cfg.sgda;
    s << g.descent_step << ' ' << g.ascent_step << ' ' << g.decay_iters << ' ' << g.averaging_power << ' '
      << g.ascent_steps << ' ' << g.max_iters << ' ' << g.stall_window << ' ' << g.stall_tol << ' '
      << g.bernstein_degree << ' ' << g.order << ' ' << g.u_margin << ' ' << g.refine_iters << ' '
      << g.refine_tol << ';';
    const DesignConfig& d = cfg.design;
    s << d.count << ' ' << d.corr_low << ' ' << d.corr_high << ' ' << d.wealth_paths << ' '
      << d.wealth_quantile << ' ' << d.wealth_margin << ';';
    s << cfg.gp.relative_jitter << ' ' << cfg.gp.restarts << ' ' << cfg.gp.min_length_scale << ' '
      << cfg.gp.max_length_scale << ' ' << cfg.gp.max_optimizer_iterations << ';';
    s << cfg.qmc_points << ' ' << cfg.warm_start_chunk << ';';
    put(s, cfg.reference_noise);
    for (const Vector& c : cfg.candidate_controls) put(s, c);
    for (const auto& layer : cfg.explicit_design) {
        s << '|';
        for (const DesignPoint& p : layer) {
            s << p.state.wealth << ' ' << p.state.time << ' ' << p.copula.t0() << ';';
            put(s, p.state.copula_summary);
            put(s, p.copula.points());
        }
    }
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s.str()) h = (h ^ c) * 1099511628211ULL;
    return h;
}

}  // namespace

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::AdaptiveRobustCopula: return "arc";
        case StrategyKind::AdaptiveRobustEmpirical: return "are";
        case StrategyKind::TrueModelOptimal: return "tr";
    }
    return "unknown";
}

StrategyKind parse_strategy(const std::string& name) {
    if (name == "arc" || name == "AdaptiveRobustCopula") return StrategyKind::AdaptiveRobustCopula;
    if (name == "are" || name == "AdaptiveRobustEmpirical")
        return StrategyKind::AdaptiveRobustEmpirical;
    if (name == "tr" || name == "TrueModelOptimal") return StrategyKind::TrueModelOptimal;
    throw InvalidConfig("unknown strategy kind '" + name + "' (expected arc, are or tr)");
}

void DesignConfig::validate() const {
    if (count < 2) throw InvalidConfig("design point count must be >= 2");
    if (!(corr_low >= -1.0 && corr_low <= corr_high && corr_high <= 1.0))
        throw InvalidConfig("design correlation range must satisfy -1 <= low <= high <= 1");
    if (wealth_paths < 2) throw InvalidConfig("design wealth_paths must be >= 2");
    if (!(wealth_quantile >= 0.0 && wealth_quantile < 0.5))
        throw InvalidConfig("design wealth_quantile must lie in [0, 0.5)");
    if (!(wealth_margin >= 0.0)) throw InvalidConfig("design wealth_margin must be >= 0");
}

void SolverConfig::validate() const {
    if (t0 < 1) throw InvalidConfig("t0 must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidConfig("alpha must lie in (0,1)");
    if (moments < 1) throw InvalidConfig("moment count m must be >= 1");
    if (radius.c_scale < 0.0) throw InvalidConfig("radius scale must be >= 0");
    sgda.validate();
    design.validate();
    if (!(gp.relative_jitter > 0.0)) throw InvalidConfig("GP jitter must be > 0");
    if (qmc_points < 1) throw InvalidConfig("qmc_points must be >= 1");
    if (warm_start_chunk < 1) throw InvalidConfig("warm_start_chunk must be >= 1");
    if (!(abort_fraction >= 0.0 && abort_fraction <= 1.0))
        throw InvalidConfig("abort_fraction must lie in [0,1]");
}

double LayerArtifacts::nonconverged_share() const {
    if (converged.empty()) return 0.0;
    const auto bad = std::count(converged.begin(), converged.end(), 0);
    return static_cast<double>(bad) / static_cast<double>(converged.size());
}

Vector LayerArtifacts::control(const Vector& reduced, const ControlBox& box) const {
    if (static_cast<int>(policy.size()) != box.dim())
        throw IncompleteArtifacts("policy surrogate missing for time " + std::to_string(time));
    Vector a(box.dim());
    for (int i = 0; i < box.dim(); ++i) a(i) = policy[static_cast<std::size_t>(i)].predict(reduced);
    return box.project(a);
}

void LayerArtifacts::save(std::ostream& out) const {
    out << "nparc-layer 2\n";
    out << "time " << time << " fingerprint " << fingerprint << '\n';
    out << "points " << converged.size() << " controls " << policy.size() << '\n';
    out << "converged";
    for (char c : converged) out << ' ' << static_cast<int>(c);
    out << '\n';
    value.save(out);
    for (const auto& p : policy) p.save(out);
}

LayerArtifacts LayerArtifacts::load(std::istream& in) {
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "nparc-layer" || version != 2)
        throw DataError("not an nparc layer container");
    LayerArtifacts layer;
    std::size_t points = 0, controls = 0;
    if (!(in >> tag >> layer.time) || tag != "time") throw DataError("bad layer time record");
    if (!(in >> tag >> layer.fingerprint) || tag != "fingerprint")
        throw DataError("bad layer fingerprint record");
    if (!(in >> tag >> points) || tag != "points") throw DataError("bad layer size record");
    if (!(in >> tag >> controls) || tag != "controls") throw DataError("bad layer size record");
    if (!(in >> tag) || tag != "converged") throw DataError("bad layer convergence record");
    layer.converged.resize(points);
    for (auto& c : layer.converged) {
        int v = 0;
        if (!(in >> v)) throw DataError("truncated layer convergence record");
        c = static_cast<char>(v != 0);
    }
    layer.value = GpSurrogate::load(in);
    for (std::size_t i = 0; i < controls; ++i) layer.policy.push_back(GpSurrogate::load(in));
    layer.design = layer.value.training_inputs();
    layer.values = layer.value.training_targets();
    layer.controls.resize(layer.design.rows(), static_cast<Eigen::Index>(controls));
    for (std::size_t i = 0; i < controls; ++i)
        layer.controls.col(static_cast<Eigen::Index>(i)) = layer.policy[i].training_targets();
    if (static_cast<std::size_t>(layer.design.rows()) != points)
        throw DataError("layer container sizes disagree");
    return layer;
}

void SolveArtifacts::check_complete(int horizon) const {
    if (static_cast<int>(layers.size()) < horizon)
        throw IncompleteArtifacts("artifacts cover " + std::to_string(layers.size()) +
                                  " of " + std::to_string(horizon) + " periods");
    for (int t = 0; t < horizon; ++t) {
        const auto& layer = layers[static_cast<std::size_t>(t)];
        if (layer.value.size() == 0 || layer.policy.empty())
            throw IncompleteArtifacts("surrogates missing for time " + std::to_string(t));
    }
}

double terminal_value(const AugmentedState& y, const MarketParams& market) {
    if (y.time != market.horizon)
        throw InvalidInput("terminal value needs time " + std::to_string(market.horizon) +
                           ", got " + std::to_string(y.time));
    return loss(y.wealth, market.risk_aversion);
}

std::vector<DesignPoint> design_points(int t, int count, std::uint64_t seed, const Problem& problem,
                                       int t0, int moments, const DesignConfig& cfg) {
    if (count < 2) throw InvalidInput("design_points needs N >= 2");
    if (t < 0) throw InvalidInput("design time must be >= 0");
    cfg.validate();
    const TrueModel& model = problem.model;
    const MarketParams& market = problem.market;
    const int n = model.dim();
    const double x0 = market.initial_wealth;

    double lo = 0.9 * x0;
    double hi = 1.1 * x0;
    if (t > 0) {
        Rng rng = make_rng(seed, "design-wealth", static_cast<std::uint64_t>(t));
        std::vector<double> wealth(static_cast<std::size_t>(cfg.wealth_paths));
        for (auto& w : wealth) {
            double x = x0;
            for (int s = 0; s < t; ++s)
                x = wealth_step(x, random_control(problem.box, rng), model.sample(rng),
                                market.rate_per_period);
            w = x;
        }
        std::sort(wealth.begin(), wealth.end());
        lo = std::min(lo, quantile_sorted(wealth, cfg.wealth_quantile) * (1.0 - cfg.wealth_margin));
        hi = std::max(hi, quantile_sorted(wealth, 1.0 - cfg.wealth_quantile) * (1.0 + cfg.wealth_margin));
        lo = std::max(lo, 1e-3 * x0);
    }

    std::vector<DesignPoint> points(static_cast<std::size_t>(count));
    const int size = t0 + t;
    for (int j = 0; j < count; ++j) {
        Rng rng = make_rng(seed, "design-copula", static_cast<std::uint64_t>(t),
                           static_cast<std::uint64_t>(j));
        std::uniform_real_distribution<double> corr(cfg.corr_low, cfg.corr_high);
        std::normal_distribution<double> normal;
        const Matrix factor = equicorrelation_factor(n, corr(rng));
        Matrix pts(n, size);
        Vector e(n);
        for (int k = 0; k < size; ++k) {
            for (int i = 0; i < n; ++i) e(i) = normal(rng);
            const Vector zc = factor * e;
            for (int i = 0; i < n; ++i) pts(i, k) = normal_cdf(zc(i));
        }
        DesignPoint& p = points[static_cast<std::size_t>(j)];
        p.copula = WeightedSample(std::move(pts), std::min(t0, size));
        p.state.wealth = lo * std::pow(hi / lo, static_cast<double>(j) / (count - 1));
        p.state.copula_summary = summarize(p.copula, moments).flatten();
        p.state.time = t;
    }
    return points;
}

Matrix true_copula_sample(const TrueModel& model, int count) {
    if (count < 1) throw InvalidInput("QMC sample size must be >= 1");
    const int n = model.dim();
    const Matrix factor = model.correlation().llt().matrixL();
    boost::random::sobol sobol(static_cast<std::size_t>(n));
    boost::random::uniform_01<double> unit;
    sobol.discard(static_cast<boost::uintmax_t>(n));  // skip the origin
    Matrix u(n, count);
    Vector e(n);
    for (int m = 0; m < count; ++m) {
        for (int i = 0; i < n; ++i) e(i) = normal_quantile(unit(sobol));
        const Vector zc = factor * e;
        for (int i = 0; i < n; ++i) u(i, m) = normal_cdf(zc(i));
    }
    return u;
}

InnerSolution solve_inner(StrategyKind kind, const DesignPoint& point, const ValueFn& next,
                          const Problem& problem, const SolverConfig& cfg,
                          const Matrix& reference_u, std::uint64_t sgda_seed,
                          const DualPoint* warm) {
    SuccessorContext succ;
    succ.wealth = point.state.wealth;
    succ.summary = point.state.copula_summary;
    succ.count = point.copula.size();
    succ.moments = cfg.moments;
    succ.model = &problem.model;
    succ.rate = problem.market.rate_per_period;
    succ.next = next;

    if (kind == StrategyKind::TrueModelOptimal) {
        if (!cfg.candidate_controls.empty()) {
            InnerSolution best;
            best.value = std::numeric_limits<double>::infinity();
            for (const Vector& c : cfg.candidate_controls) {
                if (!problem.box.contains(c, 1e-12))
                    throw InvalidConfig("candidate control outside the control box");
                const double v = expected_next(succ, c, reference_u, nullptr);
                if (v < best.value) best.value = v, best.control = c;
            }
            return best;
        }
        InnerSolution sol =
            minimize_expectation(succ, problem.box, reference_u, problem.box.center());
        if (warm && warm->a.size() == problem.box.dim()) {
            InnerSolution alt = minimize_expectation(succ, problem.box, reference_u, warm->a);
            if (alt.value < sol.value) sol = std::move(alt);
        }
        sol.dual.a = sol.control;
        return sol;
    }

    DualContext ctx;
    ctx.successor = std::move(succ);
    ctx.radius = radius(cfg.alpha, cfg.t0, point.state.time, cfg.radius);
    ctx.box = problem.box;
    if (kind == StrategyKind::AdaptiveRobustEmpirical) {
        ctx.space = DistanceSpace::Noise;
        ctx.marginal_terms = false;
    }
    SgdaConfig sgda_cfg = cfg.sgda;
    sgda_cfg.seed = sgda_seed;
    const SgdaSolution s = sgda_solve(ctx, point.copula.points(), sgda_cfg, warm);
    InnerSolution out;
    out.value = s.value;
    out.control = s.point.a;
    out.converged = s.converged;
    out.dual = s.point;
    return out;
}

SolveArtifacts backward_solve(StrategyKind kind, const Matrix& data, const Problem& problem,
                              const SolverConfig& cfg, std::uint64_t seed, std::ostream* log) {
    cfg.validate();
    problem.market.validate();
    problem.box.validate();
    const TrueModel& model = problem.model;
    const int horizon = problem.market.horizon;
    const int n = model.dim();
    if (problem.box.dim() != n) throw InvalidConfig("control box and model dimensions differ");
    if (data.cols() != n) throw DataError("data columns do not match the model dimension");
    if (data.rows() != cfg.t0)
        throw DataError("expected " + std::to_string(cfg.t0) + " historical observations, got " +
                        std::to_string(data.rows()));
    if (!data.allFinite()) throw DataError("historical data contains non-finite values");

    Matrix reference_u;
    if (kind == StrategyKind::TrueModelOptimal) {
        if (cfg.reference_noise.size() > 0) {
            if (cfg.reference_noise.rows() != n)
                throw InvalidConfig("reference noise dimension does not match the model");
            reference_u.resize(n, cfg.reference_noise.cols());
            for (Eigen::Index m = 0; m < cfg.reference_noise.cols(); ++m)
                reference_u.col(m) = model.to_uniform(cfg.reference_noise.col(m));
        } else {
            reference_u = true_copula_sample(model, cfg.qmc_points);
        }
    }
    const WeightedSample anchor = WeightedSample::from_data(data, model);

    SolveArtifacts art;
    art.kind = kind;
    art.layers.resize(static_cast<std::size_t>(horizon));
    const std::uint64_t fingerprint = solve_fingerprint(kind, data, problem, cfg, seed);
    if (!cfg.checkpoint_dir.empty()) std::filesystem::create_directories(cfg.checkpoint_dir);

    for (int t = horizon - 1; t >= 0; --t) {
        LayerArtifacts& layer = art.layers[static_cast<std::size_t>(t)];
        if (!cfg.checkpoint_dir.empty()) {
            const auto path = checkpoint_path(cfg.checkpoint_dir, kind, t);
            if (std::filesystem::exists(path)) {
                std::ifstream in(path);
                LayerArtifacts saved = LayerArtifacts::load(in);
                if (saved.time != t) throw DataError("checkpoint " + path.string() + " has wrong time");
                if (saved.fingerprint == fingerprint) {
                    layer = std::move(saved);
                    if (log) *log << "t=" << t << " kind=" << to_string(kind) << " resumed\n";
                    continue;
                }
                if (log) *log << "t=" << t << " kind=" << to_string(kind) << " stale checkpoint replaced\n";
            }
        }

        std::vector<DesignPoint> points;
        if (static_cast<std::size_t>(t) < cfg.explicit_design.size() &&
            !cfg.explicit_design[static_cast<std::size_t>(t)].empty()) {
            points = cfg.explicit_design[static_cast<std::size_t>(t)];
        } else {
            points = design_points(t, cfg.design.count, substream_seed(seed, "design"), problem,
                                   cfg.t0, cfg.moments, cfg.design);
            if (t == 0) {
                DesignPoint& mid = points[points.size() / 2];
                mid.copula = anchor;
                mid.state.wealth = problem.market.initial_wealth;
                mid.state.copula_summary = summarize(anchor, cfg.moments).flatten();
            }
        }
        const int count = static_cast<int>(points.size());
        if (count < 2) throw InvalidConfig("each layer needs at least two design points");

        const ValueFn next = t == horizon - 1
                                 ? terminal_value_fn(problem.market.risk_aversion)
                                 : surrogate_value_fn(art.layers[static_cast<std::size_t>(t + 1)].value);

        std::vector<InnerSolution> sols(static_cast<std::size_t>(count));
        const int chunk = cfg.warm_start_chunk;
        const int chunks = (count + chunk - 1) / chunk;
        parallel_for(static_cast<std::size_t>(chunks), cfg.workers, [&](std::size_t c) {
            const int begin = static_cast<int>(c) * chunk;
            const int end = std::min(count, begin + chunk);
            const DualPoint* warm = nullptr;
            for (int j = begin; j < end; ++j) {
                auto& sol = sols[static_cast<std::size_t>(j)];
                sol = solve_inner(kind, points[static_cast<std::size_t>(j)], next, problem, cfg,
                                  reference_u,
                                  substream_seed(seed, "sgda", static_cast<std::uint64_t>(t),
                                                 static_cast<std::uint64_t>(j)),
                                  warm);
                warm = &sol.dual;
            }
        });

        layer.time = t;
        layer.fingerprint = fingerprint;
        const int dim = static_cast<int>(points.front().state.reduced().size());
        layer.design.resize(count, dim);
        layer.values.resize(count);
        layer.controls.resize(count, n);
        layer.converged.resize(static_cast<std::size_t>(count));
        for (int j = 0; j < count; ++j) {
            const auto& sol = sols[static_cast<std::size_t>(j)];
            layer.design.row(j) = points[static_cast<std::size_t>(j)].state.reduced().transpose();
            layer.values(j) = sol.value;
            layer.controls.row(j) = sol.control.transpose();
            layer.converged[static_cast<std::size_t>(j)] = static_cast<char>(sol.converged);
        }
        const double share = layer.nonconverged_share();
        if (share > cfg.abort_fraction) {
            std::ostringstream msg;
            msg << "time " << t << ": " << share * 100.0 << "% of design points did not converge"
                << " (limit " << cfg.abort_fraction * 100.0 << "%)";
            throw NonConvergenceAbort(msg.str());
        }

        GpFitOptions opts = cfg.gp;
        opts.seed = substream_seed(seed, "gp", static_cast<std::uint64_t>(t), 0);
        layer.value = GpSurrogate::fit(layer.design, layer.values, opts);
        layer.policy.clear();
        for (int i = 0; i < n; ++i) {
            opts.seed = substream_seed(seed, "gp", static_cast<std::uint64_t>(t),
                                       static_cast<std::uint64_t>(i + 1));
            layer.policy.push_back(GpSurrogate::fit(layer.design, layer.controls.col(i), opts));
        }

        if (!cfg.checkpoint_dir.empty()) {
            const auto path = checkpoint_path(cfg.checkpoint_dir, kind, t);
            const auto tmp = path.string() + ".tmp";
            {
                std::ofstream out(tmp);
                layer.save(out);
                if (!out) throw DataError("cannot write checkpoint " + tmp);
            }
            std::filesystem::rename(tmp, path);
        }
        if (log)
            *log << "t=" << t << " kind=" << to_string(kind) << " mean_value=" << layer.values.mean()
                 << " nonconverged=" << share << '\n';
    }
    return art;
}

SolveArtifacts load_artifacts(const std::string& dir, StrategyKind kind, int horizon) {
    SolveArtifacts art;
    art.kind = kind;
    for (int t = 0; t < horizon; ++t) {
        const auto path = checkpoint_path(dir, kind, t);
        std::ifstream in(path);
        if (!in)
            throw IncompleteArtifacts("missing " + path.string() + "; run solve --kind " +
                                      to_string(kind) + " first");
        art.layers.push_back(LayerArtifacts::load(in));
        if (art.layers.back().time != t)
            throw DataError("checkpoint " + path.string() + " has wrong time");
    }
    return art;
}

}  // namespace nparc
