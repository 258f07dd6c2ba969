#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nparc/bellman.hpp"
#include "nparc/config.hpp"
#include "nparc/copula.hpp"
#include "nparc/errors.hpp"
#include "nparc/evaluation.hpp"
#include "nparc/gp.hpp"
#include "nparc/rng.hpp"
#include "nparc/sgda.hpp"
#include "nparc/transport.hpp"

namespace py = pybind11;
using namespace nparc;

namespace {

RunConfig config_from_text(const std::string& text) {
    std::istringstream in(text);
    return RunConfig::load(in);
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream out;
    cfg.save(out);
    return out.str();
}

Matrix generate_data(const RunConfig& cfg) {
    cfg.validate();
    const Problem p = cfg.problem();
    Rng rng = make_rng(cfg.seed, "data");
    Matrix data(cfg.t0, p.model.dim());
    for (int r = 0; r < cfg.t0; ++r) data.row(r) = p.model.sample(rng).transpose();
    return data;
}

SolveArtifacts solve(const RunConfig& cfg, const std::string& kind, const Matrix& data,
                     bool checkpoints) {
    cfg.validate();
    SolverConfig solver = cfg.solver();
    if (!checkpoints) solver.checkpoint_dir.clear();
    py::gil_scoped_release release;
    return backward_solve(parse_strategy(kind), data, cfg.problem(), solver, cfg.seed);
}

py::dict simulate(const SolveArtifacts& art, const RunConfig& cfg, const Matrix& data) {
    cfg.validate();
    std::vector<PathRecord> paths;
    {
        py::gil_scoped_release release;
        paths = forward_simulate(art, cfg.problem(), cfg.paths, cfg.seed, data, cfg.moments, cfg.workers);
    }
    const int steps = paths.empty() ? 0 : static_cast<int>(paths.front().wealth.size());
    Matrix wealth(static_cast<Eigen::Index>(paths.size()), steps);
    Vector losses(static_cast<Eigen::Index>(paths.size()));
    for (std::size_t i = 0; i < paths.size(); ++i) {
        for (int t = 0; t < steps; ++t) wealth(static_cast<Eigen::Index>(i), t) = paths[i].wealth[static_cast<std::size_t>(t)];
        losses(static_cast<Eigen::Index>(i)) = paths[i].terminal_loss;
    }
    const SummaryStats s = summarize_paths(paths, cfg.risk_aversion);
    py::dict stats;
    stats["expected_utility"] = s.mean_utility;
    stats["variance"] = s.variance;
    stats["quantile_30"] = s.quantile_30;
    stats["quantile_90"] = s.quantile_90;
    stats["max"] = s.max;
    stats["min"] = s.min;
    py::dict out;
    out["wealth"] = wealth;
    out["terminal_loss"] = losses;
    out["stats"] = stats;
    return out;
}

const LayerArtifacts& layer_at(const SolveArtifacts& art, int t) {
    if (t < 0 || t >= static_cast<int>(art.layers.size())) throw py::index_error("no layer " + std::to_string(t));
    return art.layers[static_cast<std::size_t>(t)];
}

}  // namespace

PYBIND11_MODULE(_nparc, m) {
    m.doc() = "Adaptive robust portfolio control under copula uncertainty";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
    py::register_exception<InvalidConfig>(m, "InvalidConfig", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<CapacityError>(m, "CapacityError", base.ptr());
    py::register_exception<ConditioningError>(m, "ConditioningError", base.ptr());
    py::register_exception<IncompleteArtifacts>(m, "IncompleteArtifacts", base.ptr());
    py::register_exception<NonConvergenceAbort>(m, "NonConvergenceAbort", base.ptr());

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_static("from_text", &config_from_text, py::arg("text"))
        .def_static("load", &RunConfig::load_file, py::arg("path"))
        .def("to_text", &config_to_text)
        .def("validate", &RunConfig::validate)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("t0", &RunConfig::t0)
        .def_readwrite("horizon", &RunConfig::horizon)
        .def_readwrite("alpha", &RunConfig::alpha)
        .def_readwrite("risk_aversion", &RunConfig::risk_aversion)
        .def_readwrite("initial_wealth", &RunConfig::initial_wealth)
        .def_readwrite("radius_scale", &RunConfig::radius_scale)
        .def_readwrite("bernstein_degree", &RunConfig::bernstein_degree)
        .def_readwrite("design_points", &RunConfig::design_points)
        .def_readwrite("paths", &RunConfig::paths)
        .def_readwrite("qmc_points", &RunConfig::qmc_points)
        .def_readwrite("workers", &RunConfig::workers)
        .def_readwrite("checkpoint_dir", &RunConfig::checkpoint_dir)
        .def("__eq__", [](const RunConfig& a, const RunConfig& b) { return a == b; })
        .def("__repr__", [](const RunConfig& c) { return "RunConfig(seed=" + std::to_string(c.seed) + ", t0=" + std::to_string(c.t0) + ", horizon=" + std::to_string(c.horizon) + ")"; });

    m.def("loss", &loss, py::arg("wealth"), py::arg("risk_aversion"));
    m.def("wealth_step", &wealth_step, py::arg("wealth"), py::arg("control"), py::arg("noise"),
          py::arg("rate"));
    m.def("normal_cdf", &normal_cdf, py::arg("x"));
    m.def("bernstein", &bernstein, py::arg("k"), py::arg("degree"), py::arg("u"));
    m.def("radius",
          [](double alpha, int t0, int t, double c_scale) {
              RadiusConfig r;
              r.c_scale = c_scale;
              return radius(alpha, t0, t, r);
          },
          py::arg("alpha"), py::arg("t0"), py::arg("t") = 0, py::arg("c_scale") = RadiusConfig{}.c_scale);
    m.def("wasserstein",
          [](const Matrix& a, const Vector& wa, const Matrix& b, const Vector& wb, double p) {
              return wasserstein_p({a, wa}, {b, wb}, p);
          },
          py::arg("points_a"), py::arg("weights_a"), py::arg("points_b"), py::arg("weights_b"),
          py::arg("p") = 2.0, "Exact Wasserstein-p distance; atoms are the columns of the point arrays.");
    m.def("marginal_mismatch", [](const Matrix& points) { return marginal_mismatch(DiscreteMeasure::uniform(points)); },
          py::arg("points"));

    m.def("generate_data", &generate_data, py::arg("config"),
          "t0 historical noise vectors (rows) drawn from the configured model.");
    m.def("empirical_copula",
          [](const Matrix& data, const RunConfig& cfg) { return WeightedSample::from_data(data, cfg.problem().model).points(); },
          py::arg("data"), py::arg("config"), "Pseudo-observations of the rows of data (one column per point).");
    m.def("true_copula_sample",
          [](const RunConfig& cfg, int count) { return true_copula_sample(cfg.problem().model, count); },
          py::arg("config"), py::arg("count"));

    py::class_<GpSurrogate>(m, "GpSurrogate")
        .def_static("fit",
                    [](const Matrix& x, const Vector& y, double jitter, int restarts, std::uint64_t seed) {
                        GpFitOptions o;
                        o.relative_jitter = jitter;
                        o.restarts = restarts;
                        o.seed = seed;
                        return GpSurrogate::fit(x, y, o);
                    },
                    py::arg("inputs"), py::arg("targets"), py::arg("jitter") = 1e-6, py::arg("restarts") = 5,
                    py::arg("seed") = 0)
        .def("predict", &GpSurrogate::predict, py::arg("x"))
        .def("gradient", &GpSurrogate::predict_gradient, py::arg("x"))
        .def_property_readonly("length_scales", &GpSurrogate::length_scales);

    py::class_<SolveArtifacts>(m, "SolveArtifacts")
        .def_property_readonly("kind", [](const SolveArtifacts& a) { return to_string(a.kind); })
        .def_property_readonly("horizon", [](const SolveArtifacts& a) { return a.layers.size(); })
        .def("design", [](const SolveArtifacts& a, int t) { return layer_at(a, t).design; }, py::arg("t"))
        .def("values", [](const SolveArtifacts& a, int t) { return layer_at(a, t).values; }, py::arg("t"))
        .def("controls", [](const SolveArtifacts& a, int t) { return layer_at(a, t).controls; }, py::arg("t"))
        .def("nonconverged_share", [](const SolveArtifacts& a, int t) { return layer_at(a, t).nonconverged_share(); },
             py::arg("t"))
        .def("value_at", [](const SolveArtifacts& a, int t, const Vector& s) { return layer_at(a, t).value.predict(s); },
             py::arg("t"), py::arg("reduced_state"))
        .def("control_at",
             [](const SolveArtifacts& a, int t, const Vector& s, const RunConfig& cfg) {
                 return layer_at(a, t).control(s, cfg.problem().box);
             },
             py::arg("t"), py::arg("reduced_state"), py::arg("config"));

    m.def("solve", &solve, py::arg("config"), py::arg("kind"), py::arg("data"), py::arg("checkpoints") = false,
          "Backward recursion for one strategy kind (arc, are or tr).");
    m.def("load_solution",
          [](const std::string& dir, const std::string& kind, int horizon) {
              return load_artifacts(dir, parse_strategy(kind), horizon);
          },
          py::arg("dir"), py::arg("kind"), py::arg("horizon"));
    m.def("simulate", &simulate, py::arg("artifacts"), py::arg("config"), py::arg("data"),
          "Forward simulation; returns wealth paths, terminal losses and summary statistics.");
}
