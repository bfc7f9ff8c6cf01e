#include "fadeflow/cli.hpp"
#include "fadeflow/config.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace fadeflow;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

/// Rows are samples at s = 0, -step, ..., -depth.
HistoryFunction history_from_array(const Array& a, double step) {
    if (a.ndim() != 2) throw InvalidArgument("history samples must be a 2-d array (samples x components)");
    const auto r = a.unchecked<2>();
    std::vector<Vector> rows;
    for (py::ssize_t i = 0; i < r.shape(0); ++i) {
        Vector v(r.shape(1));
        for (py::ssize_t k = 0; k < r.shape(1); ++k) v[k] = r(i, k);
        rows.push_back(std::move(v));
    }
    return HistoryFunction::from_samples(step, rows);
}

Array history_to_array(const HistoryFunction& x) {
    Array out({x.count(), x.dim()});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < x.count(); ++i)
        for (std::size_t k = 0; k < x.dim(); ++k) w(i, k) = x(i, k);
    return out;
}

py::dict trajectory_dict(const Trajectory& tr) {
    const std::size_t n = tr.steps() + 1, m = tr.dim(), d = tr.base_point(0).dim();
    Array t(n), z({n, m}), theta({n, d});
    auto tw = t.mutable_unchecked<1>();
    auto zw = z.mutable_unchecked<2>();
    auto thw = theta.mutable_unchecked<2>();
    for (std::size_t i = 0; i < n; ++i) {
        tw(i) = tr.time(i);
        for (std::size_t k = 0; k < m; ++k) zw(i, k) = tr.head(i, k);
        for (std::size_t k = 0; k < d; ++k) thw(i, k) = tr.base_point(i).theta[k];
    }
    py::dict out;
    out["t"] = t;
    out["theta"] = theta;
    out["z"] = z;
    if (tr.has_w()) {
        Array w({n, m});
        auto ww = w.mutable_unchecked<2>();
        for (std::size_t i = 0; i < n; ++i) {
            const Vector wi = tr.w(i);
            for (std::size_t k = 0; k < m; ++k) ww(i, k) = wi[static_cast<Eigen::Index>(k)];
        }
        out["w"] = w;
    }
    return out;
}

py::dict simulate(const RunConfig& cfg, std::optional<double> T) {
    const HistoryFunction x0 = build_datum(cfg.run.initial, cfg.dim(), cfg.grid(), cfg.run.seed);
    const BasePoint th(cfg.run.theta0);
    const double horizon = T.value_or(cfg.run.T);
    Trajectory tr;
    {
        py::gil_scoped_release release;
        tr = std::holds_alternative<FdeModel>(cfg.model) ? integrate(std::get<FdeModel>(cfg.model), th, x0, horizon)
                                                         : integrate_nfde(std::get<NfdeModel>(cfg.model), th, x0, horizon);
    }
    return trajectory_dict(tr);
}

py::dict audit(const RunConfig& cfg) {
    const AuditReport rep = std::holds_alternative<FdeModel>(cfg.model)
                                ? audit_hypotheses(std::get<FdeModel>(cfg.model), cfg.audit)
                                : audit_hypotheses(std::get<NfdeModel>(cfg.model), cfg.audit);
    py::list checks;
    for (const auto& c : rep.checks) {
        py::dict d;
        d["name"] = c.name;
        d["status"] = to_string(c.status);
        d["ok"] = c.ok;
        d["value"] = c.value;
        d["detail"] = c.detail;
        checks.append(d);
    }
    py::dict out;
    out["checks"] = checks;
    out["hard_failure"] = rep.hard_failure();
    out["lipschitz"] = rep.lipschitz;
    out["q"] = rep.q;
    out["k_bound"] = rep.k_bound;
    out["K_D"] = rep.K_D;
    return out;
}

py::dict invert(const RunConfig& cfg) {
    const auto* nm = std::get_if<NfdeModel>(&cfg.model);
    if (!nm) throw InvalidArgument("invert needs a neutral model");
    const HistoryFunction h = build_datum(cfg.invert.h, cfg.dim(), cfg.grid(), cfg.run.seed);
    const InverseResult inv = dhat_inverse(nm->D, BasePoint(cfg.run.theta0), h, cfg.invert.tol_fix, cfg.invert.max_iter);
    py::dict out;
    out["x"] = history_to_array(inv.x);
    out["h"] = history_to_array(h);
    out["iterations"] = inv.iterations;
    out["residual"] = inv.residual;
    out["converged"] = inv.converged;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Simulation and verification of nonautonomous (neutral) functional differential equations";

    // InvalidArgument derives from std::invalid_argument and maps to ValueError.
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<BlowUpError>(m, "BlowUpError", PyExc_RuntimeError);

    py::class_<ConfigOverrides>(m, "Overrides")
        .def(py::init([](std::optional<double> step, std::optional<double> depth, std::optional<std::uint64_t> seed) {
                 return ConfigOverrides{step, depth, seed};
             }),
             py::arg("step") = py::none(), py::arg("depth") = py::none(), py::arg("seed") = py::none());

    py::class_<RunConfig>(m, "Config")
        .def_static("from_text", &parse_config, py::arg("text"), py::arg("name") = "<string>",
                    py::arg("overrides") = ConfigOverrides{})
        .def_static("load", &load_config, py::arg("path"), py::arg("overrides") = ConfigOverrides{})
        .def_readonly("family", &RunConfig::family)
        .def_property_readonly("dim", &RunConfig::dim)
        .def_property_readonly("is_neutral", &RunConfig::is_neutral)
        .def_property_readonly("step", [](const RunConfig& c) { return c.grid().step; })
        .def_property_readonly("depth", [](const RunConfig& c) { return c.grid().depth; })
        .def("with_parameter", [](const RunConfig& c, const std::string& p, double v) { return with_model_parameter(c, p, v); });

    m.def("simulate", &simulate, py::arg("config"), py::arg("T") = py::none(),
          "Integrates the configured model; returns t, theta, z (and w for neutral models).");
    m.def("audit", &audit, py::arg("config"), "Hypothesis checklist and constants.");
    m.def("invert", &invert, py::arg("config"), "Inverts the neutral operator on probe.invert.h.");

    m.def("leq_A", [](const Array& x, const Array& y, double step, std::vector<double> A) {
        return leq_A(history_from_array(x, step), history_from_array(y, step), OrderParams(std::move(A)));
    }, py::arg("x"), py::arg("y"), py::arg("step"), py::arg("A"));
    m.def("metric_d", [](const Array& x, const Array& y, double step, int n_terms) {
        return metric_d(history_from_array(x, step), history_from_array(y, step), n_terms);
    }, py::arg("x"), py::arg("y"), py::arg("step"), py::arg("n_terms") = kDefaultMetricTerms);
    m.def("construct_h", [](const Array& x, double step, std::vector<double> A) {
        return history_to_array(construct_h(history_from_array(x, step), OrderParams(std::move(A))));
    }, py::arg("x"), py::arg("step"), py::arg("A"));

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
