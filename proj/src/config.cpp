#include "fadeflow/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fadeflow {

namespace {

std::string located(const std::string& file, int line, int column, const std::string& what) {
    std::ostringstream os;
    os << file;
    if (line > 0) os << ':' << line << ':' << column;
    os << ": " << what;
    return os.str();
}

}  // namespace

ConfigError::ConfigError(const std::string& file, int line, int column, const std::string& what)
    : std::runtime_error(located(file, line, column, what)), line_(line), column_(column) {}

std::size_t RunConfig::dim() const {
    return std::visit([](const auto& m) { return m.dim(); }, model);
}

const TorusBase& RunConfig::base() const {
    if (const auto* f = std::get_if<FdeModel>(&model)) return f->base;
    return std::get<NfdeModel>(model).base();
}

const Grid& RunConfig::grid() const {
    if (const auto* f = std::get_if<FdeModel>(&model)) return f->grid;
    return std::get<NfdeModel>(model).grid();
}

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

class Reader {
public:
    explicit Reader(std::string file) : file_(std::move(file)) {}

    [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const {
        const YAML::Mark mk = at.IsDefined() ? at.Mark() : YAML::Mark::null_mark();
        if (mk.is_null()) throw ConfigError(file_, 0, 0, what);
        throw ConfigError(file_, mk.line + 1, mk.column + 1, what);
    }

    void keys(const YAML::Node& n, const std::string& where, std::initializer_list<const char*> allowed) const {
        if (!n.IsMap()) fail(n, where + " must be a mapping");
        const std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (!ok.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
        }
    }

    YAML::Node required(const YAML::Node& n, const char* key, const std::string& where) const {
        const YAML::Node v = n[key];
        if (!v.IsDefined() || v.IsNull()) fail(n, "missing required key '" + std::string(key) + "' in " + where);
        return v;
    }

    double number(const YAML::Node& n) const {
        if (!n.IsScalar()) fail(n, "expected a number");
        try {
            return n.as<double>();
        } catch (const YAML::Exception&) {
            fail(n, "expected a number, got '" + n.Scalar() + "'");
        }
    }

    double number(const YAML::Node& parent, const char* key, double fallback) const {
        const YAML::Node v = parent[key];
        return v.IsDefined() && !v.IsNull() ? number(v) : fallback;
    }

    long long integer(const YAML::Node& n) const {
        if (!n.IsScalar()) fail(n, "expected an integer");
        try {
            return n.as<long long>();
        } catch (const YAML::Exception&) {
            fail(n, "expected an integer, got '" + n.Scalar() + "'");
        }
    }

    std::string text(const YAML::Node& n) const {
        if (!n.IsScalar()) fail(n, "expected a string");
        return n.Scalar();
    }

    std::vector<double> numbers(const YAML::Node& n) const {
        std::vector<double> out;
        if (n.IsScalar()) return {number(n)};
        if (!n.IsSequence()) fail(n, "expected a list of numbers");
        for (const auto& v : n) out.push_back(number(v));
        return out;
    }

    /// A list of exactly `m` numbers; a single number is broadcast.
    std::vector<double> numbers(const YAML::Node& n, std::size_t m) const {
        auto v = numbers(n);
        if (v.size() == 1 && m > 1 && n.IsScalar()) v.assign(m, v[0]);
        if (v.size() != m) fail(n, "expected " + std::to_string(m) + " entries, got " + std::to_string(v.size()));
        return v;
    }

    CoeffRef coeff(const YAML::Node& n, const TorusBase& base) const {
        if (n.IsScalar()) {
            try {
                return CoeffRef(n.as<double>());
            } catch (const YAML::Exception&) {
            }
            const std::string id = n.Scalar();
            if (!base.has_coeff(id)) fail(n, "coefficient id '" + id + "' is not defined under base.coefficients");
            return CoeffRef(0.0, id, 1.0);
        }
        keys(n, "coefficient", {"constant", "coeff", "scale"});
        CoeffRef c(number(n, "constant", 0.0));
        if (n["coeff"].IsDefined()) {
            c.id = text(n["coeff"]);
            if (!base.has_coeff(c.id)) fail(n["coeff"], "coefficient id '" + c.id + "' is not defined under base.coefficients");
            c.scale = number(n, "scale", 1.0);
        }
        return c;
    }

    std::vector<CoeffRef> coeff_list(const YAML::Node& n, std::size_t m, const TorusBase& base) const {
        std::vector<CoeffRef> out;
        if (!n.IsSequence()) {
            if (m != 1) fail(n, "expected a list of " + std::to_string(m) + " coefficients");
            return {coeff(n, base)};
        }
        for (const auto& v : n) out.push_back(coeff(v, base));
        if (out.size() != m) fail(n, "expected " + std::to_string(m) + " coefficients, got " + std::to_string(out.size()));
        return out;
    }

    CoeffMatrix coeff_matrix(const YAML::Node& n, std::size_t m, const TorusBase& base) const {
        CoeffMatrix c(m);
        if (m == 1 && !n.IsSequence()) {
            c(0, 0) = coeff(n, base);
            return c;
        }
        if (!n.IsSequence() || n.size() != m) fail(n, "expected " + std::to_string(m) + " rows");
        for (std::size_t i = 0; i < m; ++i) {
            const YAML::Node row = n[i];
            if (m == 1 && !row.IsSequence()) {
                c(0, 0) = coeff(row, base);
                continue;
            }
            if (!row.IsSequence() || row.size() != m) fail(row, "expected a row of " + std::to_string(m) + " entries");
            for (std::size_t j = 0; j < m; ++j) c(i, j) = coeff(row[j], base);
        }
        return c;
    }

    std::vector<double> number_matrix(const YAML::Node& n, std::size_t m) const {
        std::vector<double> out;
        if (m == 1 && n.IsScalar()) return {number(n)};
        if (!n.IsSequence() || n.size() != m) fail(n, "expected " + std::to_string(m) + " rows");
        for (const auto& row : n) {
            if (m == 1 && row.IsScalar()) {
                out.push_back(number(row));
                continue;
            }
            if (!row.IsSequence() || row.size() != m) fail(row, "expected a row of " + std::to_string(m) + " entries");
            for (const auto& v : row) out.push_back(number(v));
        }
        return out;
    }

    const std::string& file() const { return file_; }

private:
    std::string file_;
};

TorusBase parse_base(const Reader& rd, const YAML::Node& n) {
    if (!n.IsDefined()) return TorusBase({kGolden});
    rd.keys(n, "base", {"freq", "coefficients"});
    const YAML::Node f = rd.required(n, "freq", "base");
    TorusBase base(rd.numbers(f));
    if (base.dim() == 0) rd.fail(f, "base.freq must not be empty");
    if (const YAML::Node cs = n["coefficients"]; cs.IsDefined()) {
        if (!cs.IsMap()) rd.fail(cs, "base.coefficients must map ids to term lists");
        for (const auto& kv : cs) {
            const std::string id = kv.first.as<std::string>();
            if (!kv.second.IsSequence()) rd.fail(kv.second, "coefficient '" + id + "' must be a list of terms");
            TrigPolynomial p;
            for (const auto& t : kv.second) {
                rd.keys(t, "trig term", {"k", "amplitude", "phase"});
                TrigTerm term;
                for (double k : rd.numbers(rd.required(t, "k", "trig term"), base.dim())) {
                    if (k != std::round(k)) rd.fail(t["k"], "wave vector entries must be integers");
                    term.k.push_back(static_cast<int>(k));
                }
                term.amplitude = rd.number(rd.required(t, "amplitude", "trig term"));
                term.phase = rd.number(t, "phase", 0.0);
                p.push_back(std::move(term));
            }
            base.add_coeff(id, std::move(p));
        }
    }
    return base;
}

Grid parse_grid(const Reader& rd, const YAML::Node& n, const ConfigOverrides& ov) {
    Grid g;
    if (n.IsDefined()) {
        rd.keys(n, "grid", {"step", "depth"});
        g.step = rd.number(n, "step", g.step);
        g.depth = rd.number(n, "depth", g.depth);
    }
    if (ov.step) g.step = *ov.step;
    if (ov.depth) g.depth = *ov.depth;
    if (!(g.step > 0.0) || !(g.depth > 0.0)) rd.fail(n, "grid step and depth must be positive");
    return g;
}

OrderParams parse_order(const Reader& rd, const YAML::Node& model, std::size_t m, const OrderParams& fallback) {
    const YAML::Node o = model["order"];
    if (!o.IsDefined()) return fallback;
    OrderParams A(rd.numbers(o, m));
    for (double a : A.diag)
        if (!(a < 0.0)) rd.fail(o, "order entries must be negative");
    return A;
}

RhsForm parse_rhs(const Reader& rd, const YAML::Node& n, std::size_t m, const TorusBase& base, const std::string& where) {
    rd.keys(n, where, {"linear", "delays", "dists", "forcing", "nonlinearity"});
    RhsForm f(m);
    if (n["linear"].IsDefined()) f.linear_inst = rd.coeff_matrix(n["linear"], m, base);
    if (const YAML::Node ds = n["delays"]; ds.IsDefined()) {
        if (!ds.IsSequence()) rd.fail(ds, where + ".delays must be a list");
        for (const auto& d : ds) {
            rd.keys(d, "delay term", {"delay", "coeff"});
            f.delays.push_back({rd.number(rd.required(d, "delay", "delay term")),
                                rd.coeff_matrix(rd.required(d, "coeff", "delay term"), m, base)});
        }
    }
    if (const YAML::Node ds = n["dists"]; ds.IsDefined()) {
        if (!ds.IsSequence()) rd.fail(ds, where + ".dists must be a list");
        for (const auto& d : ds) {
            rd.keys(d, "distributed term", {"decay", "coeff"});
            f.dists.push_back({rd.number(rd.required(d, "decay", "distributed term")),
                               rd.coeff_matrix(rd.required(d, "coeff", "distributed term"), m, base)});
        }
    }
    if (n["forcing"].IsDefined()) f.forcing = rd.coeff_list(n["forcing"], m, base);
    if (n["nonlinearity"].IsDefined()) f.nonlinearity = Nonlinearity{rd.numbers(n["nonlinearity"], m)};
    return f;
}

std::size_t parse_dim(const Reader& rd, const YAML::Node& model, const char* key) {
    const long long m = rd.integer(rd.required(model, key, "model"));
    if (m < 1 || m > 1000) rd.fail(model[key], std::string(key) + " must be between 1 and 1000");
    return static_cast<std::size_t>(m);
}

template <class F>
auto guarded(const Reader& rd, const YAML::Node& at, F&& f) {
    try {
        return f();
    } catch (const InvalidArgument& e) {
        rd.fail(at, e.what());
    }
}

std::variant<FdeModel, NfdeModel> parse_model(const Reader& rd, const YAML::Node& n, const TorusBase& base,
                                              const Grid& grid, std::string& family) {
    family = rd.text(rd.required(n, "family", "model"));
    if (family == "scalar_fde") {
        rd.keys(n, "model", {"family", "alpha", "beta", "gamma", "forcing", "order"});
        ScalarFdeSpec s;
        s.alpha = rd.number(n, "alpha", s.alpha);
        s.beta = rd.number(n, "beta", s.beta);
        s.gamma = rd.number(n, "gamma", s.gamma);
        if (n["forcing"].IsDefined()) s.forcing = rd.coeff(n["forcing"], base);
        s.base = base;
        s.grid = grid;
        const OrderParams A = parse_order(rd, n, 1, OrderParams({-std::max(s.alpha, 1e-3)}));
        return guarded(rd, n, [&] { return std::variant<FdeModel, NfdeModel>(build_scalar_fde(s, A)); });
    }
    if (family == "fde") {
        rd.keys(n, "model", {"family", "dim", "rhs", "order"});
        const std::size_t m = parse_dim(rd, n, "dim");
        FdeModel fm;
        fm.base = base;
        fm.grid = grid;
        fm.rhs = parse_rhs(rd, rd.required(n, "rhs", "model"), m, base, "rhs");
        fm.order = parse_order(rd, n, m, OrderParams(std::vector<double>(m, -1.0)));
        return guarded(rd, n, [&] {
            fm.validate();
            return std::variant<FdeModel, NfdeModel>(fm);
        });
    }
    if (family == "compartmental_nfde") {
        rd.keys(n, "model", {"family", "m", "transport", "transport_delay", "neutral", "neutral_delay",
                             "excretion", "inflow", "loss_form", "order"});
        const std::size_t m = parse_dim(rd, n, "m");
        CompartmentalSpec s = CompartmentalSpec::zeros(m, base, grid);
        if (n["transport"].IsDefined()) s.transport = rd.coeff_matrix(n["transport"], m, base);
        if (n["transport_delay"].IsDefined()) s.transport_delay = rd.number_matrix(n["transport_delay"], m);
        if (n["neutral"].IsDefined()) s.neutral = rd.coeff_matrix(n["neutral"], m, base);
        if (n["neutral_delay"].IsDefined()) s.neutral_delay = rd.number_matrix(n["neutral_delay"], m);
        if (n["excretion"].IsDefined()) s.excretion = rd.coeff_list(n["excretion"], m, base);
        if (n["inflow"].IsDefined()) s.inflow = rd.coeff_list(n["inflow"], m, base);
        if (const YAML::Node lf = n["loss_form"]; lf.IsDefined()) {
            const std::string v = rd.text(lf);
            if (v == "neutral") s.loss_form = LossForm::Neutral;
            else if (v == "head") s.loss_form = LossForm::Head;
            else rd.fail(lf, "loss_form must be 'neutral' or 'head'");
        }
        return guarded(rd, n, [&] {
            if (n["order"].IsDefined())
                return std::variant<FdeModel, NfdeModel>(
                    build_compartmental_nfde(s, parse_order(rd, n, m, OrderParams())));
            return std::variant<FdeModel, NfdeModel>(build_compartmental_nfde(s));
        });
    }
    if (family == "nfde") {
        rd.keys(n, "model", {"family", "dim", "D", "G", "order"});
        const std::size_t m = parse_dim(rd, n, "dim");
        NfdeModel nm;
        nm.D.dim = m;
        nm.D.base = base;
        nm.D.grid = grid;
        const YAML::Node dn = rd.required(n, "D", "model");
        rd.keys(dn, "D", {"atoms", "density"});
        if (const YAML::Node as = dn["atoms"]; as.IsDefined()) {
            if (!as.IsSequence()) rd.fail(as, "D.atoms must be a list");
            for (const auto& a : as) {
                rd.keys(a, "atom", {"delay", "coeff"});
                nm.D.atoms.push_back({rd.number(rd.required(a, "delay", "atom")),
                                      rd.coeff_matrix(rd.required(a, "coeff", "atom"), m, base)});
            }
        }
        if (const YAML::Node d = dn["density"]; d.IsDefined()) {
            rd.keys(d, "density", {"decay", "coeff", "offset"});
            nm.D.density = Density{rd.number(rd.required(d, "decay", "density")),
                                   rd.coeff_matrix(rd.required(d, "coeff", "density"), m, base),
                                   rd.number(d, "offset", 0.0)};
        }
        nm.G = parse_rhs(rd, rd.required(n, "G", "model"), m, base, "G");
        nm.order = parse_order(rd, n, m, OrderParams(std::vector<double>(m, -1.0)));
        return guarded(rd, n, [&] {
            nm.validate();
            return std::variant<FdeModel, NfdeModel>(nm);
        });
    }
    rd.fail(n["family"], "unknown model family '" + family + "' (scalar_fde, fde, compartmental_nfde, nfde)");
}

DatumSpec parse_datum(const Reader& rd, const YAML::Node& n, std::size_t m) {
    DatumSpec d;
    if (n.IsScalar() || n.IsSequence()) {
        d.value = rd.numbers(n, m);
        return d;
    }
    rd.keys(n, "datum", {"type", "value", "samples", "amplitude", "frequency", "phase", "path"});
    const std::string type = n["type"].IsDefined() ? rd.text(n["type"]) : "constant";
    if (type == "constant") {
        d.value = rd.numbers(rd.required(n, "value", "constant datum"), m);
    } else if (type == "samples") {
        d.kind = DatumSpec::Kind::Samples;
        const YAML::Node s = rd.required(n, "samples", "samples datum");
        if (!s.IsSequence() || s.size() == 0) rd.fail(s, "samples must be a non-empty list (newest first)");
        for (const auto& row : s) d.samples.push_back(rd.numbers(row, m));
    } else if (type == "sinusoid") {
        d.kind = DatumSpec::Kind::Sinusoid;
        d.value = n["value"].IsDefined() ? rd.numbers(n["value"], m) : std::vector<double>(m, 0.0);
        d.amplitude = rd.numbers(rd.required(n, "amplitude", "sinusoid datum"), m);
        d.frequency = rd.number(n, "frequency", 1.0);
        d.phase = rd.number(n, "phase", 0.0);
    } else if (type == "random") {
        d.kind = DatumSpec::Kind::Random;
        d.random_amplitude = rd.number(n, "amplitude", 1.0);
    } else if (type == "file") {
        d.kind = DatumSpec::Kind::File;
        d.path = rd.text(rd.required(n, "path", "file datum"));
    } else {
        rd.fail(n["type"], "unknown datum type '" + type + "' (constant, samples, sinusoid, random, file)");
    }
    return d;
}

std::vector<double> positive_list(const Reader& rd, const YAML::Node& n) {
    auto v = rd.numbers(n);
    for (double x : v)
        if (!(x > 0.0)) rd.fail(n, "entries must be positive");
    return v;
}

}  // namespace

HistoryFunction build_datum(const DatumSpec& spec, std::size_t dim, const Grid& grid, std::uint64_t seed) {
    const auto m = static_cast<Eigen::Index>(dim);
    auto to_vec = [&](const std::vector<double>& v) {
        if (v.size() != dim) throw InvalidArgument("datum has " + std::to_string(v.size()) + " components, model has " + std::to_string(dim));
        return Vector(Eigen::Map<const Vector>(v.data(), m));
    };
    switch (spec.kind) {
        case DatumSpec::Kind::Constant:
            return HistoryFunction::constant(grid.step, grid.depth, to_vec(spec.value));
        case DatumSpec::Kind::Samples: {
            HistoryFunction h = HistoryFunction::zeros(dim, grid.step, grid.depth);
            for (std::size_t i = 0; i < h.count(); ++i)
                h.set_sample(i, to_vec(spec.samples[std::min(i, spec.samples.size() - 1)]));
            return h;
        }
        case DatumSpec::Kind::Sinusoid: {
            const Vector off = to_vec(spec.value), amp = to_vec(spec.amplitude);
            return HistoryFunction::from_function(dim, grid.step, grid.depth, [&](double s) {
                return Vector(off + amp * std::sin(spec.frequency * s + spec.phase));
            });
        }
        case DatumSpec::Kind::Random: {
            Rng rng(seed);
            return random_bv_history(rng, dim, grid.step, grid.depth, spec.random_amplitude);
        }
        case DatumSpec::Kind::File: {
            std::ifstream in(spec.path);
            if (!in) throw InvalidArgument("cannot open datum file '" + spec.path + "'");
            std::vector<std::pair<double, Vector>> rows;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
                std::replace(line.begin(), line.end(), ',', ' ');
                std::istringstream ls(line);
                double s;
                Vector v(m);
                if (!(ls >> s)) continue;
                for (Eigen::Index k = 0; k < m; ++k)
                    if (!(ls >> v[k])) throw InvalidArgument("datum file row '" + line + "' has too few columns");
                rows.emplace_back(s, v);
            }
            if (rows.empty()) throw InvalidArgument("datum file '" + spec.path + "' has no rows");
            std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            return HistoryFunction::from_function(dim, grid.step, grid.depth, [&](double s) {
                if (s <= rows.front().first) return rows.front().second;
                if (s >= rows.back().first) return rows.back().second;
                auto hi = std::lower_bound(rows.begin(), rows.end(), s,
                                           [](const auto& r, double v) { return r.first < v; });
                auto lo = hi - 1;
                const double w = (s - lo->first) / (hi->first - lo->first);
                return Vector((1.0 - w) * lo->second + w * hi->second);
            });
        }
    }
    throw InvalidArgument("unknown datum kind");
}

RunConfig parse_config(const std::string& text, const std::string& source_name, const ConfigOverrides& ov) {
    const Reader rd(source_name);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source_name, e.mark.line + 1, e.mark.column + 1, e.msg);
    }
    if (!root.IsMap()) throw ConfigError(source_name, 1, 1, "config must be a mapping");
    rd.keys(root, "config", {"model", "base", "grid", "run", "probe", "sweep"});

    RunConfig cfg;
    cfg.source_name = source_name;
    cfg.source_text = text;
    const TorusBase base = parse_base(rd, root["base"]);
    const Grid grid = parse_grid(rd, root["grid"], ov);
    cfg.model = parse_model(rd, rd.required(root, "model", "config"), base, grid, cfg.family);
    const std::size_t m = cfg.dim();

    RunSection& run = cfg.run;
    run.theta0.assign(base.dim(), 0.0);
    run.initial.value.assign(m, 0.0);
    if (const YAML::Node r = root["run"]; r.IsDefined()) {
        rd.keys(r, "run", {"theta0", "T", "initial", "initial_y", "seed", "output_every"});
        if (r["theta0"].IsDefined()) run.theta0 = rd.numbers(r["theta0"], base.dim());
        run.T = rd.number(r, "T", run.T);
        if (!(run.T > 0.0)) rd.fail(r["T"], "run.T must be positive");
        if (r["initial"].IsDefined()) run.initial = parse_datum(rd, r["initial"], m);
        if (r["initial_y"].IsDefined()) run.initial_y = parse_datum(rd, r["initial_y"], m);
        if (r["seed"].IsDefined()) {
            const long long s = rd.integer(r["seed"]);
            if (s < 0) rd.fail(r["seed"], "seed must be nonnegative");
            run.seed = static_cast<std::uint64_t>(s);
        }
        if (r["output_every"].IsDefined()) {
            const long long k = rd.integer(r["output_every"]);
            if (k < 1) rd.fail(r["output_every"], "output_every must be at least 1");
            run.output_every = static_cast<std::size_t>(k);
        }
    }
    if (ov.seed) run.seed = *ov.seed;
    cfg.audit.seed = run.seed;
    cfg.invert.h.value.assign(m, 1.0);

    if (const YAML::Node p = root["probe"]; p.IsDefined() && !p.IsNull()) {
        rd.keys(p, "probe", {"audit", "omega", "invert"});
        if (const YAML::Node a = p["audit"]; a.IsDefined()) {
            rd.keys(a, "probe.audit", {"n_samples", "ball_radius", "eps", "stability_pairs", "horizon", "late_time"});
            AuditOptions& o = cfg.audit;
            if (a["n_samples"].IsDefined()) o.n_samples = static_cast<std::size_t>(std::max(1LL, rd.integer(a["n_samples"])));
            o.ball_radius = rd.number(a, "ball_radius", o.ball_radius);
            if (a["eps"].IsDefined()) o.eps_list = positive_list(rd, a["eps"]);
            if (a["stability_pairs"].IsDefined())
                o.stability_pairs = static_cast<std::size_t>(std::max(1LL, rd.integer(a["stability_pairs"])));
            o.stability_horizon = rd.number(a, "horizon", o.stability_horizon);
            o.late_time = rd.number(a, "late_time", o.late_time);
        }
        if (const YAML::Node o = p["omega"]; o.IsDefined()) {
            rd.keys(o, "probe.omega", {"transients", "t_max", "delta_base", "threshold", "listed_pairs", "metric_terms"});
            OmegaOptions& w = cfg.omega;
            if (o["transients"].IsDefined()) w.transients = positive_list(rd, o["transients"]);
            w.t_max = rd.number(o, "t_max", w.t_max);
            w.delta_base = rd.number(o, "delta_base", w.delta_base);
            w.threshold = rd.number(o, "threshold", w.threshold);
            if (o["listed_pairs"].IsDefined()) w.listed_pairs = static_cast<std::size_t>(std::max(0LL, rd.integer(o["listed_pairs"])));
            if (o["metric_terms"].IsDefined()) w.metric_terms = static_cast<int>(std::max(1LL, rd.integer(o["metric_terms"])));
            for (double t : w.transients)
                if (t >= w.t_max) rd.fail(o, "every transient must be below t_max");
        }
        if (const YAML::Node iv = p["invert"]; iv.IsDefined()) {
            rd.keys(iv, "probe.invert", {"h", "tol", "max_iter", "residual_tol"});
            if (iv["h"].IsDefined()) cfg.invert.h = parse_datum(rd, iv["h"], m);
            cfg.invert.tol_fix = rd.number(iv, "tol", cfg.invert.tol_fix);
            if (iv["max_iter"].IsDefined()) cfg.invert.max_iter = static_cast<int>(std::max(1LL, rd.integer(iv["max_iter"])));
            cfg.invert.residual_tol = rd.number(iv, "residual_tol", cfg.invert.residual_tol);
        }
    }
    if (const YAML::Node s = root["sweep"]; s.IsDefined()) {
        rd.keys(s, "sweep", {"parameter", "values"});
        cfg.sweep = SweepSection{rd.text(rd.required(s, "parameter", "sweep")),
                                 rd.numbers(rd.required(s, "values", "sweep"))};
    }
    return cfg;
}

RunConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, 0, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path, overrides);
}

RunConfig with_model_parameter(const RunConfig& cfg, const std::string& parameter, double value,
                               const ConfigOverrides& overrides) {
    YAML::Node root = YAML::Load(cfg.source_text);
    YAML::Node node = root["model"];
    std::stringstream path(parameter);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(path, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError(cfg.source_name, 0, 0, "empty sweep parameter");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        const std::string& p = parts[i];
        if (node.IsSequence()) {
            const std::size_t k = std::stoul(p);
            if (k >= node.size()) throw ConfigError(cfg.source_name, 0, 0, "sweep path '" + parameter + "' is out of range");
            node.reset(node[k]);
        } else {
            if (!node[p].IsDefined()) throw ConfigError(cfg.source_name, 0, 0, "sweep path '" + parameter + "' does not exist");
            node.reset(node[p]);
        }
    }
    const std::string& last = parts.back();
    if (node.IsSequence()) {
        const std::size_t k = std::stoul(last);
        if (k >= node.size()) throw ConfigError(cfg.source_name, 0, 0, "sweep path '" + parameter + "' is out of range");
        node[k] = value;
    } else {
        node[last] = value;
    }
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << root;
    return parse_config(out.c_str(), cfg.source_name + " [" + parameter + "=" + std::to_string(value) + "]", overrides);
}

}  // namespace fadeflow
