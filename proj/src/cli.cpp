#include "fadeflow/cli.hpp"

#include "fadeflow/config.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>

namespace fadeflow {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

struct Flags {
    std::string config;
    std::string out;
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<double> depth;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
    sink->set_pattern("[%l] %v");
    auto log = std::make_shared<spdlog::logger>("fadeflow", sink);
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("LOG_LEVEL"); env && *env) level = spdlog::level::from_str(env);
    log->set_level(level);
    return log;
}

std::string num(double v) { return fmt::format("{:.15g}", v == 0.0 ? 0.0 : v); }

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

/// Trajectory table: t, theta_*, z_*, and w_* for neutral runs.
void write_trajectory(const Trajectory& tr, std::size_t every, const std::string& format, const std::string& family,
                      std::ostream& os) {
    const std::size_t d = tr.base_point(0).dim(), m = tr.dim();
    std::vector<std::string> cols{"t"};
    for (std::size_t k = 1; k <= d; ++k) cols.push_back("theta_" + std::to_string(k));
    for (std::size_t k = 1; k <= m; ++k) cols.push_back("z_" + std::to_string(k));
    if (tr.has_w())
        for (std::size_t k = 1; k <= m; ++k) cols.push_back("w_" + std::to_string(k));
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i <= tr.steps(); i += every) rows.push_back(i);
    if (rows.back() != tr.steps()) rows.push_back(tr.steps());

    auto row_values = [&](std::size_t i) {
        std::vector<double> v{tr.time(i)};
        for (double th : tr.base_point(i).theta) v.push_back(th);
        for (std::size_t k = 0; k < m; ++k) v.push_back(tr.head(i, k));
        if (tr.has_w())
            for (double w : to_std(tr.w(i))) v.push_back(w);
        return v;
    };
    if (format == "json") {
        json j{{"schema_version", kSchemaVersion}, {"command", "simulate"}, {"family", family}, {"columns", cols}};
        j["rows"] = json::array();
        for (std::size_t i : rows) j["rows"].push_back(row_values(i));
        os << j.dump(2) << '\n';
        return;
    }
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << '\n';
    for (std::size_t i : rows) {
        const auto v = row_values(i);
        for (std::size_t c = 0; c < v.size(); ++c) os << (c ? "," : "") << num(v[c]);
        os << '\n';
    }
}

Trajectory simulate(const RunConfig& cfg) {
    const HistoryFunction x0 = build_datum(cfg.run.initial, cfg.dim(), cfg.grid(), cfg.run.seed);
    const BasePoint th(cfg.run.theta0);
    if (const auto* f = std::get_if<FdeModel>(&cfg.model)) return integrate(*f, th, x0, cfg.run.T);
    return integrate_nfde(std::get<NfdeModel>(cfg.model), th, x0, cfg.run.T);
}

json audit_json(const RunConfig& cfg, const AuditReport& rep) {
    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name}, {"status", to_string(c.status)}, {"ok", c.ok}, {"value", c.value},
                          {"detail", c.detail}});
    json constants{{"lipschitz", rep.lipschitz}};
    if (cfg.is_neutral()) {
        constants["q"] = rep.q;
        constants["k_bound"] = rep.k_bound;
        constants["K_D"] = rep.K_D;
    }
    return {{"schema_version", kSchemaVersion}, {"command", "verify"}, {"family", cfg.family},
            {"hard_failure", rep.hard_failure()}, {"constants", constants}, {"checks", checks}};
}

json copy_json(const CopyOfBaseReport& r) {
    json levels = json::array();
    for (const auto& l : r.levels)
        levels.push_back({{"t_transient", l.t_transient}, {"pairs", l.pairs}, {"max_distance", l.max_distance},
                          {"two_solution_distance", l.two_solution_distance}});
    json pairs = json::array();
    for (const auto& p : r.pairs)
        pairs.push_back({{"t1", p.t1}, {"t2", p.t2}, {"base_distance", p.base_distance}, {"distance", p.distance}});
    return {{"levels", levels},
            {"pairs", pairs},
            {"return_times", r.return_times},
            {"two_solution_distance", r.two_solution_distance},
            {"pair_decay_rate", r.pair_decay_rate},
            {"two_solution_decay_rate", r.two_solution_decay_rate},
            {"pairs_decreasing", r.pairs_decreasing},
            {"pairs_below_threshold", r.pairs_below_threshold},
            {"two_solution_below_threshold", r.two_solution_below_threshold},
            {"pass", r.pass}};
}

class Output {
public:
    Output(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw ConfigError(path, 0, 0, "cannot open output file");
            os_ = &file_;
        }
    }
    std::ostream& operator*() { return *os_; }

private:
    std::ofstream file_;
    std::ostream* os_;
};

int cmd_simulate(const RunConfig& cfg, const Flags& fl, std::ostream& out, spdlog::logger& log) {
    log.info("simulating {} on [0, {}] with step {}", cfg.family, cfg.run.T, cfg.grid().step);
    const Trajectory tr = simulate(cfg);
    Output o(fl.out, out);
    write_trajectory(tr, cfg.run.output_every, fl.format, cfg.family, *o);
    return kExitOk;
}

int cmd_verify(const RunConfig& cfg, const Flags& fl, std::ostream& out, spdlog::logger& log) {
    const AuditReport rep = std::holds_alternative<FdeModel>(cfg.model)
                                ? audit_hypotheses(std::get<FdeModel>(cfg.model), cfg.audit)
                                : audit_hypotheses(std::get<NfdeModel>(cfg.model), cfg.audit);
    Output o(fl.out, out);
    if (fl.format == "csv") {
        *o << "name,status,ok,value,detail\n";
        for (const auto& c : rep.checks)
            *o << c.name << ',' << to_string(c.status) << ',' << (c.ok ? "true" : "false") << ',' << num(c.value)
               << ",\"" << c.detail << "\"\n";
    } else {
        *o << audit_json(cfg, rep).dump(2) << '\n';
    }
    for (const auto& c : rep.checks)
        if (c.status == CheckStatus::Fail) log.error("hypothesis {} failed: {}", c.name, c.detail);
    return rep.hard_failure() ? kExitHypothesis : kExitOk;
}

int cmd_invert(const RunConfig& cfg, const Flags& fl, std::ostream& out, std::ostream& err, spdlog::logger& log) {
    const auto* nm = std::get_if<NfdeModel>(&cfg.model);
    if (!nm) throw ConfigError(cfg.source_name, 0, 0, "invert needs a neutral model (family nfde or compartmental_nfde)");
    const HistoryFunction h = build_datum(cfg.invert.h, cfg.dim(), cfg.grid(), cfg.run.seed);
    const InverseResult inv = dhat_inverse(nm->D, BasePoint(cfg.run.theta0), h, cfg.invert.tol_fix, cfg.invert.max_iter);
    const std::size_t m = cfg.dim();
    Output o(fl.out, out);
    if (fl.format == "json") {
        json x = json::array(), s = json::array();
        for (std::size_t i = inv.x.count(); i-- > 0;) {
            s.push_back(-static_cast<double>(i) * h.step());
            x.push_back(to_std(inv.x.sample(i)));
        }
        *o << json{{"schema_version", kSchemaVersion}, {"command", "invert"}, {"iterations", inv.iterations},
                   {"last_change", inv.last_change}, {"residual", inv.residual}, {"converged", inv.converged},
                   {"s", s}, {"x", x}}
                  .dump(2)
           << '\n';
    } else {
        *o << 's';
        for (std::size_t k = 1; k <= m; ++k) *o << ",x_" << k;
        *o << '\n';
        for (std::size_t i = inv.x.count(); i-- > 0;) {
            *o << num(-static_cast<double>(i) * h.step());
            for (std::size_t k = 0; k < m; ++k) *o << ',' << num(inv.x.sample(i)[static_cast<Eigen::Index>(k)]);
            *o << '\n';
        }
    }
    err << fmt::format("iterations={} residual={:.3e} converged={}\n", inv.iterations, inv.residual, inv.converged);
    if (!inv.converged || inv.residual > cfg.invert.residual_tol) {
        log.error("inversion residual {:.3e} exceeds tolerance {:.3e}", inv.residual, cfg.invert.residual_tol);
        return kExitResidual;
    }
    return kExitOk;
}

int cmd_omega(const RunConfig& cfg, const Flags& fl, std::ostream& out, spdlog::logger& log) {
    const HistoryFunction x0 = build_datum(cfg.run.initial, cfg.dim(), cfg.grid(), cfg.run.seed);
    DatumSpec alt;
    alt.kind = DatumSpec::Kind::Random;
    const HistoryFunction y0 = build_datum(cfg.run.initial_y.value_or(alt), cfg.dim(), cfg.grid(), cfg.run.seed + 1);
    const BasePoint th(cfg.run.theta0);
    json j{{"schema_version", kSchemaVersion}, {"command", "omega"}, {"family", cfg.family}};
    bool pass;
    if (const auto* f = std::get_if<FdeModel>(&cfg.model)) {
        const CopyOfBaseReport r = omega_limit_probe(*f, th, x0, y0, cfg.omega);
        j["report"] = copy_json(r);
        pass = r.pass;
    } else {
        const NfdeCopyOfBaseReport r = nfde_omega_probe(std::get<NfdeModel>(cfg.model), th, x0, y0, cfg.omega);
        j["hat"] = copy_json(r.hat);
        j["original"] = copy_json(r.original);
        j["initial_regularity"] = {{"satisfied", r.initial_regularity.satisfied},
                                   {"sup_var", r.initial_regularity.sup_var},
                                   {"norm_R", r.initial_regularity.norm_R},
                                   {"windows", r.initial_regularity.windows},
                                   {"scope", "represented window only"}};
        pass = r.pass;
    }
    j["pass"] = pass;
    j["threshold"] = cfg.omega.threshold;
    Output o(fl.out, out);
    *o << j.dump(2) << '\n';
    if (!pass) log.warn("copy-of-base probe did not pass at threshold {}", cfg.omega.threshold);
    return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const Flags& fl, const ConfigOverrides& ov, std::ostream& out,
              spdlog::logger& log) {
    if (!cfg.sweep) throw ConfigError(cfg.source_name, 0, 0, "sweep needs a 'sweep' section with parameter and values");
    const std::size_t m = cfg.dim();
    json rows = json::array();
    std::vector<std::vector<std::string>> table;
    bool blew_up = false;
    for (double v : cfg.sweep->values) {
        const RunConfig c = with_model_parameter(cfg, cfg.sweep->parameter, v, ov);
        json r{{"value", v}};
        std::vector<std::string> line{num(v)};
        try {
            const Trajectory tr = simulate(c);
            double sup = 0.0;
            for (std::size_t i = 0; i <= tr.steps(); ++i) sup = std::max(sup, max_norm(tr.head(i)));
            const auto z = to_std(tr.head(tr.steps()));
            r["status"] = "ok";
            r["t_end"] = tr.time(tr.steps());
            r["z_end"] = z;
            r["sup_norm"] = sup;
            line.insert(line.end(), {"ok", num(tr.time(tr.steps()))});
            for (double x : z) line.push_back(num(x));
            line.push_back(num(sup));
        } catch (const BlowUpError& e) {
            log.warn("{}={}: {}", cfg.sweep->parameter, v, e.what());
            blew_up = true;
            r["status"] = "blowup";
            r["t_end"] = e.time();
            line.insert(line.end(), {"blowup", num(e.time())});
            for (std::size_t k = 0; k <= m; ++k) line.emplace_back("");
        }
        rows.push_back(r);
        table.push_back(std::move(line));
    }
    Output o(fl.out, out);
    if (fl.format == "json") {
        *o << json{{"schema_version", kSchemaVersion}, {"command", "sweep"}, {"parameter", cfg.sweep->parameter},
                   {"rows", rows}}
                  .dump(2)
           << '\n';
    } else {
        *o << "value,status,t_end";
        for (std::size_t k = 1; k <= m; ++k) *o << ",z_" << k;
        *o << ",sup_norm\n";
        for (const auto& line : table) {
            for (std::size_t c = 0; c < line.size(); ++c) *o << (c ? "," : "") << line[c];
            *o << '\n';
        }
    }
    return blew_up ? kExitBlowUp : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulation and verification of nonautonomous (neutral) FDEs with infinite delay", "fadeflow"};
    Flags fl;
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", fl.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
    app.add_option("--out", fl.out, "write results to this file instead of stdout");
    app.add_option("--seed", fl.seed, "override run.seed");
    app.add_option("--dt", fl.dt, "override grid.step")->check(CLI::PositiveNumber);
    app.add_option("--depth", fl.depth, "override grid.depth")->check(CLI::PositiveNumber);
    app.add_option("--format", fl.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    for (const char* verb : {"simulate", "verify", "invert", "omega", "sweep"}) app.add_subcommand(verb);
    app.get_subcommand("simulate")->description("integrate the model and write the trajectory");
    app.get_subcommand("verify")->description("audit the model hypotheses (JSON checklist)");
    app.get_subcommand("invert")->description("invert the neutral convolution operator on probe.invert.h");
    app.get_subcommand("omega")->description("copy-of-base probe on return-time pairs");
    app.get_subcommand("sweep")->description("simulate once per value of sweep.parameter");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
    auto log = make_logger(err);
    const std::string verb = app.get_subcommands().front()->get_name();
    const ConfigOverrides ov{fl.dt, fl.depth, fl.seed};
    try {
        const RunConfig cfg = load_config(fl.config, ov);
        if (verb == "simulate") return cmd_simulate(cfg, fl, out, *log);
        if (verb == "verify") {
            if (app.get_option("--format")->count() == 0) fl.format = "json";
            return cmd_verify(cfg, fl, out, *log);
        }
        if (verb == "invert") return cmd_invert(cfg, fl, out, err, *log);
        if (verb == "omega") return cmd_omega(cfg, fl, out, *log);
        return cmd_sweep(cfg, fl, ov, out, *log);
    } catch (const ConfigError& e) {
        log->error("{}", e.what());
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        log->error("{}", e.what());
        return kExitConfig;
    } catch (const BlowUpError& e) {
        log->error("{}", e.what());
        return kExitBlowUp;
    } catch (const NoReturnPairs& e) {
        log->error("{}", e.what());
        return kExitNoReturnPairs;
    } catch (const std::exception& e) {
        log->error("unexpected failure: {}", e.what());
        return kExitUnexpected;
    }
}

}  // namespace fadeflow
