#include "fadeflow/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fadeflow {

double quasimonotone_margin(const FdeModel& model, const BasePoint& theta, const HistoryView& x,
                            const HistoryView& y) {
    const Vector dF = eval_F(model, theta, y) - eval_F(model, theta, x);
    const Vector dz = y.head() - x.head();
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < dF.size(); ++i)
        margin = std::min(margin, dF[i] - model.order.diag[static_cast<std::size_t>(i)] * dz[i]);
    return margin;
}

MarginReport check_quasimonotone(const FdeModel& model, std::uint64_t seed, std::size_t n_pairs) {
    if (n_pairs == 0) throw InvalidArgument("check_quasimonotone needs at least one pair");
    model.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> scale(0.05, 1.0);
    MarginReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    double size = 0.0;
    for (std::size_t s = 0; s < n_pairs; ++s) {
        const BasePoint theta = random_base_point(rng, model.base.dim());
        auto [x, y] = random_ordered_pair(rng, model.order, model.grid.step, model.grid.depth, 1.0, scale(rng));
        rep.min_margin = std::min(rep.min_margin, quasimonotone_margin(model, theta, x, y));
        size = std::max(size, max_norm(eval_F(model, theta, x)) + max_norm(eval_F(model, theta, y)));
        ++rep.samples;
    }
    rep.tol = model.order.tol * (1.0 + size);
    rep.pass = rep.min_margin >= -rep.tol;
    return rep;
}

MonotonicityReport compare_snapshots(const std::function<HistoryView(std::size_t)>& lower,
                                     const std::function<HistoryView(std::size_t)>& upper,
                                     std::size_t steps, double t0, double step,
                                     const OrderParams& A) {
    MonotonicityReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= steps; ++i) {
        const HistoryView x = lower(i);
        const HistoryView y = upper(i);
        double diff = 0.0;
        for (std::size_t j = 0; j < x.count() * x.dim(); ++j)
            diff = std::max(diff, std::abs(y.data()[j] - x.data()[j]));
        const double margin = cone_margin(x, y, A) / (1.0 + diff);
        rep.min_margin = std::min(rep.min_margin, margin);
        ++rep.checked;
        if (margin < -A.tol && !rep.first_violation) {
            rep.first_violation = t0 + static_cast<double>(i) * step;
            rep.pass = false;
        }
    }
    return rep;
}

MonotonicityReport check_monotonicity(const FdeModel& model, const BasePoint& theta0,
                                      const HistoryView& x0, const HistoryView& y0, double T) {
    if (!leq_A(x0, y0, model.order)) throw InvalidArgument("check_monotonicity needs x0 <=_A y0");
    const Trajectory tx = integrate(model, theta0, x0, T);
    const Trajectory ty = integrate(model, theta0, y0, T);
    return compare_snapshots([&](std::size_t i) { return tx.snapshot_view(i); },
                             [&](std::size_t i) { return ty.snapshot_view(i); }, tx.steps(), tx.t0(),
                             tx.step(), model.order);
}

namespace {

double sup_metric(const Trajectory& a, const Trajectory& b, std::size_t stride) {
    double d = 0.0;
    for (std::size_t i = 0; i <= a.steps(); i += stride)
        d = std::max(d, metric_d(a.snapshot_view(i), b.snapshot_view(i)));
    return std::max(d, metric_d(a.snapshot_view(a.steps()), b.snapshot_view(b.steps())));
}

}  // namespace

UniformStabilityReport uniform_stability_search(const std::vector<StabilityPair>& pairs,
                                                const TrajectoryRunner& run,
                                                std::vector<double> eps_list) {
    std::sort(eps_list.begin(), eps_list.end());
    UniformStabilityReport rep;
    rep.pairs = pairs.size();
    if (pairs.empty()) return rep;
    std::vector<Trajectory> lower;
    lower.reserve(pairs.size());
    for (const auto& p : pairs) lower.push_back(run(p.theta, p.x));
    const std::size_t stride = std::max<std::size_t>(1, lower.front().steps() / 200);

    auto deviation_at = [&](std::size_t k, double delta) {
        const StabilityPair& s = pairs[k];
        // Scale the cone element so that metric_d(x, y) = delta (or the ball edge).
        double lo = 0.0, hi = s.s_max;
        if (metric_d(s.x, s.x + hi * s.c) > delta) {
            for (int it = 0; it < 50; ++it) {
                const double mid = 0.5 * (lo + hi);
                (metric_d(s.x, s.x + mid * s.c) > delta ? hi : lo) = mid;
            }
        }
        return sup_metric(lower[k], run(s.theta, s.x + lo * s.c), stride);
    };

    double running = 0.0;
    for (double eps : eps_list) {
        double delta = eps;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (deviation_at(k, delta) <= eps) continue;
            double lo = 0.0, hi = delta;
            for (int it = 0; it < 20; ++it) {
                const double mid = 0.5 * (lo + hi);
                (deviation_at(k, mid) <= eps ? lo : hi) = mid;
            }
            delta = lo;
        }
        running = std::max(running, delta);
        StabilityRow row{eps, running, running < 1e-3 * eps};
        rep.any_collapse = rep.any_collapse || row.collapsed;
        rep.rows.push_back(row);
    }
    return rep;
}

UniformStabilityReport uniform_stability_probe(const FdeModel& model, double r,
                                               std::vector<double> eps_list, std::size_t n_pairs,
                                               double T, std::uint64_t seed) {
    model.validate();
    if (!(r > 0.0)) throw InvalidArgument("ball radius must be positive");
    Rng rng(seed);
    const double dt = model.grid.step, L = model.grid.depth;
    std::vector<StabilityPair> pairs;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        BasePoint theta = random_base_point(rng, model.base.dim());
        HistoryFunction x = random_bv_history(rng, model.dim(), dt, L, 0.5 * r);
        HistoryFunction c = random_cone_element(rng, model.order, dt, L, 1.0);
        const double cn = c.sup_norm();
        if (cn <= 0.0) continue;
        const double s_max = (r - x.sup_norm()) / cn;
        pairs.push_back({std::move(theta), std::move(x), std::move(c), s_max});
    }
    return uniform_stability_search(
        pairs, [&](const BasePoint& th, const HistoryView& x) { return integrate(model, th, x, T); },
        std::move(eps_list));
}

ContinuityReport continuity_probe(const FdeModel& model, const BasePoint& theta0,
                                  const HistoryView& x0, double r, double T,
                                  const std::vector<double>& depths, double amplitude, double tol) {
    model.validate();
    const double amp = std::min(amplitude, std::max(0.0, r - x0.sup_norm()));
    const Trajectory base_run = integrate(model, theta0, x0, T);
    ContinuityReport rep;
    rep.tol = tol;
    const std::size_t m = x0.dim();
    for (double n : depths) {
        HistoryFunction xn = HistoryFunction::from_view(x0);
        for (std::size_t i = 0; i < xn.count(); ++i) {
            const double s = -static_cast<double>(i) * x0.step();
            const double bump = amp * std::clamp(-s - n, 0.0, 1.0);
            for (std::size_t k = 0; k < m; ++k) xn.at(i, k) += bump;
        }
        const Trajectory run = integrate(model, theta0, xn, T);
        ContinuityRow row;
        row.depth = n;
        row.initial_distance = metric_d(xn, x0);
        for (std::size_t i = 0; i <= run.steps(); ++i) {
            row.head_deviation = std::max(row.head_deviation, max_norm(run.head(i) - base_run.head(i)));
            row.metric_deviation =
                std::max(row.metric_deviation, metric_d(run.snapshot_view(i), base_run.snapshot_view(i)));
        }
        rep.rows.push_back(row);
    }
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        const double prev = rep.rows[i - 1].head_deviation, cur = rep.rows[i].head_deviation;
        if (!(cur < prev || (cur == 0.0 && prev == 0.0))) rep.decreasing = false;
    }
    rep.pass = rep.decreasing && (rep.rows.empty() || rep.rows.back().head_deviation < tol);
    return rep;
}

double fitted_log_slope(const std::vector<double>& t, const std::vector<double>& v) {
    double st = 0, sv = 0, stt = 0, stv = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.size() && i < v.size(); ++i) {
        if (!(v[i] > 0.0)) continue;
        const double lv = std::log(v[i]);
        st += t[i];
        sv += lv;
        stt += t[i] * t[i];
        stv += t[i] * lv;
        ++n;
    }
    if (n < 2) return 0.0;
    const double den = n * stt - st * st;
    return den == 0.0 ? 0.0 : (n * stv - st * sv) / den;
}

CopyOfBaseReport analyze_copy_of_base(const TorusBase& base, const BasePoint& theta0,
                                      const SnapshotFn& x, const SnapshotFn& y, std::size_t steps,
                                      double step, const OmegaOptions& opts) {
    if (opts.transients.empty()) throw InvalidArgument("omega probe needs at least one transient time");
    std::vector<double> levels = opts.transients;
    std::sort(levels.begin(), levels.end());
    const double t_end = static_cast<double>(steps) * step;
    if (opts.t_max > t_end + 1e-9 * t_end) throw InvalidArgument("omega probe t_max exceeds the recorded run");
    if (!(levels.front() < opts.t_max)) throw NoReturnPairs("transient window is empty: T_transient >= T_max");

    const auto times = return_times(base, theta0, opts.delta_base, levels.front(), opts.t_max, step);
    std::vector<std::size_t> idx;
    std::vector<BasePoint> pts;
    for (double t : times) {
        idx.push_back(static_cast<std::size_t>(std::llround(t / step)));
        pts.push_back(base.advance(theta0, t));
    }
    std::vector<ReturnPair> pairs;
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            const double bd = base_distance(pts[a], pts[b]);
            if (!(bd < opts.delta_base)) continue;
            pairs.push_back({times[a], times[b], bd, metric_d(x(idx[a]), x(idx[b]), opts.metric_terms)});
        }

    CopyOfBaseReport rep;
    rep.return_times = times.size();
    std::vector<double> lt, lmax, ltwo;
    for (double T : levels) {
        TransientLevel lev;
        lev.t_transient = T;
        for (const auto& p : pairs)
            if (p.t1 >= T - 1e-9) {
                ++lev.pairs;
                lev.max_distance = std::max(lev.max_distance, p.distance);
            }
        if (lev.pairs == 0)
            throw NoReturnPairs("no return-time pairs in [" + std::to_string(T) + ", " +
                                std::to_string(opts.t_max) + "]; widen the window or delta_base");
        const auto i = static_cast<std::size_t>(std::llround(T / step));
        lev.two_solution_distance = metric_d(x(i), y(i), opts.metric_terms);
        lt.push_back(T);
        lmax.push_back(lev.max_distance);
        ltwo.push_back(lev.two_solution_distance);
        rep.levels.push_back(lev);
    }
    const auto imax = static_cast<std::size_t>(std::llround(opts.t_max / step));
    rep.two_solution_distance = metric_d(x(imax), y(imax), opts.metric_terms);
    lt.push_back(opts.t_max);
    ltwo.push_back(rep.two_solution_distance);
    rep.pair_decay_rate = fitted_log_slope(std::vector<double>(lt.begin(), lt.end() - 1), lmax);
    rep.two_solution_decay_rate = fitted_log_slope(lt, ltwo);

    rep.pairs_decreasing = true;
    for (std::size_t i = 1; i < rep.levels.size(); ++i)
        if (!(rep.levels[i].max_distance < rep.levels[i - 1].max_distance)) rep.pairs_decreasing = false;
    rep.pairs_below_threshold = rep.levels.back().max_distance < opts.threshold;
    rep.two_solution_below_threshold = rep.two_solution_distance < opts.threshold;
    rep.pass = rep.pairs_decreasing && rep.pairs_below_threshold && rep.two_solution_below_threshold;

    std::sort(pairs.begin(), pairs.end(),
              [](const ReturnPair& a, const ReturnPair& b) { return a.distance > b.distance; });
    if (pairs.size() > opts.listed_pairs) pairs.resize(opts.listed_pairs);
    rep.pairs = std::move(pairs);
    return rep;
}

CopyOfBaseReport omega_limit_probe(const FdeModel& model, const BasePoint& theta0,
                                   const HistoryView& x0, const HistoryView& y0,
                                   const OmegaOptions& opts) {
    const Trajectory tx = integrate(model, theta0, x0, opts.t_max);
    const Trajectory ty = integrate(model, theta0, y0, opts.t_max);
    return analyze_copy_of_base(
        model.base, theta0, [&](std::size_t i) { return tx.snapshot_view(i); },
        [&](std::size_t i) { return ty.snapshot_view(i); }, tx.steps(), tx.step(), opts);
}

}  // namespace fadeflow
