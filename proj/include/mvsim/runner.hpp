#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mvsim/analysis.hpp"
#include "mvsim/config.hpp"
#include "mvsim/csv.hpp"
#include "mvsim/scheme.hpp"
#include "mvsim/svg.hpp"
#include "mvsim/verify.hpp"

namespace mvsim {

struct RunSummary {
    std::vector<std::string> files;
    std::string message;
    bool any_diverged = false;
    int exit_code = 0;
};

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "'");
}

inline void stamp(CsvWriter& csv, const ExperimentConfig& cfg) {
    csv.comment("config: " + cfg.to_json().dump());
    csv.comment("seed: " + std::to_string(cfg.seed));
}

// Path averages are pairwise sums so the bytes never depend on threads.
inline std::vector<double> path_average(const std::vector<std::vector<double>>& rows,
                                        std::size_t cols) {
    std::vector<double> avg(cols);
    for (std::size_t k = 0; k < cols; ++k)
        avg[k] = pairwise_sum_indexed(0, rows.size(),
                                      [&](std::size_t p) { return rows[p][k]; }) /
                 double(rows.size());
    return avg;
}

inline void write_series_csv(const std::string& path, const ExperimentConfig& cfg,
                             const EnsembleResult& res, const std::string& variant = "") {
    CsvWriter csv(path);
    stamp(csv, cfg);
    if (!variant.empty()) csv.comment("variant: " + variant);
    csv.comment("diverged: " + std::string(res.any_diverged ? "true" : "false"));
    std::vector<std::string> cols{"step", "time", "mean_square", "mean_1"};
    for (std::size_t p = 0; p < res.path_ms.size(); ++p)
        cols.push_back("ms_path_" + std::to_string(p));
    csv.header(cols);
    const std::vector<double> mean1 = path_average(res.path_mean1, res.times.size());
    for (std::size_t k = 0; k < res.times.size(); ++k) {
        std::vector<std::optional<double>> row;
        row.emplace_back(double(k));
        row.emplace_back(res.times[k]);
        if (k < res.avg_ms.size())
            row.emplace_back(res.avg_ms[k]);
        else
            row.emplace_back(std::nullopt);
        row.emplace_back(mean1[k]);
        for (const auto& pr : res.path_ms) row.emplace_back(pr[k]);
        csv.row(row);
    }
    csv.close();
}

inline Series avg_ms_series(const EnsembleResult& res, const std::string& label) {
    Series s;
    s.label = label;
    s.x.assign(res.times.begin(), res.times.begin() + std::ptrdiff_t(res.avg_ms.size()));
    s.y = res.avg_ms;
    return s;
}

inline std::vector<Series> path_ms_series(const EnsembleResult& res, std::size_t max_paths) {
    std::vector<Series> out;
    for (std::size_t p = 0; p < res.path_ms.size() && p < max_paths; ++p) {
        Series s;
        s.label = res.path_ms.size() <= 8 ? "path " + std::to_string(p) : "";
        s.x = res.times;
        s.y = res.path_ms[p];
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<double> sliced_times(const EnsembleResult& res) {
    return std::vector<double>(res.times.begin(),
                               res.times.begin() + std::ptrdiff_t(res.avg_ms.size()));
}

inline std::optional<StabilityReport> try_rate(const std::vector<double>& t,
                                               const std::vector<double>& v, double t0,
                                               double t1) {
    try {
        return estimate_rate(t, v, t0, t1);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace detail

inline RunSummary run_simulate(const ExperimentConfig& cfg) {
    detail::ensure_dir(cfg.out_dir);
    const ModelSpec model = cfg.build_model();
    const EnsembleResult res = run_ensemble(model, cfg.scheme_config());

    RunSummary sum;
    sum.any_diverged = res.any_diverged;
    const std::string csv_path = detail::join_path(cfg.out_dir, "series.csv");
    detail::write_series_csv(csv_path, cfg, res);
    sum.files.push_back(csv_path);

    ChartOptions opt;
    opt.title = cfg.model_name + " (" + to_string(cfg.scheme) + ", dt=" + csv_num(cfg.dt) + ")";
    opt.x_label = "t";
    opt.y_label = "mean square";
    opt.log_y = true;
    std::vector<Series> series{detail::avg_ms_series(res, "path average")};
    const auto paths = detail::path_ms_series(res, 6);
    series.insert(series.end(), paths.begin(), paths.end());
    const std::string svg_path = detail::join_path(cfg.out_dir, "series.svg");
    write_text_file(svg_path, render_line_chart(series, opt));
    sum.files.push_back(svg_path);

    std::ostringstream msg;
    msg << "simulate: steps=" << cfg.resolved_steps() << " n=" << cfg.n
        << " paths=" << cfg.paths << " diverged=" << (res.any_diverged ? "true" : "false");
    if (res.any_diverged)
        msg << " (" << res.diverged_paths << " paths, first at t="
            << csv_num(res.first_divergence_time) << ")";
    sum.message = msg.str();
    return sum;
}

inline RunSummary run_rate(const ExperimentConfig& cfg) {
    detail::ensure_dir(cfg.out_dir);
    const ModelSpec model = cfg.build_model();
    const RateConstants& rc = model.constants;
    const double horizon = cfg.resolved_horizon();
    const bool bem = cfg.scheme == SchemeKind::backward_em;

    RunSummary sum;
    const std::string csv_path = detail::join_path(cfg.out_dir, "rates.csv");
    CsvWriter csv(csv_path);
    detail::stamp(csv, cfg);

    const bool has_ms_theory =
        bem ? (rc.l1 && rc.l2 && rc.d2) : (rc.a1 && rc.a2 && rc.b1 && rc.b2);
    const bool has_as_theory =
        bem ? (rc.ct1 && rc.ct2 && rc.h1 && rc.h2) : (rc.b1 && rc.b2 && rc.c1 && rc.c2);
    if (!has_ms_theory || !has_as_theory)
        csv.comment("warning: model declares no constants for some theoretical columns; "
                    "empirical-only where empty");

    std::vector<Series> chart;
    std::ostringstream msg;
    msg << "rate sweep over " << cfg.dt_list.size() << " stepsizes:";
    std::vector<std::vector<std::optional<double>>> rows;
    for (double dt : cfg.dt_list) {
        ExperimentConfig sub = cfg;
        sub.dt = dt;
        sub.steps.reset();
        sub.horizon = horizon;
        const EnsembleResult res = run_ensemble(model, sub.scheme_config());
        sum.any_diverged = sum.any_diverged || res.any_diverged;
        const std::vector<double> times = detail::sliced_times(res);
        const double t1 = std::min(cfg.window_hi, times.empty() ? 0.0 : times.back());

        std::optional<double> ms_slope, ms_theory, as_median, as_theory;
        if (const auto rep = detail::try_rate(times, res.avg_ms, cfg.window_lo, t1))
            ms_slope = rep->empirical_rate;
        else
            csv.comment("warning: dt=" + csv_num(dt) +
                        ": mean-square window has too few usable points");
        try {
            std::vector<std::vector<double>> rows_ms = res.path_ms;
            for (auto& r : rows_ms) r.resize(times.size());
            as_median = estimate_path_rates(times, rows_ms, cfg.window_lo, t1).median;
        } catch (const std::exception&) {
            csv.comment("warning: dt=" + csv_num(dt) +
                        ": per-path window has too few usable points");
        }
        if (has_ms_theory) {
            try {
                ms_theory = bem ? -bem_ms_rate(*rc.l1, *rc.l2, *rc.d2)
                                : -ms_rate_equation(dt, *rc.a1, *rc.a2, *rc.b1, *rc.b2)
                                       .theta_star;
            } catch (const std::exception& e) {
                csv.comment("warning: dt=" + csv_num(dt) + ": " + e.what());
            }
        }
        if (has_as_theory) {
            try {
                as_theory = bem ? -bem_rate_equation(dt, *rc.ct1, *rc.ct2, *rc.h1, *rc.h2)
                                       .beta_star
                                : -as_rate_equation(dt, *rc.b1, *rc.b2, *rc.c1, *rc.c2)
                                       .xi_star;
            } catch (const std::exception& e) {
                csv.comment("warning: dt=" + csv_num(dt) + ": " + e.what());
            }
        }
        rows.push_back({dt, ms_slope, ms_theory, as_median, as_theory});

        Series s = detail::avg_ms_series(res, "dt=" + std::string(csv_num(dt)));
        chart.push_back(std::move(s));
        msg << " dt=" << csv_num(dt) << " slope="
            << (ms_slope ? csv_num(*ms_slope) : "n/a");
    }
    csv.header({"dt", "ms_slope", "ms_slope_theory", "as_median_slope", "as_slope_theory"});
    for (const auto& r : rows) csv.row(r);
    csv.close();
    sum.files.push_back(csv_path);

    ChartOptions opt;
    opt.title = cfg.model_name + ": mean square vs t by stepsize";
    opt.x_label = "t";
    opt.y_label = "mean square";
    opt.log_y = true;
    const std::string svg_path = detail::join_path(cfg.out_dir, "rates.svg");
    write_text_file(svg_path, render_line_chart(chart, opt));
    sum.files.push_back(svg_path);
    sum.message = msg.str();
    return sum;
}

inline RunSummary run_chaos(const ExperimentConfig& cfg) {
    detail::ensure_dir(cfg.out_dir);
    const ModelSpec model = cfg.build_model();
    const CoupledResult cr = simulate_coupled(model, cfg.scheme_config(), cfg.n_list,
                                              cfg.proxy_factor);

    RunSummary sum;
    const std::string csv_path = detail::join_path(cfg.out_dir, "chaos.csv");
    CsvWriter csv(csv_path);
    detail::stamp(csv, cfg);
    csv.comment("reference: " + cr.reference_kind +
                (cr.n_ref ? " (n_ref=" + std::to_string(cr.n_ref) + ")" : ""));

    std::vector<std::size_t> t_idx;
    for (double t : cfg.t_eval)
        t_idx.push_back(std::min(cr.times.size() - 1,
                                 std::size_t(std::floor(t / cfg.dt + 0.5))));
    std::vector<std::string> cols{"n"};
    for (std::size_t j = 0; j < t_idx.size(); ++j) {
        cols.push_back("e_t" + std::to_string(j));
        csv.comment("e_t" + std::to_string(j) + " evaluated at t=" +
                    csv_num(cr.times[t_idx[j]]));
    }
    cols.push_back("phi_n");
    csv.header(cols);

    std::vector<double> nv(cr.n_list.begin(), cr.n_list.end());
    for (std::size_t ni = 0; ni < cr.n_list.size(); ++ni) {
        std::vector<std::optional<double>> row{double(cr.n_list[ni])};
        for (std::size_t idx : t_idx) {
            const double e = cr.e[ni][idx];
            if (std::isfinite(e))
                row.emplace_back(e);
            else
                row.emplace_back(std::nullopt);
        }
        row.emplace_back(phi_of_n(double(cr.n_list[ni]), int(model.d), kInf));
        csv.row(row);
    }

    std::ostringstream msg;
    msg << "chaos: reference=" << cr.reference_kind;
    std::vector<Series> chart;
    for (std::size_t j = 0; j < t_idx.size(); ++j) {
        std::vector<double> ev;
        for (std::size_t ni = 0; ni < cr.n_list.size(); ++ni) ev.push_back(cr.e[ni][t_idx[j]]);
        Series s;
        s.label = "t=" + std::string(csv_num(cr.times[t_idx[j]]));
        s.x = nv;
        s.y = ev;
        chart.push_back(std::move(s));
        try {
            const ChaosReport rep = fit_chaos_rate(nv, ev, int(model.d));
            csv.comment("slope at t=" + std::string(csv_num(cr.times[t_idx[j]])) + ": " +
                        csv_num(rep.slope) + " (stderr " + csv_num(rep.slope_stderr) +
                        ", r2 " + csv_num(rep.r_squared) + ", theory " +
                        csv_num(rep.theoretical_exponent) + ")");
            msg << " slope(t=" << csv_num(cr.times[t_idx[j]]) << ")=" << csv_num(rep.slope);
        } catch (const std::exception& e) {
            csv.comment(std::string("warning: slope fit failed: ") + e.what());
        }
    }
    csv.close();
    sum.files.push_back(csv_path);

    ChartOptions opt;
    opt.title = cfg.model_name + ": propagation of chaos";
    opt.x_label = "N";
    opt.y_label = "e_N";
    opt.log_x = opt.log_y = true;
    const std::string svg_path = detail::join_path(cfg.out_dir, "chaos.svg");
    write_text_file(svg_path, render_line_chart(chart, opt));
    sum.files.push_back(svg_path);
    sum.message = msg.str();
    return sum;
}

inline RunSummary run_check(const ExperimentConfig& cfg) {
    detail::ensure_dir(cfg.out_dir);
    ModelSpec model = cfg.build_model();
    if (model.uses_observation)
        throw ConfigError("config: 'check' requires an autonomous model preset");

    RunSummary sum;
    const std::string csv_path = detail::join_path(cfg.out_dir, "checks.csv");
    CsvWriter csv(csv_path);
    detail::stamp(csv, cfg);
    csv.header({"assumption", "verdict", "samples", "witness_sample", "lhs", "rhs"});

    std::ostringstream table;
    table << "assumption  verdict  detail\n";
    bool all_pass = true;
    for (AssumptionId id : cfg.assumptions) {
        std::vector<std::string> row{to_string(id)};
        try {
            const CheckResult res = check_assumption(model, id, cfg.check_cfg);
            if (res.pass) {
                row.insert(row.end(),
                           {"pass", std::to_string(res.samples), "", "", ""});
                table << to_string(id) << "        pass     " << res.samples
                      << " samples\n";
            } else {
                all_pass = false;
                const Witness& w = *res.witness;
                row.insert(row.end(), {"fail", std::to_string(res.samples),
                                       std::to_string(w.sample_index), csv_num(w.lhs),
                                       csv_num(w.rhs)});
                table << to_string(id) << "        FAIL     " << w.note << " at sample "
                      << w.sample_index << ": lhs " << csv_num(w.lhs) << " > rhs "
                      << csv_num(w.rhs) << "\n";
            }
        } catch (const MissingConstants& e) {
            all_pass = false;
            row.insert(row.end(), {"error", "0", "", "", ""});
            table << to_string(id) << "        ERROR    " << e.what() << "\n";
        }
        csv.row_cells(row);
    }
    csv.close();
    sum.files.push_back(csv_path);
    sum.message = table.str();
    sum.exit_code = all_pass ? 0 : 3;
    return sum;
}

inline RunSummary run_control(const ExperimentConfig& cfg) {
    detail::ensure_dir(cfg.out_dir);
    struct Variant {
        std::string name;
        double k1, k2;
    };
    std::vector<Variant> variants;
    if (cfg.ctrl_k1 && cfg.ctrl_k2)
        variants.push_back({"custom", *cfg.ctrl_k1, *cfg.ctrl_k2});
    else
        variants = {{"uncontrolled", 0.0, 0.0},
                    {"bounded", 7.0, 8.0},
                    {"stabilizing", 12.0, 10.0}};

    RunSummary sum;
    std::vector<Series> chart;
    std::ostringstream msg;
    for (const Variant& v : variants) {
        std::map<std::string, double> params = cfg.model_params;
        params["k1"] = v.k1;
        params["k2"] = v.k2;
        params["delta_obs"] = cfg.delta_obs;
        const ModelSpec model = make_preset("feedback", params);
        const EnsembleResult res = run_ensemble(model, cfg.scheme_config());
        sum.any_diverged = sum.any_diverged || res.any_diverged;

        const std::string csv_path =
            detail::join_path(cfg.out_dir, "series_" + v.name + ".csv");
        detail::write_series_csv(csv_path, cfg, res,
                                 v.name + " (k1=" + csv_num(v.k1) + ", k2=" +
                                     csv_num(v.k2) + ")");
        sum.files.push_back(csv_path);
        chart.push_back(detail::avg_ms_series(res, v.name));

        msg << v.name << ": diverged=" << (res.any_diverged ? "true" : "false");
        const std::vector<double> times = detail::sliced_times(res);
        if (const auto rep = detail::try_rate(times, res.avg_ms, 1.0,
                                              times.empty() ? 0.0 : times.back()))
            msg << " rate=" << csv_num(rep->empirical_rate);
        msg << "; ";
    }
    ChartOptions opt;
    opt.title = "feedback control (delta=" + std::string(csv_num(cfg.delta_obs)) + ")";
    opt.x_label = "t";
    opt.y_label = "mean square";
    opt.log_y = true;
    const std::string svg_path = detail::join_path(cfg.out_dir, "control.svg");
    write_text_file(svg_path, render_line_chart(chart, opt));
    sum.files.push_back(svg_path);
    sum.message = msg.str();
    return sum;
}

// One canned reproduction: a config plus which view of the run to plot.
struct FigureSpec {
    std::string id;
    std::string title;
    ExperimentConfig cfg;
    std::string view;  // "avg_ms", "paths_ms", "mean", "rates", "chaos", "control"
};

inline std::vector<FigureSpec> figure_list(std::uint64_t seed, const std::string& out_dir) {
    auto base = [&](RunKind kind) {
        ExperimentConfig c;
        c.kind = kind;
        c.seed = seed;
        c.out_dir = out_dir;
        return c;
    };
    std::vector<FigureSpec> figs;

    FigureSpec f1{"fig01_opinion_ms", "opinion model, mean-square stability", base(RunKind::simulate), "avg_ms"};
    f1.cfg.model_name = "opinion";
    f1.cfg.dt = 0.01;
    f1.cfg.horizon = 3.0;
    f1.cfg.n = 400;
    f1.cfg.paths = 60;
    figs.push_back(f1);

    FigureSpec f2{"fig02_opinion_as", "opinion model, per-path decay", base(RunKind::simulate), "paths_ms"};
    f2.cfg.model_name = "opinion";
    f2.cfg.dt = 0.01;
    f2.cfg.horizon = 3.0;
    f2.cfg.n = 300;
    f2.cfg.paths = 30;
    figs.push_back(f2);

    FigureSpec f3{"fig03_rate_vs_stepsize", "opinion model, rate vs stepsize", base(RunKind::rate), "rates"};
    f3.cfg.model_name = "opinion";
    f3.cfg.dt = 0.005;
    f3.cfg.horizon = 4.8;
    f3.cfg.n = 300;
    f3.cfg.paths = 40;
    f3.cfg.dt_list = {0.005, 0.3, 0.4};
    f3.cfg.window_lo = 0.5;
    f3.cfg.window_hi = 4.8;
    figs.push_back(f3);

    FigureSpec f4{"fig04_linear_particles_ms", "linear model, mean square by particle count", base(RunKind::simulate), "multi_n_ms"};
    f4.cfg.model_name = "linear";
    f4.cfg.dt = 0.01;
    f4.cfg.horizon = 3.0;
    f4.cfg.paths = 40;
    figs.push_back(f4);

    FigureSpec f5{"fig05_linear_particles_as", "linear model, one-path average by particle count", base(RunKind::simulate), "multi_n_mean"};
    f5.cfg.model_name = "linear";
    f5.cfg.dt = 0.01;
    f5.cfg.horizon = 3.0;
    f5.cfg.paths = 1;
    figs.push_back(f5);

    FigureSpec f6{"fig06_uncontrolled_blowup", "feedback model without control, blow-up", base(RunKind::simulate), "paths_ms"};
    f6.cfg.model_name = "feedback";
    f6.cfg.model_params = {{"k1", 0.0}, {"k2", 0.0}, {"delta_obs", 0.05}};
    f6.cfg.dt = 0.01;
    f6.cfg.horizon = 5.0;
    f6.cfg.n = 300;
    f6.cfg.paths = 20;
    f6.cfg.divergence_threshold = 1e6;
    figs.push_back(f6);

    auto control_fig = [&](const std::string& id, const std::string& title, double k1,
                           double k2, const std::string& view) {
        FigureSpec f{id, title, base(RunKind::simulate), view};
        f.cfg.model_name = "feedback";
        f.cfg.model_params = {{"k1", k1}, {"k2", k2}, {"delta_obs", 0.05}};
        f.cfg.dt = 0.01;
        f.cfg.horizon = 10.0;
        f.cfg.n = 300;
        f.cfg.paths = 20;
        return f;
    };
    figs.push_back(control_fig("fig07_control_bounded_paths",
                               "feedback control k1=7 k2=8, per-path", 7.0, 8.0,
                               "paths_ms"));
    figs.push_back(control_fig("fig08_control_bounded_ms",
                               "feedback control k1=7 k2=8, mean square", 7.0, 8.0,
                               "avg_ms"));
    figs.push_back(control_fig("fig09_control_stabilizing_paths",
                               "feedback control k1=12 k2=10, per-path", 12.0, 10.0,
                               "paths_ms"));
    figs.push_back(control_fig("fig10_control_stabilizing_ms",
                               "feedback control k1=12 k2=10, mean square", 12.0, 10.0,
                               "avg_ms"));

    FigureSpec f11{"fig11_cubic_bem_ms", "cubic model, backward EM, mean-square stability", base(RunKind::simulate), "avg_ms"};
    f11.cfg.model_name = "cubic";
    f11.cfg.model_params = {{"rho1", 0.0}, {"rho2", 1.0}};
    f11.cfg.scheme = SchemeKind::backward_em;
    f11.cfg.dt = 0.004;
    f11.cfg.horizon = 2.0;
    f11.cfg.n = 200;
    f11.cfg.paths = 50;
    figs.push_back(f11);

    FigureSpec f12{"fig12_cubic_bem_as", "cubic model, backward EM, per-path decay", base(RunKind::simulate), "paths_ms"};
    f12.cfg.model_name = "cubic";
    f12.cfg.model_params = {{"rho1", 1.0}, {"rho2", 0.0}};
    f12.cfg.scheme = SchemeKind::backward_em;
    f12.cfg.dt = 0.004;
    f12.cfg.horizon = 2.0;
    f12.cfg.n = 150;
    f12.cfg.paths = 30;
    figs.push_back(f12);

    return figs;
}

namespace detail {

// Particle-count comparison figures run one ensemble per N; each N gets its
// own replayable series file, the chart overlays them.
inline std::vector<std::string> run_multi_n_figure(const FigureSpec& fig,
                                                   const std::string& dir, bool mean_view) {
    const std::vector<std::size_t> n_set{50, 200, 800};
    std::vector<Series> chart;
    std::vector<std::string> files;
    for (std::size_t n : n_set) {
        ExperimentConfig sub = fig.cfg;
        sub.n = n;
        const ModelSpec model = sub.build_model();
        const EnsembleResult res = run_ensemble(model, sub.scheme_config());
        const std::string csv_path =
            join_path(dir, fig.id + "_n" + std::to_string(n) + ".csv");
        write_series_csv(csv_path, sub, res);
        files.push_back(csv_path);
        Series s;
        s.label = "N=" + std::to_string(n);
        if (mean_view) {
            s.x = res.times;
            s.y = path_average(res.path_mean1, res.times.size());
        } else {
            s.x = sliced_times(res);
            s.y = res.avg_ms;
        }
        chart.push_back(std::move(s));
    }
    ChartOptions opt;
    opt.title = fig.title;
    opt.x_label = "t";
    opt.y_label = mean_view ? "particle average" : "mean square";
    opt.log_y = !mean_view;
    const std::string svg_path = join_path(dir, fig.id + ".svg");
    write_text_file(svg_path, render_line_chart(chart, opt));
    files.push_back(svg_path);
    return files;
}

inline std::vector<std::string> run_one_figure(const FigureSpec& fig,
                                               const std::string& dir) {
    if (fig.view == "rates") {
        ExperimentConfig sub = fig.cfg;
        sub.out_dir = dir;
        const RunSummary rs = run_rate(sub);
        std::vector<std::string> files;
        for (const std::string& f : rs.files) {
            const std::string renamed =
                join_path(dir, fig.id + std::filesystem::path(f).extension().string());
            std::filesystem::rename(f, renamed);
            files.push_back(renamed);
        }
        return files;
    }
    if (fig.view == "multi_n_ms") return run_multi_n_figure(fig, dir, false);
    if (fig.view == "multi_n_mean") return run_multi_n_figure(fig, dir, true);

    const ModelSpec model = fig.cfg.build_model();
    const EnsembleResult res = run_ensemble(model, fig.cfg.scheme_config());
    const std::string csv_path = join_path(dir, fig.id + ".csv");
    write_series_csv(csv_path, fig.cfg, res);

    ChartOptions opt;
    opt.title = fig.title;
    opt.x_label = "t";
    opt.y_label = "mean square";
    opt.log_y = true;
    std::vector<Series> chart;
    if (fig.view == "paths_ms")
        chart = path_ms_series(res, 12);
    else
        chart.push_back(avg_ms_series(res, "path average"));
    const std::string svg_path = join_path(dir, fig.id + ".svg");
    write_text_file(svg_path, render_line_chart(chart, opt));
    return {csv_path, svg_path};
}

}  // namespace detail

inline RunSummary run_figures(const ExperimentConfig& cfg) {
    const std::string dir = detail::join_path(cfg.out_dir, "figures");
    detail::ensure_dir(dir);
    auto figs = figure_list(cfg.seed, cfg.out_dir);

    RunSummary sum;
    CsvWriter manifest(detail::join_path(dir, "manifest.csv"));
    detail::stamp(manifest, cfg);
    manifest.header({"id", "title", "status"});
    std::ostringstream msg;
    std::size_t failures = 0;
    for (const FigureSpec& fig : figs) {
        if (!cfg.figure_only.empty() &&
            std::find(cfg.figure_only.begin(), cfg.figure_only.end(), fig.id) ==
                cfg.figure_only.end())
            continue;
        try {
            const auto files = detail::run_one_figure(fig, dir);
            sum.files.insert(sum.files.end(), files.begin(), files.end());
            manifest.row_cells({fig.id, fig.title, "ok"});
        } catch (const std::exception& e) {
            ++failures;
            std::string why = std::string("failed: ") + e.what();
            for (char& c : why)
                if (c == ',' || c == '\n') c = ';';
            manifest.row_cells({fig.id, fig.title, why});
            msg << fig.id << " failed: " << e.what() << "; ";
        }
    }
    manifest.close();
    sum.files.push_back(detail::join_path(dir, "manifest.csv"));
    msg << "figures: " << (failures == 0 ? "all succeeded" : "with failures");
    sum.message = msg.str();
    sum.exit_code = failures == 0 ? 0 : 2;
    return sum;
}

inline RunSummary run(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case RunKind::simulate: return run_simulate(cfg);
        case RunKind::rate: return run_rate(cfg);
        case RunKind::chaos: return run_chaos(cfg);
        case RunKind::check: return run_check(cfg);
        case RunKind::control: return run_control(cfg);
        default: return run_figures(cfg);
    }
}

}  // namespace mvsim
