#include "rdlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>

#include "rdlab/counterexample.hpp"
#include "rdlab/equivariant.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/limit_theorems.hpp"
#include "rdlab/monte_carlo.hpp"
#include "rdlab/parallel.hpp"
#include "rdlab/report.hpp"
#include "rdlab/rng.hpp"
#include "rdlab/stats.hpp"

namespace rdlab {

using nlohmann::json;

output_format parse_format(const std::string& s) {
    if (s == "csv") return output_format::csv;
    if (s == "json") return output_format::json;
    if (s == "both") return output_format::both;
    throw config_error("--format: expected csv, json or both");
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"density", "correlate", "variance",      "martingale", "clt",
                                                "twisted", "counterexample", "kestimate", "validate"};
    return names;
}

namespace {

// Finite numbers only; JSON has no inf/nan.
json num(double x) { return std::isfinite(x) ? json(x) : json(format_number(x)); }

class context {
public:
    context(const experiment_config& cfg, const run_options& opt, std::ostream& log, std::string sub)
        : cfg(cfg), opt(opt), log(log), dir(opt.out.empty() ? std::filesystem::path(cfg.output) : opt.out) {
        manifest.subcommand = std::move(sub);
        manifest.config_hash = cfg.hash();
        manifest.seed = cfg.seed;
        manifest.threads = opt.threads;
        manifest.config = cfg.source;
        std::filesystem::create_directories(dir);
    }

    template <class Fn>
    auto timed(const std::string& name, Fn&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
            manifest.timings.emplace_back(name, dt.count());
        };
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        } else {
            auto r = fn();
            finish();
            return r;
        }
    }

    void csv(const std::string& name, const csv_table& t) {
        if (opt.format == output_format::json) return;
        t.write(dir / name);
        manifest.outputs.push_back(name);
    }

    void svg(const std::string& name, const std::vector<plot_series>& s, const plot_style& style) {
        if (opt.format == output_format::json) return;
        std::string body;
        try {
            body = plot_svg(s, style);
        } catch (const config_error& e) {
            manifest.warn("plot", name + ": " + e.what());
            return;
        }
        atomic_write(dir / name, body);
        manifest.outputs.push_back(name);
    }

    void json_file(const std::string& name, const json& j) {
        if (opt.format == output_format::csv) return;
        atomic_write(dir / name, j.dump(2) + "\n");
        manifest.outputs.push_back(name);
    }

    void finish(int code) {
        manifest.exit_code = code;
        manifest.outputs.push_back("manifest.json");
        atomic_write(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    }

    const experiment_config& cfg;
    const run_options& opt;
    std::ostream& log;
    std::filesystem::path dir;
    run_manifest manifest;
};

pullback_options pull_opts(const experiment_config& cfg) {
    pullback_options p;
    p.n_max = cfg.grids.n_max;
    p.tol = cfg.tolerances.pullback;
    p.apply.coalesce_tol = cfg.tolerances.coalesce;
    return p;
}

// Path, densities and observable on fibers lo..hi, with a pullback margin.
struct window {
    cocycle c;
    base_path p;
    equivariant_data eq;
    fiber_observable obs;
    long lo = 0;
    long hi = 0;
};

window make_window(context& ctx, long lo, long hi) {
    const auto& cfg = ctx.cfg;
    window w{cfg.make_cocycle(), {}, {}, {}, lo, hi};
    const long back = std::max(0L, -lo) + cfg.grids.n_max + 1;
    const long fwd = std::max(0L, hi) + 1;
    w.p = ctx.timed("sample_path", [&] { return w.c.sample_path(cfg.seed, back, fwd); });
    w.eq = ctx.timed("pullback_density", [&] { return pullback_density(w.c, w.p, lo, hi, pull_opts(cfg)); });
    for (const auto& m : w.eq.warnings()) ctx.manifest.warn("pullback_convergence", m);
    w.obs = ctx.timed("observable", [&] {
        auto o = evaluate(cfg.observable, w.p, lo, hi);
        return cfg.observable.centered ? center(o, w.eq) : o;
    });
    return w;
}

decay_estimate decay_at(context& ctx, const window& w, long fiber, long n_max) {
    const auto tests = default_test_set(substream_seed(ctx.cfg.seed, "decay.tests"));
    auto d = ctx.timed("fit_decay", [&] { return fit_decay(w.eq, w.c, w.p, fiber, tests, n_max); });
    auto& k = ctx.manifest.constants;
    k["lambda_prime"] = num(d.rate);
    k["D_tilde"] = num(d.prefactor);
    k["K"] = num(d.k_value);
    k["decay_fiber"] = d.fiber;
    k["decay_n_max"] = n_max;
    k["mixing"] = d.mixing;
    if (!d.mixing) ctx.manifest.warn("decay_fit", "no exponential decay detected on the test set");
    return d;
}

csv_table decay_table(const decay_estimate& d) {
    csv_table t({"n", "worst_ratio", "bound"});
    for (std::size_t n = 0; n < d.worst_ratio.size(); ++n)
        t.row({static_cast<double>(n), d.worst_ratio[n], d.prefactor * std::exp(-d.rate * static_cast<double>(n))});
    return t;
}

std::vector<long> checkpoints_up_to(const std::vector<long>& grid, long n) {
    std::vector<long> out;
    for (long g : grid)
        if (g <= n) out.push_back(g);
    if (out.empty() || out.back() != n) out.push_back(n);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> as_double(const std::vector<long>& v) { return {v.begin(), v.end()}; }

std::vector<double> index_axis(std::size_t n, double start = 0.0) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = start + static_cast<double>(k);
    return x;
}

sigma_squared_options sigma_opts(const context& ctx) {
    sigma_squared_options o;
    o.n_max = ctx.cfg.grids.n_max;
    o.tail_tol = ctx.cfg.tolerances.sigma_tail;
    o.threads = ctx.opt.threads;
    o.apply.coalesce_tol = ctx.cfg.tolerances.coalesce;
    return o;
}

json sigma_json(const sigma_squared_result& r) {
    json j;
    j["dimension"] = r.dimension;
    j["value"] = r.value;
    j["std_error"] = r.std_error;
    j["eigenvalues"] = r.eigenvalues;
    j["psd"] = r.psd;
    j["certified"] = r.certified;
    j["fibers"] = r.fibers;
    j["uncertified_fibers"] = r.uncertified_fibers;
    j["max_tail_bound"] = num(r.max_tail_bound);
    j["scaling_value"] = num(r.scaling_value);
    j["diagnostic"] = r.diagnostic;
    return j;
}

void sigma_warnings(context& ctx, const sigma_squared_result& r) {
    if (r.certified) return;
    ctx.manifest.warn("tail_non_certifiable", r.diagnostic);
    ctx.manifest.warn("scaling_condition", "K ||psi||_BV too large on " + std::to_string(r.uncertified_fibers) +
                                               " fibers for the series tail to be certified");
}

sigma_squared_result operator_sigma(context& ctx, const window& w, long first, std::size_t count,
                                    const decay_estimate& d) {
    auto r = ctx.timed("sigma_squared", [&] { return sigma_squared(w.eq, w.c, w.p, w.obs, first, count, d, sigma_opts(ctx)); });
    ctx.manifest.constants["sigma2"] = r.value;
    ctx.manifest.constants["sigma2_std_error"] = r.std_error;
    sigma_warnings(ctx, r);
    return r;
}

int cmd_validate(context& ctx) {
    const auto c = ctx.cfg.make_cocycle();
    const auto p = c.sample_path(ctx.cfg.seed, 10, 10);
    const auto obs = evaluate(ctx.cfg.observable, p, -10, 10);
    const auto e = expansion_on_average(c, 10'000, ctx.cfg.seed);
    ctx.manifest.results = {{"maps", c.maps().size()},
                            {"observable_dimension", obs.dimension()},
                            {"expansion_mean", num(e.mean)},
                            {"expansion_half_width", num(e.half_width)},
                            {"expanding_on_average", e.expanding}};
    if (!e.expanding) ctx.manifest.warn("expansion_on_average", "mean log expansion not certified positive");
    ctx.log << "config ok (hash " << ctx.manifest.config_hash << ")\n";
    return 0;
}

int cmd_density(context& ctx) {
    const long lo = ctx.cfg.window.first;
    const long hi = lo + ctx.cfg.window.fibers - 1;
    const long dn = ctx.cfg.grids.decay_n_max;
    auto w = make_window(ctx, lo, hi + dn);
    const auto d = decay_at(ctx, w, lo, dn);

    csv_table dens({"fiber", "left", "right", "value"});
    double min_lower = std::numeric_limits<double>::infinity();
    double max_residual = 0.0;
    for (long j = lo; j <= hi; ++j) {
        const auto& v = w.eq.density(j);
        for (std::size_t k = 0; k < v.piece_count(); ++k)
            dens.row({static_cast<double>(j), v.piece_begin(k), v.piece_end(k), v.values()[k]});
        min_lower = std::min(min_lower, w.eq.lower_bound(j));
        max_residual = std::max(max_residual, w.eq.equivariance_residual(j));
    }
    ctx.csv("density.csv", dens);
    csv_table conv({"n", "l1_difference"});
    const auto& tr = w.eq.convergence_trace();
    for (std::size_t n = 0; n < tr.size(); ++n) conv.row({static_cast<double>(n + 1), tr[n]});
    ctx.csv("convergence.csv", conv);
    ctx.csv("decay.csv", decay_table(d));

    ctx.manifest.constants["converged_at"] = w.eq.converged_at();
    ctx.manifest.constants["truncation"] = w.eq.truncation();
    ctx.manifest.constants["lower_bound"] = num(min_lower);
    ctx.manifest.results = {{"converged", w.eq.converged()},
                            {"truncation_error", num(w.eq.truncation_error())},
                            {"max_equivariance_residual", num(max_residual)}};

    const auto& v0 = w.eq.density(lo);
    plot_series s{"density at fiber " + std::to_string(lo), {}, {}, false};
    for (std::size_t k = 0; k < v0.piece_count(); ++k) {
        s.x.insert(s.x.end(), {v0.piece_begin(k), v0.piece_end(k)});
        s.y.insert(s.y.end(), {v0.values()[k], v0.values()[k]});
    }
    ctx.svg("density.svg", {s}, {"Equivariant density", "x", "v", false, false, ""});
    plot_series ds{"worst ratio", index_axis(d.worst_ratio.size()), d.worst_ratio, true};
    plot_series bs{"fitted bound", index_axis(d.worst_ratio.size()), {}, false};
    for (double x : bs.x) bs.y.push_back(d.prefactor * std::exp(-d.rate * x));
    ctx.svg("decay.svg", {ds, bs}, {"Decay on zero-mean BV", "n", "ratio", false, true,
                                    "lambda' = " + format_number(d.rate)});
    ctx.log << "density: converged at n = " << w.eq.converged_at() << ", lambda' = " << d.rate << '\n';
    return 0;
}

int cmd_correlate(context& ctx) {
    const long lo = ctx.cfg.window.first;
    const long n_max = ctx.cfg.grids.n_max;
    const long dn = ctx.cfg.grids.decay_n_max;
    auto w = make_window(ctx, lo, lo + std::max(n_max, dn));
    const auto d = decay_at(ctx, w, lo, dn);
    const auto t = ctx.timed("correlations", [&] {
        return correlations(w.eq, w.c, w.p, w.obs, lo, n_max, d, {ctx.cfg.tolerances.coalesce});
    });
    const int dim = t.dimension;
    csv_table tab({"n", "component_i", "component_j", "value", "within_bound"});
    std::vector<double> ns, mags;
    for (std::size_t n = 0; n < t.c.size(); ++n) {
        const double within = n < t.within_bound.size() ? (t.within_bound[n] ? 1.0 : 0.0) : 1.0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                tab.row({static_cast<double>(n), static_cast<double>(i), static_cast<double>(j),
                         t.c[n][static_cast<std::size_t>(i * dim + j)], within});
        ns.push_back(static_cast<double>(n));
        mags.push_back(std::abs(t.c[n][0]));
    }
    ctx.csv("correlations.csv", tab);
    ctx.csv("decay.csv", decay_table(d));
    ctx.svg("correlations.svg", {{"|c_n|", ns, mags, true}}, {"Correlations", "n", "|c_n|", false, true, ""});
    ctx.manifest.results = {{"terminated_at", t.terminated_at ? json(*t.terminated_at) : json(nullptr)},
                            {"c0", t.c.empty() ? json(nullptr) : json(t.c[0])}};
    if (std::find(t.within_bound.begin(), t.within_bound.end(), false) != t.within_bound.end())
        ctx.manifest.warn("decay_bound", "some |c_n| exceed the fitted decay bound");
    ctx.log << "correlate: " << t.c.size() << " lags\n";
    return 0;
}

int cmd_variance(context& ctx) {
    const auto& cfg = ctx.cfg;
    const long lo = cfg.window.first;
    const auto count = static_cast<std::size_t>(cfg.window.fibers);
    const long mc_n = cfg.monte_carlo.n;
    const long hi = lo + std::max(cfg.window.fibers + cfg.grids.n_max, std::max(mc_n, cfg.grids.decay_n_max));
    auto w = make_window(ctx, lo, hi);
    const auto d = decay_at(ctx, w, lo, cfg.grids.decay_n_max);
    const auto r = operator_sigma(ctx, w, lo, count, d);
    ctx.manifest.results["operator"] = sigma_json(r);

    const int dim = r.dimension;
    csv_table s2({"component_i", "component_j", "value", "std_error"});
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            const auto k = static_cast<std::size_t>(i * dim + j);
            s2.row({static_cast<double>(i), static_cast<double>(j), r.value[k], r.std_error[k]});
        }
    ctx.csv("sigma2.csv", s2);
    csv_table run({"fibers", "per_fiber", "running_mean"});
    for (std::size_t k = 0; k < r.per_fiber.size(); ++k)
        run.row({static_cast<double>(k + 1), r.per_fiber[k], r.running_mean[k]});
    ctx.csv("sigma2_running.csv", run);

    std::vector<plot_series> plot{{"operator running mean", index_axis(r.running_mean.size(), 1.0), r.running_mean, false}};
    if (cfg.monte_carlo.trials >= 1000) {
        birkhoff_options bo;
        bo.trials = cfg.monte_carlo.trials;
        bo.n = mc_n;
        bo.checkpoints = checkpoints_up_to(cfg.grids.n_grid, mc_n);
        bo.threads = ctx.opt.threads;
        bo.seed = substream_seed(cfg.seed, "variance.mc");
        const auto batch = ctx.timed("birkhoff", [&] { return birkhoff(w.c, w.p, w.obs, w.eq.density(lo), lo, bo); });
        const auto vg = variance_growth(batch);
        csv_table mc({"n", "value", "std_error"});
        plot_series ms{"Monte Carlo (1/n) E S_n^2", {}, {}, true};
        for (const auto& v : vg) {
            mc.row({static_cast<double>(v.n), v.value, v.std_error});
            ms.x.push_back(static_cast<double>(v.n));
            ms.y.push_back(v.value);
        }
        ctx.csv("variance_growth.csv", mc);
        const auto& last = vg.back();
        const double rel = r.scalar() != 0.0 ? std::abs(last.value - r.scalar()) / std::abs(r.scalar()) : 0.0;
        ctx.manifest.results["monte_carlo"] = {{"n", last.n},
                                               {"value", num(last.value)},
                                               {"std_error", num(last.std_error)},
                                               {"relative_difference", num(rel)},
                                               {"exact_arithmetic", batch.exact_arithmetic}};
        plot.push_back(ms);
    } else {
        ctx.manifest.warn("monte_carlo", "fewer than 1000 trials; variance growth skipped");
    }
    ctx.svg("variance.svg", plot, {"Asymptotic variance", "n", "variance", true, false, "Sigma^2 = " + format_number(r.scalar())});
    ctx.log << "variance: Sigma^2 = " << r.scalar() << " +- " << r.std_error[0] << (r.certified ? "" : " (not certified)")
            << '\n';
    return r.certified ? 0 : 2;
}

int cmd_martingale(context& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.observable.dimension() != 1) throw config_error("observable.components: martingale needs a scalar observable");
    const long lo = cfg.window.first;
    const long hi = lo + cfg.window.fibers - 1;
    martingale_options mo;
    mo.tol = cfg.tolerances.series;
    mo.threads = ctx.opt.threads;
    mo.apply.coalesce_tol = cfg.tolerances.coalesce;

    // Fit the decay first to learn how far back chi reaches.
    const long dn = cfg.grids.decay_n_max;
    auto probe = make_window(ctx, lo, lo + dn);
    const auto d0 = decay_at(ctx, probe, lo, dn);
    const long trunc = chi_truncation(d0, probe.obs.max_bv(), mo);
    const long marap_n = std::min<long>(cfg.window.fibers, 200);
    auto w = make_window(ctx, lo - trunc - 2, std::max(hi + 1 + marap_n, lo + dn));
    const auto md = ctx.timed("martingale_decompose", [&] { return martingale_decompose(w.eq, w.c, w.p, w.obs, lo, hi, d0, mo); });
    const auto var = martingale_variances(md, w.eq, lo, hi);

    csv_table t({"fiber", "residual", "m_l1", "chi_sup", "variance"});
    for (long j = lo; j <= hi; ++j) {
        const auto k = static_cast<std::size_t>(j - lo);
        t.row({static_cast<double>(j), md.residual[k], md.m_at(j).l1(), md.chi_at(j).sup(), var[k]});
    }
    ctx.csv("martingale.csv", t);

    auto g = make_engine(cfg.seed, "martingale.points");
    std::vector<double> pts(100);
    for (auto& x : pts) x = uniform01(g);
    const auto ma = ctx.timed("marap", [&] { return marap_check(md, w.c, w.p, w.obs, lo, pts, marap_n); });
    double tele = 0.0;
    for (long n = 1; n <= std::min<long>(8, cfg.window.fibers); ++n)
        tele = std::max(tele, telescoping_defect(md, w.c, w.p, w.obs, lo, n));
    const auto vm = sample_moments(var);
    const bool cob = is_coboundary(vm.mean, md.max_m_l1());

    auto& k = ctx.manifest.constants;
    k["chi_truncation"] = md.truncation;
    k["chi_tail_bound"] = num(md.tail_bound);
    k["K1"] = num(md.k1);
    k["K_tilde"] = num(md.k_tilde);
    ctx.manifest.results = {{"max_residual", num(md.max_residual())},
                            {"max_m_l1", num(md.max_m_l1())},
                            {"max_chi_sup", num(md.max_chi_sup())},
                            {"mean_variance", num(vm.mean)},
                            {"variance_std_error", num(vm.std_error)},
                            {"telescoping_defect", num(tele)},
                            {"marap_max_gap", num(ma.max_gap)},
                            {"marap_bound", num(ma.bound)},
                            {"marap_holds", ma.holds},
                            {"coboundary", cob},
                            {"scaling_value", num(md.scaling_value)}};
    if (!ma.holds) ctx.manifest.warn("marap", "bounded-sum check exceeded 2 sup|chi|");
    ctx.svg("martingale.svg", {{"||L m||_1", index_axis(md.residual.size(), static_cast<double>(lo)), md.residual, true}},
            {"Martingale residuals", "fiber", "residual", false, true, "N = " + std::to_string(md.truncation)});
    ctx.log << "martingale: N = " << md.truncation << ", max residual " << md.max_residual()
            << (cob ? ", coboundary" : "") << '\n';
    return 0;
}

int cmd_clt(context& ctx) {
    const auto& cfg = ctx.cfg;
    const long lo = cfg.window.first;
    const long n = cfg.monte_carlo.n;
    const long hi = lo + std::max({n, cfg.window.fibers + cfg.grids.n_max, cfg.monte_carlo.lil_n, cfg.grids.decay_n_max});
    auto w = make_window(ctx, lo, hi);
    const auto d = decay_at(ctx, w, lo, cfg.grids.decay_n_max);
    const auto r = operator_sigma(ctx, w, lo, static_cast<std::size_t>(cfg.window.fibers), d);
    const int dim = r.dimension;

    birkhoff_options bo;
    bo.trials = cfg.monte_carlo.trials;
    bo.n = n;
    bo.checkpoints = checkpoints_up_to(cfg.grids.n_grid, n);
    bo.threads = ctx.opt.threads;
    bo.seed = substream_seed(cfg.seed, "clt.mc");
    const auto batch = ctx.timed("birkhoff", [&] { return birkhoff(w.c, w.p, w.obs, w.eq.density(lo), lo, bo); });

    std::vector<std::string> head{"trial", "n"};
    for (int i = 0; i < dim; ++i) head.push_back("s" + std::to_string(i));
    csv_table sums(head);
    for (std::size_t c = 0; c < batch.checkpoints.size(); ++c)
        for (std::size_t t = 0; t < batch.trials; ++t) {
            std::vector<double> row{static_cast<double>(t), static_cast<double>(batch.checkpoints[c])};
            for (int i = 0; i < dim; ++i) row.push_back(batch.sum(c, t, i));
            sums.row(row);
        }
    ctx.csv("sums.csv", sums);

    csv_table clt({"n", "ks", "second_moment", "fourth_moment", "pass"});
    std::vector<double> ns, ks;
    clt_report final_rep;
    for (std::size_t c = 0; c < batch.checkpoints.size(); ++c) {
        const auto rep = clt_diagnostics(batch.column(c), batch.checkpoints[c], r.scalar(), cfg.tolerances.clt_ks);
        clt.row({static_cast<double>(batch.checkpoints[c]), rep.ks, rep.second_moment, rep.fourth_moment,
                 rep.pass ? 1.0 : 0.0});
        ns.push_back(static_cast<double>(batch.checkpoints[c]));
        ks.push_back(rep.ks);
        final_rep = rep;
    }
    ctx.csv("clt.csv", clt);
    ctx.svg("ks.svg", {{"KS distance", ns, ks, true}, {"threshold", {ns.front(), ns.back()}, {cfg.tolerances.clt_ks, cfg.tolerances.clt_ks}, false}},
            {"KS distance to N(0,1)", "n", "KS", true, false, ""});

    birkhoff_options lo_opt = bo;
    lo_opt.trials = cfg.monte_carlo.lil_trials;
    lo_opt.n = cfg.monte_carlo.lil_n;
    lo_opt.checkpoints = {lo_opt.n};
    lo_opt.keep_trajectories = true;
    lo_opt.seed = substream_seed(cfg.seed, "clt.lil");
    const auto traj = ctx.timed("lil_trajectories", [&] { return birkhoff(w.c, w.p, w.obs, w.eq.density(lo), lo, lo_opt); });
    const auto lil = lil_envelope(traj.trajectories, r.scalar(), cfg.monte_carlo.lil_epsilon);
    csv_table lt({"quarter", "violation_fraction"});
    for (std::size_t q = 0; q < lil.quarter_violation.size(); ++q)
        lt.row({static_cast<double>(q + 1), lil.quarter_violation[q]});
    ctx.csv("lil.csv", lt);

    ctx.manifest.results = {{"sigma2", num(r.scalar())},
                            {"ks", num(final_rep.ks)},
                            {"second_moment", num(final_rep.second_moment)},
                            {"fourth_moment", num(final_rep.fourth_moment)},
                            {"threshold", final_rep.threshold},
                            {"pass", final_rep.pass},
                            {"degenerate", final_rep.degenerate},
                            {"exact_arithmetic", batch.exact_arithmetic},
                            {"lil_final_quarter_violation", num(lil.final_quarter_violation)},
                            {"lil_max_excursion", num(lil.max_excursion)}};
    if (!final_rep.pass) ctx.manifest.warn("clt_threshold", "KS distance above the configured threshold");
    ctx.log << "clt: KS = " << final_rep.ks << " at n = " << n << (final_rep.pass ? " (pass)" : " (fail)") << '\n';
    return r.certified ? 0 : 2;
}

int cmd_twisted(context& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.observable.dimension() != 1) throw config_error("observable.components: twisted needs a scalar observable");
    const long lo = cfg.window.first;
    const long hi = lo + std::max({cfg.grids.twisted_trace, cfg.grids.twisted_n, cfg.grids.decay_n_max});
    auto w = make_window(ctx, lo, hi);
    twisted_options to;
    to.t_grid = cfg.grids.t_grid;
    to.rho = cfg.grids.rho;
    to.n = cfg.grids.twisted_n;
    to.n_max = cfg.grids.twisted_trace;
    to.trials = cfg.monte_carlo.twisted_trials;
    to.threads = ctx.opt.threads;
    to.seed = substream_seed(cfg.seed, "twisted.mc");
    const auto rep = ctx.timed("twisted_checks", [&] { return twisted_checks(w.eq, w.c, w.p, w.obs, lo, to); });

    csv_table t({"t", "operator_re", "operator_im", "empirical_re", "empirical_im", "abs_diff", "bv_initial", "bv_final"});
    csv_table tr({"t", "n", "bv"});
    std::vector<plot_series> plot;
    for (const auto& pt : rep.points) {
        t.row({pt.t, pt.operator_cf.real(), pt.operator_cf.imag(), pt.empirical_cf.real(), pt.empirical_cf.imag(),
               pt.abs_diff, pt.bv_initial, pt.bv_final});
        for (std::size_t n = 0; n < pt.bv_trace.size(); ++n) tr.row({pt.t, static_cast<double>(n), pt.bv_trace[n]});
        plot.push_back({"t = " + format_number(pt.t), index_axis(pt.bv_trace.size()), pt.bv_trace, false});
    }
    ctx.csv("twisted.csv", t);
    ctx.csv("twisted_trace.csv", tr);
    ctx.svg("twisted.svg", plot, {"Twisted transfer operator", "n", "||L^{it,n} 1||_BV", false, false, ""});
    ctx.manifest.results = {{"tolerance", num(rep.tolerance)},
                            {"max_abs_diff", num(rep.max_abs_diff)},
                            {"agree", rep.agree},
                            {"bounded", rep.bounded}};
    if (!rep.agree) ctx.manifest.warn("twisted_agreement", "operator and empirical characteristic functions disagree");
    if (!rep.bounded) ctx.manifest.warn("twisted_growth", "BV trace grows");
    ctx.log << "twisted: max |diff| = " << rep.max_abs_diff << " (tolerance " << rep.tolerance << ")\n";
    return 0;
}

int cmd_counterexample(context& ctx) {
    const auto& cfg = ctx.cfg;
    suspension_experiment exp;
    exp.delta = cfg.counterexample.delta;
    exp.symbol_cap = cfg.counterexample.symbol_cap;
    exp.identity_interior = cfg.counterexample.identity_interior;
    exp.seed = cfg.seed;

    blowup_options bo;
    bo.n_grid = cfg.grids.n_grid;
    bo.base_samples = cfg.counterexample.base_samples;
    bo.seed = cfg.seed;
    bo.threads = ctx.opt.threads;
    const auto b = ctx.timed("variance_blowup", [&] { return variance_blowup(exp, bo); });
    csv_table bt({"N", "mean_v", "second_moment"});
    for (std::size_t k = 0; k < b.n_grid.size(); ++k)
        bt.row({static_cast<double>(b.n_grid[k]), b.mean_v[k], b.second_moment[k]});
    ctx.csv("counterexample.csv", bt);
    ctx.svg("counterexample.svg", {{"(1/N) E (S_N psi)^2", as_double(b.n_grid), b.second_moment, false}},
            {"Variance blow-up", "N", "second moment", true, true, "slope = " + format_number(b.slope_second_moment)});

    maker_options mo;
    mo.levels = cfg.counterexample.levels;
    mo.n_grid = cfg.grids.n_grid;
    mo.base_samples = cfg.counterexample.base_samples;
    mo.seed = cfg.seed;
    mo.threads = ctx.opt.threads;
    const auto m = ctx.timed("maker_check", [&] { return maker_check(exp, mo); });
    csv_table mt({"level", "N", "mean", "std_error", "expectation"});
    json levels = json::array();
    for (const auto& l : m.levels) {
        for (std::size_t k = 0; k < m.n_grid.size(); ++k)
            mt.row({static_cast<double>(l.level), static_cast<double>(m.n_grid[k]), l.mean[k], l.std_error[k],
                    l.expectation});
        levels.push_back({{"level", l.level}, {"expectation", num(l.expectation)}, {"within_3sigma", l.within_3sigma}});
        if (!l.within_3sigma)
            ctx.manifest.warn("maker_average", "level " + std::to_string(l.level) + " average outside 3 sigma");
    }
    ctx.csv("maker.csv", mt);

    json tail = nullptr;
    int code = 0;
    try {
        const auto t = ctx.timed("tail_check", [&] { return tail_check(exp, cfg.counterexample.tail_samples); });
        csv_table tt({"bin_center", "pmf"});
        for (std::size_t k = 0; k < t.bin_center.size(); ++k) tt.row({t.bin_center[k], t.pmf[k]});
        ctx.csv("tail.csv", tt);
        tail = {{"exponent", num(t.exponent)}, {"expected", t.expected}, {"r2", num(t.r2)},
                {"samples", t.samples},        {"cutoff_visible", t.cutoff_visible}};
        if (t.cutoff_visible) ctx.manifest.warn("tail_cutoff", "covering counts reach the symbol cap");
    } catch (const certification_error& e) {
        ctx.manifest.warn("tail_non_certifiable", e.what());
        code = 2;
    }

    json report = {{"delta", exp.delta},
                   {"symbol_cap", exp.symbol_cap},
                   {"identity_interior", exp.identity_interior},
                   {"N_grid", b.n_grid},
                   {"mean_v", b.mean_v},
                   {"second_moment", b.second_moment},
                   {"slope_v", num(b.slope_v)},
                   {"slope_second_moment", num(b.slope_second_moment)},
                   {"expected_slope", 1.0 - exp.delta},
                   {"growth_factor", num(b.growth_factor)},
                   {"fraction_increasing", num(b.fraction_increasing)},
                   {"untruncated", m.untruncated},
                   {"levels", levels},
                   {"tail", tail}};
    ctx.json_file("counterexample_report.json", report);
    ctx.manifest.results = report;
    ctx.manifest.constants["slope_second_moment"] = num(b.slope_second_moment);
    ctx.log << "counterexample: slope " << b.slope_second_moment << ", growth factor " << b.growth_factor << '\n';
    return code;
}

int cmd_kestimate(context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& ks = cfg.kestimate;
    const auto c = cfg.make_cocycle();
    const auto expanding = expanding_maps(c);
    double a = ks.a;
    if (a < 0.0) {
        if (c.base().variant != base_spec::kind::iid_finite)
            throw config_error("kestimate.a: required unless the base is a finite i.i.d. law");
        a = 0.0;
        for (std::size_t s = 0; s < c.base().weights.size(); ++s) {
            const auto idx = c.map_index({static_cast<std::int64_t>(s), 0});
            if (std::find(expanding.begin(), expanding.end(), idx) != expanding.end()) a += c.base().weights[s];
        }
    }
    if (!(a > 0.0)) throw config_error("kestimate.a: no expanding map carries positive mass");

    std::vector<long> hit(ks.paths, -1);
    ctx.timed("hitting", [&] {
        parallel_for(ks.paths, ctx.opt.threads, [&](std::size_t i) {
            const auto p = c.sample_path(substream_seed(cfg.seed, "kestimate.path", i), 0, ks.n_max);
            try {
                hit[i] = k_hitting_estimate(c, p, expanding, a, ks.lambda1, ks.constant, ks.n_max).hitting_time;
            } catch (const certification_error&) {
                hit[i] = -1;
            }
        });
    });
    csv_table ht({"path", "hitting_time", "k_value"});
    std::size_t timeouts = 0;
    for (std::size_t i = 0; i < hit.size(); ++i) {
        const double k = hit[i] < 0 ? std::numeric_limits<double>::infinity()
                                    : ks.constant * std::exp(ks.lambda1 * static_cast<double>(hit[i]));
        if (hit[i] < 0) ++timeouts;
        ht.row({static_cast<double>(i), static_cast<double>(hit[i]), k});
    }
    ctx.csv("hitting.csv", ht);
    if (timeouts) ctx.manifest.warn("covering_timeout", std::to_string(timeouts) + " paths did not reach the hitting condition");

    csv_table st({"k", "survival"});
    std::vector<double> kx, ly, sx, sy;
    for (long k = 0; k <= ks.fit_k_max; ++k) {
        const auto above = std::count_if(hit.begin(), hit.end(), [&](long h) { return h < 0 || h > k; });
        const double surv = static_cast<double>(above) / static_cast<double>(hit.size());
        st.row({static_cast<double>(k), surv});
        sx.push_back(static_cast<double>(k));
        sy.push_back(surv);
        if (surv > 0.0) {
            kx.push_back(static_cast<double>(k));
            ly.push_back(std::log(surv));
        }
    }
    ctx.csv("hitting_tail.csv", st);
    json fit = nullptr;
    if (kx.size() >= 2 && kx.front() != kx.back()) {
        const auto f = least_squares(kx, ly);
        fit = {{"slope", num(f.slope)}, {"intercept", num(f.intercept)}, {"r2", num(f.r2)}, {"points", f.points}};
    } else {
        ctx.manifest.warn("hitting_tail", "too few positive survival values to fit");
    }
    ctx.svg("hitting_tail.svg", {{"P(N > k)", sx, sy, true}}, {"Hitting time tail", "k", "survival", false, true, ""});

    // quenched decay rate on consecutive fibers of one path
    const auto nf = static_cast<long>(ks.decay_fibers);
    const auto p = c.sample_path(cfg.seed, cfg.grids.n_max + 1, nf + ks.decay_n_max + 1);
    const auto eq = ctx.timed("pullback_density", [&] { return pullback_density(c, p, 0, nf + ks.decay_n_max, pull_opts(cfg)); });
    const auto tests = default_test_set(substream_seed(cfg.seed, "decay.tests"));
    std::vector<decay_estimate> fits(ks.decay_fibers);
    ctx.timed("fit_decay", [&] {
        parallel_for(fits.size(), ctx.opt.threads, [&](std::size_t j) {
            fits[j] = fit_decay(eq, c, p, static_cast<long>(j), tests, ks.decay_n_max);
        });
    });
    csv_table dt({"fiber", "rate", "prefactor"});
    std::vector<double> rates;
    for (const auto& f : fits) {
        dt.row({static_cast<double>(f.fiber), f.rate, f.prefactor});
        rates.push_back(f.rate);
    }
    ctx.csv("decay_fibers.csv", dt);
    const auto rm = sample_moments(rates);
    const double lambda = a * ks.lambda1 / 2.0;
    ctx.manifest.constants["a"] = a;
    ctx.manifest.constants["lambda"] = lambda;
    ctx.manifest.constants["lambda_prime"] = num(rm.mean);
    ctx.manifest.results = {{"paths", hit.size()},
                            {"timeouts", timeouts},
                            {"all_finite", timeouts == 0},
                            {"tail_fit", fit},
                            {"lambda_prime_mean", num(rm.mean)},
                            {"lambda_prime_std_error", num(rm.std_error)},
                            {"lambda_ratio", num(rm.mean / lambda)}};
    ctx.log << "kestimate: lambda' = " << rm.mean << " vs a lambda1 / 2 = " << lambda << '\n';
    return 0;
}

} // namespace

int run_experiment(const std::string& subcommand, const experiment_config& cfg, const run_options& opt,
                   std::ostream& log) {
    static const std::map<std::string, std::function<int(context&)>> table{
        {"validate", cmd_validate}, {"density", cmd_density},
        {"correlate", cmd_correlate}, {"variance", cmd_variance},
        {"martingale", cmd_martingale}, {"clt", cmd_clt},
        {"twisted", cmd_twisted}, {"counterexample", cmd_counterexample},
        {"kestimate", cmd_kestimate}};
    auto it = table.find(subcommand);
    if (it == table.end()) throw config_error("unknown subcommand \"" + subcommand + "\"");
    context ctx(cfg, opt, log, subcommand);
    int code = 0;
    try {
        code = it->second(ctx);
    } catch (const certification_error& e) {
        ctx.manifest.warn("certification", e.what());
        code = 2;
    }
    ctx.finish(code);
    return code;
}

} // namespace rdlab
