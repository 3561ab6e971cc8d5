// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "rdlab/config.hpp"
#include "rdlab/counterexample.hpp"
#include "rdlab/equivariant.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/experiments.hpp"
#include "rdlab/limit_theorems.hpp"
#include "rdlab/monte_carlo.hpp"
#include "rdlab/stats.hpp"
#include "rdlab/transfer.hpp"
#include "test_support.hpp"

using namespace rdlab;
using rdlab::testing::psi_half;
using rdlab::testing::random_dyadic_step;
using rdlab::testing::random_step;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t seed = 20240601;
unsigned threads = 4;

struct outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& title, double budget, const std::function<outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    outcome r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    const bool in_time = dt.count() <= budget;
    const bool ok = r.pass && in_time;
    if (!ok) ++failures;
    std::printf("[%s] %2d %-28s | %s | %.2f s (budget %g s)%s\n", ok ? "PASS" : "FAIL", id, title.c_str(),
                r.detail.c_str(), dt.count(), budget, in_time ? "" : " over budget");
    std::fflush(stdout);
}

fiber_observable scalar_obs(const step_function& f, const base_path& p, long first, long last) {
    return evaluate(observable_spec::scalar(f), p, first, last);
}

cocycle item6_cocycle() { return cocycle::iid_mix({0.5, 0.5}, {doubling_map(), buzzi_t1_map()}, seed); }

piecewise_linear_map skew() {
    return piecewise_linear_map("skew", {{0.0, 0.5, 2.0, 0.0}, {0.5, 1.0, 1.5, -0.75}});
}

outcome operator_algebra() {
    const auto one = step_function::constant(1.0);
    double err = 0.0;
    for (const auto& m : {doubling_map(), buzzi_t1_map(), identity_map()})
        err = std::max(err, sup_distance(transfer_apply(m, one), one));
    err = std::max(err, transfer_apply(doubling_map(), psi_half()).sup());
    err = std::max(err, sup_distance(transfer_apply(buzzi_t1_map(), psi_half()), psi_half()));
    return {err <= 1e-12, "max error " + fmt(err) + " (tol 1e-12)"};
}

outcome variation_axioms() {
    auto g = make_engine(seed, "acceptance.axioms");
    int violations = 0;
    const double eps = 1e-12;
    for (int k = 0; k < 1000; ++k) {
        const auto f = random_step(g, 1 + static_cast<int>(g() % 16));
        const auto h = random_step(g, 1 + static_cast<int>(g() % 16));
        const double t = 4.0 * uniform01(g) - 2.0;
        const auto pos = f.map_values([](double v) { return std::abs(v) + 0.25; });
        const double m = essinf(pos);
        const bool ok =
            std::abs((t * f).variation() - std::abs(t) * f.variation()) <= eps * (1.0 + f.variation()) &&  // V1
            (f + h).variation() <= f.variation() + h.variation() + eps &&                               // V2
            f.sup() <= c_var * f.bv() + eps &&                                                          // V3
            step_function::constant(t).variation() == 0.0 &&                                            // V5
            pos.map_values([](double v) { return 1.0 / v; }).variation() <= pos.variation() / (m * m) + eps &&  // V7
            (f * h).variation() <= f.sup() * h.variation() + h.sup() * f.variation() + eps &&           // V8
            (f * h).bv() <= c_var * f.bv() * h.bv() + eps;                                              // submultiplicative
        if (!ok) ++violations;
    }
    return {violations == 0, std::to_string(violations) + " violations on 1000 random pairs"};
}

outcome doubling_contraction() {
    auto g = make_engine(seed, "acceptance.contraction");
    const auto T = doubling_map();
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto f = k % 2 ? random_step(g, 2 + static_cast<int>(g() % 30)) : random_dyadic_step(g, 5);
        if (f.variation() == 0.0) continue;
        worst = std::max(worst, transfer_apply(T, f).variation() / f.variation());
    }
    return {worst <= 0.5 + 1e-12, "max var(Lf)/var(f) = " + fmt(worst) + " (bound 0.5)"};
}

outcome suspension_correlation() {
    int mismatches = 0;
    long max_n = 0;
    for (bool identity : {false, true}) {
        suspension_experiment exp;
        exp.identity_interior = identity;
        exp.seed = seed;
        const auto c = exp.make_cocycle();
        auto g = make_engine(seed, identity ? "acceptance.key.identity" : "acceptance.key");
        for (int k = 0; k < 500; ++k) {
            const auto s = g();
            const long nc = n_c(c.sample_path(s, 0, 0).state());
            const long n = static_cast<long>(g() % static_cast<std::uint64_t>(2 * nc + 1));
            const auto p = c.sample_path(s, 0, n + 1);
            max_n = std::max(max_n, n);
            if (operator_correlation(c, p, n) != static_cast<double>(exact_correlation(p.state(), n))) ++mismatches;
        }
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches on 1000 (state, n), max n " + std::to_string(max_n)};
}

outcome divergence() {
    suspension_experiment exp;
    exp.seed = seed;
    blowup_options opt;
    opt.seed = seed;
    opt.threads = threads;
    opt.base_samples = 1000;
    const auto r = variance_blowup(exp, opt);
    const bool ok = r.growth_factor >= 5.0 && r.slope_second_moment >= 0.35 && r.slope_second_moment <= 0.65;
    return {ok, "factor " + fmt(r.growth_factor) + " (>= 5), slope " + fmt(r.slope_second_moment) +
                    " in [0.35, 0.65], " + std::to_string(opt.base_samples) + " bases"};
}

struct item6_state {
    cocycle c = item6_cocycle();
    base_path p;
    equivariant_data eq;
    fiber_observable obs;
    decay_estimate decay;
    sigma_squared_result sigma;
};

item6_state& item6() {
    static item6_state s = [] {
        item6_state x;
        const long n = 10'000;
        x.p = x.c.sample_path(seed, 260, n + 260);
        x.eq = pullback_density(x.c, x.p, 0, n + 220);
        x.obs = center(scalar_obs(psi_half(), x.p, 0, n + 220), x.eq);
        x.decay = fit_decay(x.eq, x.c, x.p, 0, default_test_set(seed), 40);
        sigma_squared_options so;
        so.threads = threads;
        x.sigma = sigma_squared(x.eq, x.c, x.p, x.obs, 0, static_cast<std::size_t>(n), x.decay, so);
        return x;
    }();
    return s;
}

outcome green_kubo() {
    auto& s = item6();
    birkhoff_options bo;
    bo.trials = 10'000;
    bo.n = 10'000;
    bo.threads = threads;
    bo.seed = substream_seed(seed, "acceptance.gk");
    const auto batch = birkhoff(s.c, s.p, s.obs, s.eq.density(0), 0, bo);
    const auto vg = variance_growth(batch);
    const double op = s.sigma.scalar();
    const double rel = std::abs(vg.back().value - op) / op;
    return {rel <= 0.05 && s.sigma.certified,
            "operator " + fmt(op) + " +- " + fmt(s.sigma.std_error[0]) + ", Monte Carlo " + fmt(vg.back().value) +
                " +- " + fmt(vg.back().std_error) + ", rel " + fmt(rel) + " (<= 0.05)"};
}

outcome martingale_property() {
    martingale_options mo;
    mo.tol = 1e-9;
    mo.threads = threads;
    double worst = 0.0;
    std::string trunc;
    // psi on the item-6 mix, then a non-dyadic observable on a mix with a non-Lebesgue density
    for (int which = 0; which < 2; ++which) {
        const auto c = which == 0 ? item6_cocycle() : cocycle::iid_mix({0.5, 0.5}, {doubling_map(), skew()}, seed);
        const auto p = c.sample_path(seed, 700, 400);
        const auto eq = pullback_density(c, p, -400, 300);
        const auto f = which == 0 ? psi_half() : step_function::indicator(0.0, 1.0 / 3.0);
        const auto obs = center(scalar_obs(f, p, -400, 300), eq);
        const auto dec = fit_decay(eq, c, p, 0, default_test_set(seed), 40);
        const auto md = martingale_decompose(eq, c, p, obs, 0, 99, dec, mo);
        worst = std::max(worst, md.max_residual());
        trunc += (which ? ", " : "") + std::to_string(md.truncation);
    }
    return {worst <= 1e-8, "max ||L m||_1 = " + fmt(worst) + " (<= 1e-8) on 2 x 100 fibers, N = " + trunc};
}

outcome coboundary() {
    const auto c = cocycle::single(doubling_map(), seed);
    const auto p = c.sample_path(seed, 600, 400);
    const auto eq = pullback_density(c, p, -300, 350);
    const auto r = step_function::from_pieces({0.11, 0.23, 0.37, 0.41, 0.58, 0.66, 0.83},
                                              {0.4, -1.0, 0.7, 0.2, -0.3, 1.1, -0.6, 0.5});
    const auto obs = coboundary_observable(c, p, r, -300, 350);
    const auto dec = fit_decay(eq, c, p, 0, default_test_set(seed), 40);
    sigma_squared_options so;
    so.n_max = 120;
    const auto s2 = sigma_squared(eq, c, p, obs, 0, 100, dec, so);
    const auto md = martingale_decompose(eq, c, p, obs, 0, 99, dec);
    const double item6_s2 = item6().sigma.scalar();
    const bool ok = std::abs(s2.scalar()) <= 1e-6 && md.max_m_l1() <= 1e-6 && item6_s2 >= 0.1;
    return {ok, "coboundary Sigma^2 " + fmt(s2.scalar()) + ", sup ||m||_1 " + fmt(md.max_m_l1()) + "; item-6 Sigma^2 " +
                    fmt(item6_s2)};
}

outcome clt() {
    auto& s = item6();
    birkhoff_options bo;
    bo.trials = 10'000;
    bo.n = 10'000;
    bo.threads = threads;
    bo.seed = substream_seed(seed, "acceptance.clt");
    const auto batch = birkhoff(s.c, s.p, s.obs, s.eq.density(0), 0, bo);
    const auto rep = clt_diagnostics(batch.column(0), bo.n, s.sigma.scalar(), 0.03);
    return {rep.pass, "KS " + fmt(rep.ks) + " (<= 0.03), E z^2 " + fmt(rep.second_moment) + ", E z^4 " +
                          fmt(rep.fourth_moment)};
}

outcome twisted() {
    auto& s = item6();
    twisted_options to;
    to.trials = 100'000;
    to.threads = threads;
    to.seed = substream_seed(seed, "acceptance.twisted");
    const auto r = twisted_checks(s.eq, s.c, s.p, s.obs, 0, to);
    double growth = 0.0;
    for (const auto& pt : r.points) growth = std::max(growth, pt.bv_final / pt.bv_initial);
    return {r.agree && r.bounded, "max |cf diff| " + fmt(r.max_abs_diff) + " (<= " + fmt(r.tolerance) +
                                      "), max final/initial BV " + fmt(growth) + " (<= 2)"};
}

outcome hitting_times() {
    auto cfg = parse_config(nlohmann::json{{"seed", seed},
                                           {"base", {{"kind", "iid"}, {"weights", {0.5, 0.5}}}},
                                           {"maps", {"doubling", "identity"}}});
    const auto dir = fs::temp_directory_path() / "rdlab_acceptance_hitting";
    fs::remove_all(dir);
    std::ostringstream log;
    run_experiment("kestimate", cfg, {dir, threads, output_format::json}, log);
    std::ifstream in(dir / "manifest.json");
    const auto m = nlohmann::json::parse(in);
    const auto& r = m["results"];
    if (r["tail_fit"].is_null()) return {false, "no tail fit"};
    const double slope = r["tail_fit"]["slope"];
    const double r2 = r["tail_fit"]["r2"];
    const double ratio = r["lambda_ratio"];
    const bool finite = r["all_finite"];
    const bool ok = slope <= -0.05 && r2 >= 0.95 && finite && ratio >= 0.5 && ratio <= 2.0;
    return {ok, "tail slope " + fmt(slope) + " (<= -0.05), R^2 " + fmt(r2) + " (>= 0.95), K finite " +
                    (finite ? "yes" : "no") + ", lambda'/(a log2 / 2) = " + fmt(ratio) + " in [0.5, 2]"};
}

outcome tail_exponents() {
    std::string detail;
    bool ok = true;
    for (double delta : {0.5, 1.0}) {
        suspension_experiment exp;
        exp.delta = delta;
        exp.seed = seed;
        const auto t = tail_check(exp, 100'000);
        ok = ok && std::abs(t.exponent - t.expected) <= 0.15;
        detail += (detail.empty() ? "" : ", ") + std::string("delta ") + fmt(delta) + ": " + fmt(t.exponent) + " vs " +
                  fmt(t.expected);
    }
    return {ok, detail + " (+- 0.15)"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

outcome reproducibility() {
    using nlohmann::json;
    const json mix{{"seed", seed},
                   {"base", {{"kind", "iid"}, {"weights", {0.5, 0.5}}}},
                   {"maps", {"doubling", "buzzi_t1"}},
                   {"window", {{"fibers", 1000}}},
                   {"monte_carlo", {{"trials", 2000}, {"n", 2000}, {"lil_trials", 50}, {"lil_n", 2000}, {"twisted_trials", 10000}}}};
    json appb{{"seed", seed},
              {"base", {{"kind", "iid"}, {"weights", {0.5, 0.5}}}},
              {"maps", {"doubling", "identity"}},
              {"kestimate", {{"paths", 2000}}}};
    json appa{{"seed", seed}, {"base", {{"kind", "suspension"}, {"delta", 0.5}}}};
    const std::vector<std::pair<std::string, json>> runs{
        {"density", mix}, {"correlate", mix},      {"variance", mix}, {"martingale", mix},
        {"clt", mix},     {"twisted", mix},        {"kestimate", appb}, {"counterexample", appa}};
    const auto root = fs::temp_directory_path() / "rdlab_acceptance_repro";
    fs::remove_all(root);
    std::size_t files = 0, differ = 0;
    std::ostringstream log;
    for (const auto& [sub, doc] : runs) {
        const auto cfg = parse_config(doc);
        const auto a = root / (sub + "_1");
        const auto b = root / (sub + "_4");
        run_experiment(sub, cfg, {a, 1, output_format::both}, log);
        run_experiment(sub, cfg, {b, 4, output_format::both}, log);
        for (const auto& e : fs::directory_iterator(a)) {
            if (e.path().extension() != ".csv") continue;
            ++files;
            if (slurp(e.path()) != slurp(b / e.path().filename())) ++differ;
        }
    }
    return {differ == 0 && files > 0, std::to_string(files) + " CSVs over " + std::to_string(runs.size()) +
                                          " subcommands, threads 1 vs 4, " + std::to_string(differ) + " differ"};
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) threads = static_cast<unsigned>(std::max(1, std::atoi(argv[1])));
    std::printf("acceptance suite, seed %llu, %u threads\n", static_cast<unsigned long long>(seed), threads);
    criterion(1, "exact operator algebra", 1, operator_algebra);
    criterion(2, "variation axioms", 5, variation_axioms);
    criterion(3, "doubling contraction", 5, doubling_contraction);
    criterion(4, "exact suspension correlation", 30, suspension_correlation);
    criterion(5, "variance divergence", 300, divergence);
    criterion(6, "Green-Kubo consistency", 300, green_kubo);
    criterion(7, "martingale property", 120, martingale_property);
    criterion(8, "coboundary dichotomy", 60, coboundary);
    criterion(9, "CLT diagnostic", 300, clt);
    criterion(10, "twisted consistency", 180, twisted);
    criterion(11, "hitting times and decay", 120, hitting_times);
    criterion(12, "covering-count tail", 60, tail_exponents);
    criterion(13, "reproducibility", 600, reproducibility);
    std::printf("%d of 13 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
