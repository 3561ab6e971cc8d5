#include "doctest.h"

#include <cmath>

#include "rdlab/counterexample.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/limit_theorems.hpp"
#include "rdlab/monte_carlo.hpp"
#include "rdlab/stats.hpp"
#include "rdlab/transfer.hpp"
#include "test_support.hpp"

using namespace rdlab;
using rdlab::testing::psi_half;
using rdlab::testing::random_step;

namespace {

struct setup {
    cocycle c;
    base_path p;
    equivariant_data eq;
};

setup make(cocycle c, long back, long fwd, long first, long last, std::uint64_t seed = 1) {
    auto p = c.sample_path(seed, back, fwd);
    auto eq = pullback_density(c, p, first, last);
    return {std::move(c), std::move(p), std::move(eq)};
}

fiber_observable scalar_obs(const step_function& f, const base_path& p, long first, long last) {
    return evaluate(observable_spec::scalar(f), p, first, last);
}

// 8-piece step function with non-dyadic breakpoints.
step_function eight_piece() {
    return step_function::from_pieces({0.11, 0.23, 0.37, 0.41, 0.58, 0.66, 0.83},
                                      {0.4, -1.0, 0.7, 0.2, -0.3, 1.1, -0.6, 0.5});
}

// centered 1_[0,1/3) for Lebesgue fibers
step_function third() { return step_function::from_pieces({1.0 / 3.0}, {2.0 / 3.0, -1.0 / 3.0}); }

} // namespace

TEST_CASE("centering") {
    auto s = make(cocycle::single(doubling_map()), 250, 20, 0, 10);
    auto raw = scalar_obs(step_function::indicator(0.0, 0.5, 2.0), s.p, 0, 10);
    auto cen = center(raw, s.eq);
    CHECK(sup_distance(cen.at(3), psi_half()) <= 1e-15);
    auto again = center(cen, s.eq);
    CHECK(again.at(3).values() == cen.at(3).values());
    auto cst = center(scalar_obs(step_function::constant(0.7), s.p, 0, 10), s.eq);
    CHECK(cst.at(0).sup() <= 1e-15);
    CHECK(max_centering_error(cen, s.eq) <= 1e-15);

    auto skew = piecewise_linear_map("skew", {{0.0, 0.5, 2.0, 0.0}, {0.5, 1.0, 1.5, -0.75}});
    auto k = make(cocycle::single(skew), 250, 20, 0, 10);
    auto kc = center(scalar_obs(third(), k.p, 0, 10), k.eq);
    CHECK(max_centering_error(kc, k.eq) <= 1e-10);
}

TEST_CASE("correlations: doubling, suspension, constants") {
    auto s = make(cocycle::single(doubling_map()), 250, 40, 0, 30);
    auto obs = scalar_obs(psi_half(), s.p, 0, 30);
    auto t = correlations(s.eq, s.c, s.p, obs, 0, 20);
    CHECK(t.scalar(0) == 1.0);
    for (long n = 1; n <= 20; ++n) CHECK(t.scalar(n) == 0.0);
    REQUIRE(t.terminated_at);
    CHECK(*t.terminated_at == 1);

    auto two = evaluate(observable_spec{{psi_half(), step_function::constant(1.0)}, {}, false}, s.p, 0, 30);
    auto t2 = correlations(s.eq, s.c, s.p, center(two, s.eq), 0, 10);
    for (long n = 0; n <= 10; ++n) {
        CHECK(t2.c[n][1] == 0.0);
        CHECK(t2.c[n][2] == 0.0);
        CHECK(t2.c[n][3] == 0.0);
    }

    suspension_experiment exp;
    exp.seed = 4;
    exp.symbol_cap = 1000;
    auto sc = exp.make_cocycle();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto p = sc.sample_path(seed, 250, 1200);
        auto eq = pullback_density(sc, p, 0, 1100);
        auto o = scalar_obs(psi_half(), p, 0, 1100);
        auto tab = correlations(eq, sc, p, o, 0, 1000);
        const long nc = n_c(p.state());
        for (long n = 0; n <= 1000; ++n) CHECK(tab.scalar(n) == (n < nc ? 1.0 : 0.0));
    }
}

TEST_CASE("Green-Kubo variance for doubling and the coboundary") {
    auto s = make(cocycle::single(doubling_map()), 250, 300, 0, 260);
    const auto tests = default_test_set(3);
    auto dec = fit_decay(s.eq, s.c, s.p, 0, tests, 40);
    auto obs = scalar_obs(psi_half(), s.p, 0, 260);
    auto r = sigma_squared(s.eq, s.c, s.p, obs, 0, 50, dec, {60});
    CHECK(r.scalar() == 1.0);
    CHECK(r.certified);

    // brute force: empirical variance of S_n / sqrt(n)
    birkhoff_options bo;
    bo.trials = 20'000;
    bo.n = 200;
    bo.seed = 3;
    bo.threads = 4;
    auto batch = birkhoff(s.c, s.p, obs, s.eq.density(0), 0, bo);
    auto vg = variance_growth(batch);
    CHECK(std::abs(vg[0].value - 1.0) <= 3 * vg[0].std_error);

    auto cob = coboundary_observable(s.c, s.p, eight_piece(), 0, 260);
    sigma_squared_options so;
    so.n_max = 120;
    auto rc = sigma_squared(s.eq, s.c, s.p, cob, 0, 50, dec, so);
    CHECK(std::abs(rc.scalar()) <= 1e-6);
}

TEST_CASE("two perfectly correlated components give a rank-one matrix") {
    auto c = cocycle::iid_mix({0.5, 0.5}, {doubling_map(), buzzi_t1_map()}, 2);
    auto s = make(c, 250, 300, 0, 260);
    auto obs = evaluate(observable_spec{{psi_half(), psi_half()}, {}, true}, s.p, 0, 260);
    auto dec = fit_decay(s.eq, s.c, s.p, 0, default_test_set(3), 40);
    auto r = sigma_squared(s.eq, s.c, s.p, obs, 0, 100, dec, {100});
    CHECK(r.value[1] == doctest::Approx(r.value[0]));
    CHECK(r.value[1] == r.value[2]);
    CHECK(std::abs(r.eigenvalues[0]) <= 1e-8);
    CHECK(r.psd);
    CHECK(r.value[0] >= 0.1);
}

TEST_CASE("suspension series is not certifiable") {
    suspension_experiment exp;
    exp.seed = 8;
    exp.symbol_cap = 100'000;
    auto c = exp.make_cocycle();
    std::vector<base_state> states(250, base_state{1, 0});
    for (long i = 0; i < 400; ++i) states.push_back({400, i});
    states.resize(250 + 800, base_state{1, 0});
    auto p = base_path::from_states(-250, states, true);
    auto eq = pullback_density(c, p, 0, 500);
    auto obs = scalar_obs(psi_half(), p, 0, 500);
    auto dec = fit_decay(eq, c, p, 0, default_test_set(3), 40);
    auto r = sigma_squared(eq, c, p, obs, 0, 300, dec, {150});
    CHECK_FALSE(r.certified);
    CHECK(r.uncertified_fibers > 0);
    CHECK(r.diagnostic.find("not certifiable") != std::string::npos);

    // decay fitted among short roofs does not carry over to a tall one later on
    std::vector<base_state> mixed(250, base_state{1, 0});
    for (long k = 0; k < 60; ++k) mixed.push_back({1, 0});
    for (long i = 0; i < 400; ++i) mixed.push_back({400, i});
    mixed.resize(250 + 900, base_state{1, 0});
    auto q = base_path::from_states(-250, mixed, true);
    auto eq2 = pullback_density(c, q, 0, 600);
    auto obs2 = scalar_obs(psi_half(), q, 0, 600);
    auto dec2 = fit_decay(eq2, c, q, 0, default_test_set(3), 40);
    REQUIRE(dec2.mixing);
    auto short_only = sigma_squared(eq2, c, q, obs2, 0, 40, dec2, {150});
    CHECK(short_only.certified);
    auto with_tall = sigma_squared(eq2, c, q, obs2, 0, 200, dec2, {150});
    CHECK_FALSE(with_tall.certified);
}

TEST_CASE("martingale decomposition: exact annihilation and coboundary") {
    auto s = make(cocycle::single(doubling_map()), 400, 300, -100, 260);
    auto dec = fit_decay(s.eq, s.c, s.p, 0, default_test_set(3), 40);
    auto obs = scalar_obs(psi_half(), s.p, -100, 260);
    auto md = martingale_decompose(s.eq, s.c, s.p, obs, 0, 20, dec);
    for (long j = 0; j <= 20; ++j) {
        CHECK(md.chi_at(j).is_zero());
        CHECK(sup_distance(md.m_at(j), psi_half()) == 0.0);
    }
    CHECK(md.max_residual() == 0.0);
    auto var = martingale_variances(md, s.eq, 0, 20);
    for (double v : var) CHECK(v == 1.0);

    auto cob = coboundary_observable(s.c, s.p, eight_piece(), -100, 260);
    auto mc = martingale_decompose(s.eq, s.c, s.p, cob, 0, 20, dec);
    CHECK(mc.max_m_l1() <= 1e-6);
    for (double v : martingale_variances(mc, s.eq, 0, 20)) CHECK(v <= 1e-12);
    auto rc = sigma_squared(s.eq, s.c, s.p, coboundary_observable(s.c, s.p, eight_piece(), 0, 260), 0, 30, dec, {120});
    CHECK(is_coboundary(rc.scalar(), mc.max_m_l1()));
    CHECK_FALSE(is_coboundary(1.0, md.max_m_l1()));

    auto g = make_engine(4, "test.marap");
    std::vector<double> pts;
    for (int k = 0; k < 200; ++k) pts.push_back(uniform01(g));
    auto ma = marap_check(mc, s.c, s.p, cob, 0, pts, 20);
    CHECK(ma.holds);
    CHECK(ma.bound > 0.0);
}

TEST_CASE("martingale decomposition on a non-Lebesgue mix") {
    auto skew = piecewise_linear_map("skew", {{0.0, 0.5, 2.0, 0.0}, {0.5, 1.0, 1.5, -0.75}});
    auto c = cocycle::iid_mix({0.5, 0.5}, {doubling_map(), skew}, 6);
    auto s = make(c, 600, 200, -300, 150);
    auto obs = center(scalar_obs(third(), s.p, -300, 150), s.eq);
    CHECK(max_centering_error(obs, s.eq) <= 1e-10);
    auto dec = fit_decay(s.eq, s.c, s.p, 0, default_test_set(3), 40);
    REQUIRE(dec.mixing);
    martingale_options mo;
    mo.tol = 1e-9;
    auto md = martingale_decompose(s.eq, s.c, s.p, obs, 0, 40, dec, mo);
    CHECK(md.max_residual() <= 10 * mo.tol);
    CHECK(md.k_tilde >= 1.0);
    for (long n : {1L, 2L, 4L, 6L}) CHECK(telescoping_defect(md, s.c, s.p, obs, 3, n) <= 1e-9);

    auto var = martingale_variances(md, s.eq, 0, 40);
    for (double v : var) CHECK(v > 0.0);
}

TEST_CASE("martingale variances average to sigma squared") {
    auto c = cocycle::iid_mix({0.5, 0.5}, {doubling_map(), buzzi_t1_map()}, 12);
    auto s = make(c, 400, 1300, -100, 1250);
    auto obs = scalar_obs(psi_half(), s.p, -100, 1250);
    auto dec = fit_decay(s.eq, s.c, s.p, 0, default_test_set(3), 40);
    auto md = martingale_decompose(s.eq, s.c, s.p, obs, 0, 999, dec);
    auto var = martingale_variances(md, s.eq, 0, 999);
    const auto m = sample_moments(var);
    auto r = sigma_squared(s.eq, s.c, s.p, obs, 0, 1000, dec, {200});
    const double se = std::hypot(m.std_error, r.std_error[0]);
    CHECK(std::abs(m.mean - r.scalar()) <= 3 * se);
    CHECK(md.max_residual() <= 1e-12);
}

TEST_CASE("martingale errors") {
    auto s = make(cocycle::single(identity_map()), 300, 100, -20, 60);
    auto obs = scalar_obs(psi_half(), s.p, -20, 60);
    auto dec = fit_decay(s.eq, s.c, s.p, 0, default_test_set(3), 20);
    CHECK_THROWS_AS(martingale_decompose(s.eq, s.c, s.p, obs, 0, 10, dec), certification_error);
}

TEST_CASE("twisted operators") {
    auto s = make(cocycle::single(doubling_map()), 250, 320, 0, 300);
    auto obs = scalar_obs(psi_half(), s.p, 0, 300);
    CHECK(characteristic_function(s.eq, s.c, s.p, obs, 0, 50, 0.0) == std::complex<double>(1.0, 0.0));
    for (double v : twisted_bv_trace(s.eq, s.c, s.p, obs, 0, 30, 0.0)) CHECK(v == 1.0);
    for (double t : {0.05, 0.1, 0.7}) {
        auto cf = characteristic_function(s.eq, s.c, s.p, obs, 0, 1, t);
        CHECK(std::abs(cf - std::complex<double>(std::cos(t), 0.0)) <= 1e-15);
    }

    auto mix = cocycle::iid_mix({0.5, 0.5}, {doubling_map(), buzzi_t1_map()}, 3);
    auto m = make(mix, 250, 320, 0, 300);
    auto mobs = scalar_obs(psi_half(), m.p, 0, 300);
    twisted_options opt;
    opt.trials = 20'000;
    opt.threads = 4;
    opt.seed = 9;
    auto rep = twisted_checks(m.eq, mix, m.p, mobs, 0, opt);
    CHECK(rep.agree);
    CHECK(rep.bounded);
    opt.t_grid = {0.5};
    CHECK_THROWS_AS(twisted_checks(m.eq, mix, m.p, mobs, 0, opt), config_error);
}

TEST_CASE("decorrelation of block characteristic functions") {
    auto s = make(cocycle::single(doubling_map()), 250, 120, 0, 100);
    auto obs = scalar_obs(psi_half(), s.p, 0, 100);
    decorrelation_options opt;
    auto r = decorrelation_check(s.eq, s.c, s.p, obs, 0, opt);
    for (double d : r.difference) CHECK(d <= 1e-15);
    CHECK(r.instant);

    opt.t_left = {0.0, 0.0};
    opt.t_right = {0.0, 0.0};
    auto mix = cocycle::iid_mix({0.5, 0.5}, {doubling_map(), identity_map()}, 5);
    auto m = make(mix, 250, 120, 0, 100);
    auto third_obs = scalar_obs(third(), m.p, 0, 100);
    auto z = decorrelation_check(m.eq, mix, m.p, third_obs, 0, opt);
    for (double d : z.difference) CHECK(d == 0.0);

    decorrelation_options live;
    auto dm = decorrelation_check(m.eq, mix, m.p, third_obs, 0, live);
    CHECK(dm.rate > 0.0);
    auto dec = fit_decay(m.eq, mix, m.p, 0, default_test_set(3), 80);
    CHECK(dm.rate >= dec.rate / 2.0);
    CHECK(dm.rate <= dec.rate * 2.0);
}

TEST_CASE("covariance decay") {
    auto s = make(cocycle::single(doubling_map()), 250, 120, 0, 100);
    auto obs = scalar_obs(psi_half(), s.p, 0, 100);
    const std::vector<double> v{1.0};
    auto r = covariance_decay_check(s.eq, s.c, s.p, obs, v, {0, 5, 10}, {0, 1, 2, 5, 10});
    for (std::size_t i = 0; i < r.cov.size(); ++i) CHECK(r.cov[i] == (r.k_grid[i % 5] == 0 ? 1.0 : 0.0));
    CHECK(r.uniform_rate);

    suspension_experiment exp;
    exp.seed = 2;
    exp.symbol_cap = 1000;
    auto sc = exp.make_cocycle();
    // a window starting deep inside a tall roof
    std::vector<base_state> states;
    for (long i = 0; i < 60; ++i) states.push_back({60, i});
    for (long i = 0; i < 200; ++i) states.push_back({1, 0});
    auto q = base_path::from_states(-250, [&] {
        std::vector<base_state> all(250, base_state{1, 0});
        all.insert(all.end(), states.begin(), states.end());
        return all;
    }(), true);
    auto eq = pullback_density(sc, q, 0, 150);
    auto so = scalar_obs(psi_half(), q, 0, 150);
    auto rs = covariance_decay_check(eq, sc, q, so, v, {0, 10}, {0, 1, 5, 20, 40});
    CHECK(rs.cov[3] == 1.0);
    CHECK_FALSE(rs.uniform_rate);
    for (std::size_t i = 0; i < rs.cov.size(); i += 5) CHECK(rs.cov[i] >= 0.0);
}
