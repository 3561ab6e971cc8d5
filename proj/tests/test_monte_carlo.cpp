#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "rdlab/monte_carlo.hpp"
#include "rdlab/stats.hpp"
#include "test_support.hpp"

using namespace rdlab;
using rdlab::testing::psi_half;

namespace {

fiber_observable scalar_obs(const step_function& f, const base_path& p, long first, long last) {
    return evaluate(observable_spec::scalar(f), p, first, last);
}

piecewise_linear_map skew() {
    return piecewise_linear_map("skew", {{0.0, 0.5, 2.0, 0.0}, {0.5, 1.0, 1.5, -0.75}});
}

} // namespace

TEST_CASE("sampling mu") {
    auto u = sample_mu(step_function::constant(1.0), 20'000, 1);
    CHECK(ks_distance(u, [](double x) { return std::clamp(x, 0.0, 1.0); }) <= ks_critical_95(u.size()));

    auto half = sample_mu(step_function::indicator(0.0, 0.5, 2.0), 10'000, 2);
    CHECK(std::all_of(half.begin(), half.end(), [](double x) { return x < 0.5; }));

    auto v = step_function::from_pieces({0.25}, {2.5, 0.5});
    auto w = sample_mu(v, 20'000, 3);
    auto cdf = [](double x) { return x < 0.25 ? 2.5 * x : 0.625 + 0.5 * (x - 0.25); };
    CHECK(ks_distance(w, cdf) <= ks_critical_95(w.size()));
    CHECK(sample_mu(v, 100, 3) == std::vector<double>(w.begin(), w.begin() + 100));
}

TEST_CASE("Birkhoff sums at explicit points") {
    auto c = cocycle::single(doubling_map());
    auto p = c.sample_path(1, 0, 20);
    auto obs = scalar_obs(psi_half(), p, 0, 20);
    const std::vector<double> x{1.0 / 7.0};
    CHECK(birkhoff_points(c, p, obs, 0, x, 3)[0] == 1.0);

    auto zero = scalar_obs(step_function::constant(0.0), p, 0, 20);
    birkhoff_options bo;
    bo.trials = 100;
    bo.n = 20;
    auto b = birkhoff(c, p, zero, step_function::constant(1.0), 0, bo);
    for (double s : b.sums) CHECK(s == 0.0);

    // below the roof top only T1 acts, which preserves both halves
    auto sc = cocycle::suspension(0.5, buzzi_t1_map(), doubling_map(), 0, 1000);
    std::vector<base_state> states;
    for (long i = 0; i < 50; ++i) states.push_back({50, i});
    auto sp = base_path::from_states(0, states, true);
    auto so = scalar_obs(psi_half(), sp, 0, 49);
    auto g = make_engine(5, "test.points");
    std::vector<double> pts;
    for (int k = 0; k < 100; ++k) pts.push_back(uniform01(g));
    auto s = birkhoff_points(sc, sp, so, 0, pts, 49);
    for (std::size_t k = 0; k < pts.size(); ++k) CHECK(s[k] == 49.0 * psi_half()(pts[k]));
}

TEST_CASE("Birkhoff sums are deterministic across thread counts") {
    auto c = cocycle::iid_mix({0.5, 0.5}, {doubling_map(), buzzi_t1_map()}, 4);
    auto p = c.sample_path(4, 0, 600);
    auto obs = scalar_obs(psi_half(), p, 0, 600);
    birkhoff_options bo;
    bo.trials = 3000;
    bo.n = 500;
    bo.checkpoints = {10, 100, 500};
    bo.seed = 17;
    bo.threads = 1;
    auto one = birkhoff(c, p, obs, step_function::constant(1.0), 0, bo);
    CHECK(one.exact_arithmetic);
    for (unsigned t : {2u, 3u, 8u}) {
        bo.threads = t;
        CHECK(birkhoff(c, p, obs, step_function::constant(1.0), 0, bo).sums == one.sums);
    }
    bo.force_double = true;
    bo.keep_trajectories = true;
    bo.trials = 200;
    auto d = birkhoff(c, p, obs, step_function::constant(1.0), 0, bo);
    CHECK_FALSE(d.exact_arithmetic);
    for (std::size_t t = 0; t < 200; ++t) {
        const auto& tr = d.trajectories[t];
        REQUIRE(tr.size() == 500);
        CHECK(tr.back() == d.sum(2, t));
        CHECK(tr[99] == d.sum(1, t));
        for (std::size_t k = 1; k < tr.size(); ++k) CHECK(std::abs(tr[k] - tr[k - 1]) == 1.0);
    }
}

TEST_CASE("empirical means match pushed-forward densities") {
    auto c = cocycle::single(skew());
    auto p = c.sample_path(2, 250, 20);
    auto eq = pullback_density(c, p, 0, 10);
    auto phi = step_function::indicator(0.0, 0.3);
    auto obs = scalar_obs(phi, p, 0, 10);
    birkhoff_options bo;
    bo.trials = 100'000;
    bo.n = 6;
    bo.checkpoints = {5, 6};
    bo.threads = 4;
    bo.seed = 8;
    auto b = birkhoff(c, p, obs, eq.density(0), 0, bo);
    std::vector<double> inc(bo.trials);
    for (std::size_t t = 0; t < bo.trials; ++t) inc[t] = b.sum(1, t) - b.sum(0, t);
    const auto m = sample_moments(inc);
    const double expected = (phi * eq.density(5)).integral();
    CHECK(std::abs(m.mean - expected) <= 5 * m.std_error);
}

TEST_CASE("variance growth") {
    auto c = cocycle::single(doubling_map());
    auto p = c.sample_path(1, 0, 1100);
    auto obs = scalar_obs(psi_half(), p, 0, 1100);
    birkhoff_options bo;
    bo.trials = 5000;
    bo.n = 1000;
    bo.checkpoints = {10, 100, 1000};
    bo.threads = 4;
    auto vg = variance_growth(birkhoff(c, p, obs, step_function::constant(1.0), 0, bo));
    for (const auto& v : vg) CHECK(std::abs(v.value - 1.0) <= 4 * v.std_error);

    auto r = step_function::from_pieces({0.3, 0.6}, {1.0, -0.5, 0.25});
    auto cob = coboundary_observable(c, p, r, 0, 1100);
    auto vc = variance_growth(birkhoff(c, p, cob, step_function::constant(1.0), 0, bo));
    CHECK(vc[2].value <= vc[0].value / 20.0);
    CHECK(vc[2].value * 1000.0 <= 4.0 * 1.5 * 1.5);

    bo.trials = 10;
    CHECK_THROWS_AS(variance_growth(birkhoff(c, p, obs, step_function::constant(1.0), 0, bo)), config_error);
}

TEST_CASE("central limit diagnostics") {
    auto c = cocycle::single(doubling_map());
    auto p = c.sample_path(1, 0, 10'000);
    auto obs = scalar_obs(psi_half(), p, 0, 10'000);
    birkhoff_options bo;
    bo.trials = 10'000;
    bo.n = 10'000;
    bo.threads = 8;
    bo.seed = 21;
    auto b = birkhoff(c, p, obs, step_function::constant(1.0), 0, bo);
    auto rep = clt_diagnostics(b.column(0), bo.n, 1.0);
    CHECK(rep.pass);
    CHECK(rep.ks <= 0.03);
    CHECK(rep.second_moment == doctest::Approx(1.0).epsilon(0.05));
    CHECK(rep.fourth_moment == doctest::Approx(3.0).epsilon(0.1));

    std::vector<double> zeros(1000, 0.0);
    auto z = clt_diagnostics(zeros, 100, 1.0);
    CHECK(z.degenerate);
    CHECK(z.ks >= 0.49);
    CHECK_FALSE(z.pass);
}

TEST_CASE("law of the iterated logarithm envelope") {
    auto c = cocycle::single(doubling_map());
    auto p = c.sample_path(1, 0, 20'000);
    auto obs = scalar_obs(psi_half(), p, 0, 20'000);
    birkhoff_options bo;
    bo.trials = 200;
    bo.n = 20'000;
    bo.keep_trajectories = true;
    bo.threads = 4;
    bo.seed = 5;
    auto b = birkhoff(c, p, obs, step_function::constant(1.0), 0, bo);
    auto rep = lil_envelope(b.trajectories, 1.0);
    CHECK(rep.final_quarter_violation <= 0.05);
    CHECK(rep.quarter_violation.size() == 4);
    CHECK(lil_envelope(b.trajectories, 1.0, 10.0).final_quarter_violation == 0.0);

    auto r = step_function::from_pieces({0.3}, {1.0, -1.0});
    auto cob = coboundary_observable(c, p, r, 0, 20'000);
    auto bc = birkhoff(c, p, cob, step_function::constant(1.0), 0, bo);
    auto rc = lil_envelope(bc.trajectories, 1.0);
    CHECK(rc.final_quarter_violation == 0.0);
    CHECK(rc.max_excursion <= 2.0 / std::sqrt(2.0 * 15'000 * std::log(std::log(15'000.0))));
}
