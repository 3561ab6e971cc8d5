#include "doctest.h"

#include <cmath>

#include "rdlab/counterexample.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/rng.hpp"

using namespace rdlab;

namespace {

// (1/N) int (S_N psi)^2 dm from the correlation table, summed pair by pair.
double brute_second_moment(const base_path& p, long n) {
    double total = 0.0;
    for (long a = 0; a < n; ++a)
        for (long b = 0; b < n; ++b) {
            const long lo = std::min(a, b);
            total += exact_correlation(p.at(lo), std::abs(a - b));
        }
    return total / static_cast<double>(n);
}

// int min(n_c, M) dP: n_c is uniform on 1..h given h, and h is length biased.
double truncated_mean_oracle(double delta, long cap, long level) {
    double num = 0.0, den = 0.0;
    for (long h = cap; h >= 1; --h) {
        const double q = std::pow(static_cast<double>(h), -(2.0 + delta));
        const double m = static_cast<double>(std::min(h, level));
        const double inner = m * (m + 1) / 2.0 + static_cast<double>(level) * static_cast<double>(h - std::min(h, level));
        num += q * inner;
        den += q * static_cast<double>(h);
    }
    return num / den;
}

} // namespace

TEST_CASE("covering counts and exact correlations") {
    CHECK(n_c({5, 2}) == 3);
    CHECK(n_c({5, 4}) == 1);
    CHECK(n_c({1, 0}) == 1);
    CHECK(exact_correlation({5, 2}, 0) == 1);
    CHECK(exact_correlation({5, 2}, 2) == 1);
    CHECK(exact_correlation({5, 2}, 3) == 0);
}

TEST_CASE("operator correlations equal the closed form") {
    for (bool identity : {false, true}) {
        suspension_experiment exp;
        exp.symbol_cap = 1000;
        exp.identity_interior = identity;
        exp.seed = 3;
        auto c = exp.make_cocycle();
        auto g = make_engine(identity ? 2 : 1, "test.exactness");
        int checked = 0;
        for (int k = 0; k < 500; ++k) {
            auto p = c.sample_path(g(), 0, 2100);
            const long nc = n_c(p.state());
            const long n = static_cast<long>(g() % static_cast<std::uint64_t>(2 * nc + 1));
            CHECK(operator_correlation(c, p, n) == static_cast<double>(exact_correlation(p.state(), n)));
            ++checked;
        }
        CHECK(checked == 500);
    }
}

TEST_CASE("second moment identity") {
    suspension_experiment exp;
    exp.symbol_cap = 300;
    auto c = exp.make_cocycle();
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto p = c.sample_path(s, 0, 200);
        for (long n : {1L, 7L, 50L, 120L})
            CHECK(2.0 * moving_average_nc(p, n) - 1.0 == doctest::Approx(brute_second_moment(p, n)).epsilon(1e-12));
    }
}

TEST_CASE("variance blow-up") {
    suspension_experiment exp;
    exp.seed = 1;
    blowup_options opt;
    opt.seed = 1;
    opt.base_samples = 1000;
    auto r = variance_blowup(exp, opt);
    CHECK(r.slope_v >= 0.35);
    CHECK(r.slope_v <= 0.65);
    CHECK(r.growth_factor >= 5.0);
    // Bases starting deep in a tall roof have v(100) close to 50 and can
    // exceed v(10^4); roughly 85% of bases increase.
    CHECK(r.fraction_increasing >= 0.7);
    for (std::size_t k = 0; k < r.n_grid.size(); ++k)
        CHECK(r.second_moment[k] == doctest::Approx(2.0 * r.mean_v[k] - 1.0));

    opt.bound = 5;
    auto b = variance_blowup(exp, opt);
    CHECK(std::abs(b.slope_v) <= 0.05);
    CHECK(b.mean_v.back() <= 5.0);
}

TEST_CASE("truncated covering averages") {
    suspension_experiment exp;
    exp.seed = 6;
    auto c = exp.make_cocycle();
    CHECK(truncated_nc_mean(c.sampler(), 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(truncated_nc_mean(c.sampler(), 10) == doctest::Approx(truncated_mean_oracle(0.5, 1'000'000, 10)).epsilon(1e-10));

    maker_options opt;
    opt.seed = 6;
    auto r = maker_check(exp, opt);
    REQUIRE(r.levels.size() == 2);
    for (double m : r.levels[0].mean) CHECK(m == 1.0);
    CHECK(r.levels[1].within_3sigma);
    CHECK(r.untruncated.back() > r.levels[1].expectation);
}

TEST_CASE("tail of the covering count") {
    suspension_experiment slow;
    slow.delta = 1.0;
    slow.seed = 2;
    auto a = tail_check(slow, 1'000'000);
    CHECK(std::abs(a.exponent + 2.0) <= 0.1);
    CHECK(a.expected == -2.0);

    suspension_experiment heavy;
    heavy.seed = 2;
    auto b = tail_check(heavy, 1'000'000);
    CHECK(std::abs(b.exponent + 1.5) <= 0.1);

    suspension_experiment tiny;
    tiny.symbol_cap = 30;
    CHECK_THROWS_AS(tail_check(tiny, 100'000), certification_error);

    suspension_experiment capped;
    capped.symbol_cap = 2000;
    CHECK(tail_check(capped, 200'000).cutoff_visible);
}
