#include "rdlab/counterexample.hpp"

#include <algorithm>
#include <cmath>

#include "rdlab/errors.hpp"
#include "rdlab/parallel.hpp"
#include "rdlab/stats.hpp"
#include "rdlab/transfer.hpp"

namespace rdlab {

namespace {

step_function psi_half() { return step_function::from_pieces({0.5}, {1.0, -1.0}); }

std::vector<base_state> origins(const base_sampler& sampler, std::size_t count, std::uint64_t seed) {
    std::vector<base_state> out(count);
    auto g = make_engine(seed, "suspension.origin");
    for (auto& s : out) s = sampler.sample_origin(g);
    return out;
}

} // namespace

cocycle suspension_experiment::make_cocycle() const {
    return cocycle::suspension(delta, identity_interior ? identity_map() : buzzi_t1_map(), doubling_map(), seed,
                               symbol_cap);
}

double operator_correlation(const cocycle& c, const base_path& p, long n) {
    const auto psi = psi_half();
    return (cocycle_apply(c, p, 0, n, psi) * psi).integral();
}

double moving_average_nc(const base_path& p, long n, long bound) {
    long double acc = 0.0;
    for (long k = 0; k < n; ++k) {
        long v = std::min(n_c(p.at(k)), n - k);
        if (bound > 0) v = std::min(v, bound);
        acc += static_cast<long double>(v);
    }
    return static_cast<double>(acc / static_cast<long double>(n));
}

blowup_report variance_blowup(const suspension_experiment& exp, const blowup_options& opt) {
    if (opt.n_grid.empty() || !std::is_sorted(opt.n_grid.begin(), opt.n_grid.end()))
        throw config_error("variance_blowup: N grid must be increasing");
    if (opt.base_samples < 100) throw config_error("variance_blowup: need at least 100 base samples");
    const auto c = exp.make_cocycle();
    const long n_max = opt.n_grid.back();
    const auto g = opt.n_grid.size();

    blowup_report r;
    r.n_grid = opt.n_grid;
    r.per_sample_v.assign(opt.base_samples, std::vector<double>(g));
    parallel_for(opt.base_samples, opt.threads, [&](std::size_t s) {
        const auto p = c.sample_path(substream_seed(exp.seed, "suspension.blowup", s), 0, n_max);
        for (std::size_t k = 0; k < g; ++k) r.per_sample_v[s][k] = moving_average_nc(p, opt.n_grid[k], opt.bound);
    });
    std::vector<double> lx, lv, lm;
    for (std::size_t k = 0; k < g; ++k) {
        std::vector<double> col(opt.base_samples);
        for (std::size_t s = 0; s < opt.base_samples; ++s) col[s] = r.per_sample_v[s][k];
        const double v = pairwise_sum(col) / static_cast<double>(opt.base_samples);
        r.mean_v.push_back(v);
        r.second_moment.push_back(2.0 * v - 1.0);
        lx.push_back(std::log(static_cast<double>(opt.n_grid[k])));
        lv.push_back(std::log(v));
        lm.push_back(std::log(2.0 * v - 1.0));
    }
    if (g >= 2) {
        r.slope_v = least_squares(lx, lv).slope;
        r.slope_second_moment = least_squares(lx, lm).slope;
        r.growth_factor = r.second_moment.back() / r.second_moment.front();
        std::size_t up = 0;
        for (const auto& row : r.per_sample_v) up += row.back() > row.front();
        r.fraction_increasing = static_cast<double>(up) / static_cast<double>(opt.base_samples);
    }
    return r;
}

double truncated_nc_mean(const base_sampler& sampler, long level) {
    const auto& law = sampler.symbol_law();
    const double mean_h = law.mean();
    const auto m = static_cast<long double>(level);
    long double acc = 0.0;
    for (auto h = law.min_symbol(); h <= law.max_symbol(); ++h) {
        const long double hh = static_cast<long double>(h);
        // sum_{k=1}^{h} min(k, M)
        const long double s = hh <= m ? hh * (hh + 1) / 2 : m * (m + 1) / 2 + (hh - m) * m;
        acc += static_cast<long double>(law.probability(h)) * s;
    }
    return static_cast<double>(acc / static_cast<long double>(mean_h));
}

maker_report maker_check(const suspension_experiment& exp, const maker_options& opt) {
    const auto c = exp.make_cocycle();
    const long n_max = opt.n_grid.back();
    const auto g = opt.n_grid.size();
    const auto nl = opt.levels.size();
    // [sample][level + 1][N index]; slot 0 is untruncated
    std::vector<std::vector<std::vector<double>>> vals(opt.base_samples,
                                                       std::vector<std::vector<double>>(nl + 1, std::vector<double>(g)));
    parallel_for(opt.base_samples, opt.threads, [&](std::size_t s) {
        const auto p = c.sample_path(substream_seed(exp.seed, "suspension.maker", s), 0, n_max);
        for (std::size_t k = 0; k < g; ++k) {
            const long n = opt.n_grid[k];
            vals[s][0][k] = moving_average_nc(p, n);
            for (std::size_t l = 0; l < nl; ++l) {
                long double acc = 0.0;
                for (long i = 0; i < n; ++i) acc += std::min(n_c(p.at(i)), opt.levels[l]);
                vals[s][l + 1][k] = static_cast<double>(acc / n);
            }
        }
    });
    maker_report r;
    r.n_grid = opt.n_grid;
    auto column = [&](std::size_t slot, std::size_t k) {
        std::vector<double> col(opt.base_samples);
        for (std::size_t s = 0; s < opt.base_samples; ++s) col[s] = vals[s][slot][k];
        return sample_moments(col);
    };
    for (std::size_t k = 0; k < g; ++k) r.untruncated.push_back(column(0, k).mean);
    for (std::size_t l = 0; l < nl; ++l) {
        maker_level lv;
        lv.level = opt.levels[l];
        lv.expectation = truncated_nc_mean(c.sampler(), lv.level);
        for (std::size_t k = 0; k < g; ++k) {
            const auto m = column(l + 1, k);
            lv.mean.push_back(m.mean);
            lv.std_error.push_back(m.std_error);
        }
        const double err = std::abs(lv.mean.back() - lv.expectation);
        lv.within_3sigma = err <= 3.0 * lv.std_error.back() + 1e-12;
        r.levels.push_back(std::move(lv));
    }
    return r;
}

tail_report tail_check(const suspension_experiment& exp, std::size_t samples) {
    const auto c = exp.make_cocycle();
    const auto states = origins(c.sampler(), samples, exp.seed);
    tail_report r;
    r.samples = samples;
    r.expected = -(1.0 + exp.delta);
    const auto cap = static_cast<double>(exp.symbol_cap);

    std::vector<double> counts(64, 0.0);
    for (const auto& s : states) {
        const auto v = static_cast<std::uint64_t>(n_c(s));
        counts[static_cast<std::size_t>(63 - __builtin_clzll(v))] += 1.0;
        if (static_cast<double>(v) >= cap / 2.0) r.cutoff_visible = true;
    }
    std::vector<double> lx, ly;
    for (std::size_t k = 2; k < 64; ++k) {
        const double lo = std::ldexp(1.0, static_cast<int>(k));
        const double hi = 2.0 * lo;
        if (hi > cap / 10.0 || counts[k] < 20.0) continue;
        const double pmf = counts[k] / (static_cast<double>(samples) * lo);
        const double center = std::sqrt(lo * (hi - 1.0));
        r.bin_center.push_back(center);
        r.pmf.push_back(pmf);
        lx.push_back(std::log(center));
        ly.push_back(std::log(pmf));
    }
    if (lx.size() < 3) throw certification_error("tail_check: insufficient tail mass for a fit");
    const auto fit = least_squares(lx, ly);
    r.exponent = fit.slope;
    r.r2 = fit.r2;
    return r;
}

} // namespace rdlab
