#include "rdlab/monte_carlo.hpp"

#include <algorithm>
#include <cmath>

#include "rdlab/errors.hpp"
#include "rdlab/orbit.hpp"
#include "rdlab/parallel.hpp"
#include "rdlab/stats.hpp"

namespace rdlab {

std::vector<double> sample_mu(const step_function& density, std::size_t count, std::uint64_t seed) {
    density_sampler s(density);
    auto g = make_engine(seed, "mc.sample_mu");
    std::vector<double> out(count);
    for (auto& x : out) x = s.sample(g);
    return out;
}

std::vector<double> trial_batch::column(std::size_t checkpoint, int component) const {
    std::vector<double> out(trials);
    for (std::size_t t = 0; t < trials; ++t) out[t] = sum(checkpoint, t, component);
    return out;
}

namespace {

struct program {
    std::vector<compiled_map> maps;
    std::vector<const compiled_map*> fiber_map;
    std::vector<std::vector<compiled_step>> fiber_obs;
    bool exact = true;
};

program compile(const cocycle& c, const base_path& p, const fiber_observable& obs, long start, long n) {
    if (!p.contains(start) || !p.contains(start + n - 1)) throw window_error(start + n - 1, p.first(), p.last());
    if (!obs.covers(start) || !obs.covers(start + n - 1))
        throw window_error(start + n - 1, obs.first_fiber(), obs.last_fiber());
    program prog;
    prog.maps.reserve(c.maps().size());
    for (const auto& m : c.maps()) {
        prog.maps.emplace_back(m);
        prog.exact = prog.exact && prog.maps.back().exact();
    }
    prog.fiber_map.reserve(static_cast<std::size_t>(n));
    prog.fiber_obs.reserve(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
        prog.fiber_map.push_back(&prog.maps[c.map_index(p.at(start + k))]);
        std::vector<compiled_step> comps;
        for (const auto& f : obs.components(start + k)) comps.emplace_back(f);
        prog.fiber_obs.push_back(std::move(comps));
    }
    return prog;
}

} // namespace

trial_batch birkhoff(const cocycle& c, const base_path& p, const fiber_observable& obs, const step_function& density,
                     long start, const birkhoff_options& opt) {
    if (opt.trials < 1) throw config_error("birkhoff: trial count must be positive");
    if (opt.n < 1) throw config_error("birkhoff: n must be positive");
    trial_batch b;
    b.dimension = obs.dimension();
    b.start = start;
    b.trials = opt.trials;
    b.checkpoints = opt.checkpoints.empty() ? std::vector<long>{opt.n} : opt.checkpoints;
    std::sort(b.checkpoints.begin(), b.checkpoints.end());
    if (b.checkpoints.front() < 1 || b.checkpoints.back() > opt.n)
        throw config_error("birkhoff: checkpoints must lie in [1, n]");

    auto prog = compile(c, p, obs, start, opt.n);
    prog.exact = prog.exact && !opt.force_double;
    b.exact_arithmetic = prog.exact;

    const auto d = static_cast<std::size_t>(b.dimension);
    b.sums.assign(b.checkpoints.size() * b.trials * d, 0.0);
    if (opt.keep_trajectories) b.trajectories.assign(b.trials, {});
    const density_sampler sampler(density);

    parallel_for(b.trials, opt.threads, [&](std::size_t t) {
        bit_source bits(substream_seed(opt.seed, "mc.trial", t));
        std::vector<double> s(d, 0.0);
        std::vector<double>* traj = nullptr;
        if (opt.keep_trajectories) {
            traj = &b.trajectories[t];
            traj->reserve(static_cast<std::size_t>(opt.n));
        }
        std::size_t next = 0;
        auto record = [&](long k) {
            while (next < b.checkpoints.size() && b.checkpoints[next] == k) {
                for (std::size_t i = 0; i < d; ++i) b.sums[(next * b.trials + t) * d + i] = s[i];
                ++next;
            }
            if (traj) traj->push_back(s[0]);
        };
        if (prog.exact) {
            std::uint64_t x = sampler.sample_fixed(bits);
            for (long k = 0; k < opt.n; ++k) {
                const auto& comps = prog.fiber_obs[static_cast<std::size_t>(k)];
                for (std::size_t i = 0; i < d; ++i) s[i] += comps[i](x);
                x = prog.fiber_map[static_cast<std::size_t>(k)]->apply(x, bits);
                record(k + 1);
            }
        } else {
            engine g(bits.word());
            double x = sampler.sample(g);
            for (long k = 0; k < opt.n; ++k) {
                const auto& comps = prog.fiber_obs[static_cast<std::size_t>(k)];
                for (std::size_t i = 0; i < d; ++i) s[i] += comps[i](x);
                x = prog.fiber_map[static_cast<std::size_t>(k)]->apply(x);
                record(k + 1);
            }
        }
    });
    return b;
}

std::vector<double> birkhoff_points(const cocycle& c, const base_path& p, const fiber_observable& obs, long start,
                                    std::span<const double> points, long n) {
    const auto d = static_cast<std::size_t>(obs.dimension());
    std::vector<double> out(points.size() * d, 0.0);
    if (n == 0) return out;
    auto prog = compile(c, p, obs, start, n);
    for (std::size_t t = 0; t < points.size(); ++t) {
        double x = points[t];
        for (long k = 0; k < n; ++k) {
            const auto& comps = prog.fiber_obs[static_cast<std::size_t>(k)];
            for (std::size_t i = 0; i < d; ++i) out[t * d + i] += comps[i](x);
            x = prog.fiber_map[static_cast<std::size_t>(k)]->apply(x);
        }
    }
    return out;
}

std::vector<variance_point> variance_growth(const trial_batch& batch, int component) {
    if (batch.trials < 1000) throw config_error("variance_growth: needs at least 1000 trials");
    std::vector<variance_point> out;
    for (std::size_t cp = 0; cp < batch.checkpoints.size(); ++cp) {
        const double n = static_cast<double>(batch.checkpoints[cp]);
        auto col = batch.column(cp, component);
        for (auto& v : col) v = v * v / n;
        const auto m = sample_moments(col);
        out.push_back({batch.checkpoints[cp], m.mean, m.std_error});
    }
    return out;
}

clt_report clt_diagnostics(std::span<const double> sums, long n, double sigma2, double threshold) {
    if (!(sigma2 > 0.0)) throw config_error("clt_diagnostics: sigma^2 must be positive");
    if (sums.empty()) throw config_error("clt_diagnostics: empty batch");
    clt_report r;
    r.threshold = threshold;
    const double scale = std::sqrt(static_cast<double>(n) * sigma2);
    std::vector<double> z(sums.begin(), sums.end());
    std::vector<double> z2(z.size()), z4(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        z[k] /= scale;
        z2[k] = z[k] * z[k];
        z4[k] = z2[k] * z2[k];
    }
    r.second_moment = pairwise_sum(z2) / static_cast<double>(z.size());
    r.fourth_moment = pairwise_sum(z4) / static_cast<double>(z.size());
    const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
    r.degenerate = *lo == *hi;
    r.ks = ks_distance(z, normal_cdf);
    r.pass = !r.degenerate && r.ks <= threshold;
    return r;
}

lil_report lil_envelope(const std::vector<std::vector<double>>& trajectories, double sigma2, double epsilon) {
    if (trajectories.empty()) throw config_error("lil_envelope: no trajectories");
    if (!(sigma2 > 0.0)) throw config_error("lil_envelope: sigma^2 must be positive");
    lil_report r;
    r.epsilon = epsilon;
    const long n = static_cast<long>(trajectories.front().size());
    if (n < 16) throw config_error("lil_envelope: trajectories too short");
    const long first = 3;  // log log n > 0
    const long span = n - first + 1;
    std::vector<double> counts(4, 0.0), totals(4, 0.0);
    for (const auto& tr : trajectories) {
        if (static_cast<long>(tr.size()) != n) throw config_error("lil_envelope: ragged trajectories");
        double viol = 0.0, tot = 0.0;
        for (long m = first; m <= n; ++m) {
            const double dm = static_cast<double>(m);
            const double env = std::sqrt(2.0 * sigma2 * dm * std::log(std::log(dm)));
            const double s = std::abs(tr[static_cast<std::size_t>(m - 1)]);
            const auto q = static_cast<std::size_t>(std::min<long>(3, 4 * (m - first) / span));
            const bool over = s > (1.0 + epsilon) * env;
            counts[q] += over;
            totals[q] += 1.0;
            if (q == 3) {
                viol += over;
                tot += 1.0;
                r.max_excursion = std::max(r.max_excursion, s / env);
            }
        }
        r.per_trial_final.push_back(tot > 0 ? viol / tot : 0.0);
    }
    for (std::size_t q = 0; q < 4; ++q) r.quarter_violation.push_back(totals[q] > 0 ? counts[q] / totals[q] : 0.0);
    r.final_quarter_violation = r.quarter_violation[3];
    return r;
}

} // namespace rdlab
