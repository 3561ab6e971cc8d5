#include "rdlab/cocycle.hpp"

#include <cmath>
#include <string>

#include "rdlab/errors.hpp"
#include "rdlab/stats.hpp"
#include "rdlab/transfer.hpp"

namespace rdlab {

cocycle::cocycle(base_spec base, std::vector<piecewise_linear_map> maps, map_assignment assignment)
    : base_(std::move(base)), maps_(std::move(maps)), assignment_(std::move(assignment)) {
    sampler_ = std::make_shared<const base_sampler>(base_);
    if (maps_.empty()) throw config_error("assignment: no maps");
    auto check_index = [&](std::size_t i) {
        if (i >= maps_.size()) throw config_error("assignment: map index " + std::to_string(i) + " out of range");
    };
    if (assignment_.variant == map_assignment::kind::suspension_roof) {
        if (base_.variant != base_spec::kind::suspension)
            throw config_error("assignment: roof-top rule needs a suspension base");
        check_index(assignment_.interior);
        check_index(assignment_.roof_top);
        return;
    }
    for (const auto& [sym, idx] : assignment_.table) check_index(idx);
    if (assignment_.fallback) {
        check_index(*assignment_.fallback);
        return;
    }
    // every symbol with positive probability needs a map
    const auto& law = sampler_->symbol_law();
    if (base_.variant == base_spec::kind::suspension)
        throw config_error("assignment: suspension bases need a fallback map or the roof-top rule");
    for (auto s = law.min_symbol(); s <= law.max_symbol(); ++s) {
        if (law.probability(s) > 0.0 && !assignment_.table.count(s))
            throw config_error("assignment: symbol " + std::to_string(s) + " has no map");
    }
}

cocycle cocycle::single(piecewise_linear_map map, std::uint64_t seed) {
    map_assignment a;
    a.table[0] = 0;
    return cocycle(base_spec::finite({1.0}, seed), {std::move(map)}, std::move(a));
}

cocycle cocycle::iid_mix(std::vector<double> weights, std::vector<piecewise_linear_map> maps, std::uint64_t seed) {
    if (weights.size() != maps.size()) throw config_error("iid_mix: one weight per map");
    map_assignment a;
    for (std::size_t k = 0; k < maps.size(); ++k) a.table[static_cast<std::int64_t>(k)] = k;
    return cocycle(base_spec::finite(std::move(weights), seed), std::move(maps), std::move(a));
}

cocycle cocycle::suspension(double delta, piecewise_linear_map interior, piecewise_linear_map roof_top,
                            std::uint64_t seed, std::uint64_t symbol_cap) {
    map_assignment a;
    a.variant = map_assignment::kind::suspension_roof;
    a.interior = 0;
    a.roof_top = 1;
    return cocycle(base_spec::suspension_over(base_spec::heavy_tail(delta, symbol_cap), seed),
                   {std::move(interior), std::move(roof_top)}, std::move(a));
}

std::size_t cocycle::map_index(const base_state& s) const {
    if (assignment_.variant == map_assignment::kind::suspension_roof)
        return s.at_roof_top() ? assignment_.roof_top : assignment_.interior;
    auto it = assignment_.table.find(s.symbol);
    if (it != assignment_.table.end()) return it->second;
    if (assignment_.fallback) return *assignment_.fallback;
    throw config_error("assignment: symbol " + std::to_string(s.symbol) + " has no map");
}

step_function cocycle_apply(const cocycle& c, const base_path& p, long start, long n, step_function f,
                            const apply_options& opt) {
    for (long k = 0; k < n; ++k) {
        f = transfer_apply(c.map_at(p, start + k), f);
        if (opt.coalesce_tol > 0.0) f = f.coalesced(opt.coalesce_tol);
        if (f.piece_count() > opt.piece_cap)
            throw certification_error("breakpoint budget exceeded: " + std::to_string(f.piece_count()) + " pieces");
    }
    return f;
}

step_function koopman_power(const cocycle& c, const base_path& p, long start, long n, step_function f) {
    // f o T_{start+n-1} o ... o T_start: pull back through the last map first
    for (long k = n - 1; k >= 0; --k) f = koopman_compose(f, c.map_at(p, start + k));
    return f;
}

expansion_estimate expansion_on_average(const cocycle& c, std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 100) throw config_error("expansion_on_average: need at least 100 samples");
    const auto path = c.sample_path(seed, 0, static_cast<long>(n_samples) - 1);
    std::vector<double> v(n_samples);
    for (long k = 0; k < static_cast<long>(n_samples); ++k)
        v[static_cast<std::size_t>(k)] = std::log(c.map_at(path, k).min_expansion());
    const auto m = sample_moments(v);
    expansion_estimate e;
    e.samples = n_samples;
    e.mean = m.mean;
    e.half_width = 3.0 * m.std_error;
    e.expanding = e.mean - e.half_width > 0.0;
    return e;
}

covering_result covering_time(const cocycle& c, const base_path& p, double lo, double hi, long n_max) {
    if (!(hi > lo)) throw config_error("covering_time: interval needs positive length");
    auto f = step_function::indicator(lo, std::min(hi, 1.0));
    covering_result r;
    for (long n = 1; n <= n_max; ++n) {
        f = transfer_apply(c.map_at(p, n - 1), f);
        r.essinf = essinf(f);
        if (r.essinf > 0.0) {
            r.covered = true;
            r.steps = n;
            return r;
        }
    }
    r.steps = n_max;
    return r;
}

} // namespace rdlab
