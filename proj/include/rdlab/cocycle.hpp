#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "rdlab/base.hpp"
#include "rdlab/maps.hpp"
#include "rdlab/step_function.hpp"

namespace rdlab {

// How a base state selects its fiber map.
struct map_assignment {
    enum class kind { by_symbol, suspension_roof };

    kind variant = kind::by_symbol;
    std::map<std::int64_t, std::size_t> table;  // by_symbol: symbol -> map index
    std::optional<std::size_t> fallback;        // by_symbol: map for symbols absent from the table
    std::size_t interior = 0;                   // suspension_roof: map while i < h-1
    std::size_t roof_top = 0;                   // suspension_roof: map at i = h-1
};

// A random cocycle: base system plus the rule omega -> T_omega.
class cocycle {
public:
    cocycle(base_spec base, std::vector<piecewise_linear_map> maps, map_assignment assignment);

    // Same map on every fiber.
    static cocycle single(piecewise_linear_map map, std::uint64_t seed = 0);
    // Symbol k carries maps[k], drawn i.i.d. with the given weights.
    static cocycle iid_mix(std::vector<double> weights, std::vector<piecewise_linear_map> maps, std::uint64_t seed = 0);
    // Heavy-tailed suspension with the roof-top rule.
    static cocycle suspension(double delta, piecewise_linear_map interior, piecewise_linear_map roof_top,
                              std::uint64_t seed = 0, std::uint64_t symbol_cap = 1'000'000);

    const base_spec& base() const { return base_; }
    const base_sampler& sampler() const { return *sampler_; }
    const std::vector<piecewise_linear_map>& maps() const { return maps_; }
    const map_assignment& assignment() const { return assignment_; }

    std::size_t map_index(const base_state& s) const;
    const piecewise_linear_map& map_for(const base_state& s) const { return maps_[map_index(s)]; }
    const piecewise_linear_map& map_at(const base_path& p, long k) const { return map_for(p.at(k)); }

    base_path sample_path(long n_back, long n_fwd) const { return sampler_->sample(n_back, n_fwd); }
    base_path sample_path(std::uint64_t seed, long n_back, long n_fwd) const { return sampler_->sample(seed, n_back, n_fwd); }

private:
    base_spec base_;
    std::shared_ptr<const base_sampler> sampler_;
    std::vector<piecewise_linear_map> maps_;
    map_assignment assignment_;
};

struct apply_options {
    double coalesce_tol = 1e-14;
    std::size_t piece_cap = 1'000'000;
};

// L^n along the path starting at index `start`: L_{start+n-1} o ... o L_{start}.
step_function cocycle_apply(const cocycle& c, const base_path& p, long start, long n, step_function f,
                            const apply_options& opt = {});
inline step_function cocycle_apply(const cocycle& c, const base_path& p, long n, step_function f,
                                   const apply_options& opt = {}) {
    return cocycle_apply(c, p, 0, n, std::move(f), opt);
}

// f o T^n along the path from `start`.
step_function koopman_power(const cocycle& c, const base_path& p, long start, long n, step_function f);

struct expansion_estimate {
    double mean = 0.0;        // estimate of int log lambda_omega dP
    double half_width = 0.0;  // 3 sigma
    std::size_t samples = 0;
    bool expanding = false;   // lower bound mean - half_width > 0
};

expansion_estimate expansion_on_average(const cocycle& c, std::size_t n_samples, std::uint64_t seed);

struct covering_result {
    bool covered = false;  // false: n_max exceeded
    long steps = 0;        // minimal n when covered
    double essinf = 0.0;   // essinf of L^n 1_I at the reported n (or at n_max)
};

// Smallest n <= n_max with essinf L^n_omega(1_I) > 0, evaluated exactly.
covering_result covering_time(const cocycle& c, const base_path& p, double lo, double hi, long n_max);

} // namespace rdlab
