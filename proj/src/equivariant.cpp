#include "rdlab/equivariant.hpp"

#include <algorithm>
#include <cmath>

#include "rdlab/errors.hpp"
#include "rdlab/stats.hpp"
#include "rdlab/transfer.hpp"

namespace rdlab {

namespace {

constexpr double finite_time_rate = 36.0;
// Zero-mean images below this fraction of the starting BV norm are rounding
// residue and count as annihilated.
constexpr double numerical_zero = 1e-13;

} // namespace

const step_function& equivariant_data::density(long j) const {
    if (!covers(j)) throw window_error(j, first_fiber(), last_fiber());
    return densities_[static_cast<std::size_t>(j - first_)];
}

double equivariant_data::equivariance_residual(long j) const {
    if (j < first_fiber() || j >= last_fiber()) throw window_error(j, first_fiber(), last_fiber() - 1);
    return residuals_[static_cast<std::size_t>(j - first_)];
}

equivariant_data pullback_density(const cocycle& c, const base_path& p, long first, long last,
                                  const pullback_options& opt) {
    if (last < first) throw config_error("pullback_density: empty fiber range");
    if (!p.contains(first - opt.n_max)) throw window_error(first - opt.n_max, p.first(), p.last());
    if (!p.contains(last)) throw window_error(last, p.first(), p.last());

    equivariant_data eq;
    eq.first_ = first;
    const auto one = step_function::constant(1.0);
    step_function prev = one;
    step_function current = one;
    int run = 0;
    for (long n = 1; n <= opt.n_max; ++n) {
        current = cocycle_apply(c, p, first - n, n, one, opt.apply);
        const double d = l1_distance(current, prev);
        eq.trace_.push_back(d);
        prev = current;
        if (d < opt.tol) {
            if (run == 0) eq.converged_at_ = n;
            if (++run >= opt.patience) {
                eq.converged_ = true;
                eq.truncation_ = n;
                break;
            }
        } else {
            run = 0;
        }
    }
    if (!eq.converged_) {
        eq.truncation_ = opt.n_max;
        eq.converged_at_ = opt.n_max;
        const std::string msg = "pullback did not converge within n_max = " + std::to_string(opt.n_max) +
                                " (last l1 step " + std::to_string(eq.truncation_error()) + ")";
        if (opt.require_convergence) throw certification_error(msg);
        eq.warnings_.push_back(msg);
    }

    // normalize away the rounding drift of the integral
    current = (1.0 / current.integral()) * current;
    eq.densities_.push_back(current);
    for (long j = first; j < last; ++j) {
        auto next = transfer_apply(c.map_at(p, j), eq.densities_.back());
        if (opt.apply.coalesce_tol > 0.0) next = next.coalesced(opt.apply.coalesce_tol);
        eq.residuals_.push_back(l1_distance(transfer_apply(c.map_at(p, j), eq.densities_.back()), next));
        eq.densities_.push_back(std::move(next));
    }
    for (long j = first; j <= last; ++j) {
        if (!(eq.lower_bound(j) > 0.0))
            throw certification_error("equivariant density vanishes on a set of positive measure at fiber " +
                                      std::to_string(j) + " (covering failure at this truncation)");
    }
    return eq;
}

step_function normalized_apply(const equivariant_data& eq, const cocycle& c, const base_path& p, long j, long n,
                               step_function h, const apply_options& opt) {
    if (n == 0) return h;
    auto pushed = cocycle_apply(c, p, j, n, h * eq.density(j), opt);
    return divide(pushed, eq.density(j + n));
}

step_function project_zero_mean(const equivariant_data& eq, long j, const step_function& h) {
    return h - eq.mean(j, h);
}

std::vector<step_function> default_test_set(std::uint64_t seed, std::size_t random_count, int max_scale) {
    std::vector<step_function> tests;
    for (int s = 0; s <= max_scale; ++s) {
        const double w = std::ldexp(1.0, -s);
        const double offsets[] = {0.0, std::floor(0.5 / w) * w, 1.0 - w};
        for (std::size_t k = 0; k < (s == 0 ? 1u : 3u); ++k) {
            const double a = offsets[k];
            std::vector<double> cuts;
            std::vector<double> vals;
            if (a > 0.0) {
                cuts.push_back(a);
                vals.push_back(0.0);
            }
            vals.push_back(1.0);
            cuts.push_back(a + 0.5 * w);
            vals.push_back(-1.0);
            if (a + w < 1.0) {
                cuts.push_back(a + w);
                vals.push_back(0.0);
            }
            tests.push_back(step_function::from_pieces(cuts, vals));
        }
    }
    auto g = make_engine(seed, "decay.tests");
    for (std::size_t r = 0; r < random_count; ++r) {
        const int pieces = 2 + static_cast<int>(g() % 24);
        std::vector<double> cuts;
        for (int k = 1; k < pieces; ++k) cuts.push_back(uniform01(g));
        normalize_cuts(cuts);
        std::vector<double> vals;
        for (std::size_t k = 0; k <= cuts.size(); ++k) vals.push_back(2.0 * uniform01(g) - 1.0);
        tests.push_back(step_function::from_pieces(cuts, vals));
    }
    return tests;
}

std::vector<double> worst_decay_ratios(const equivariant_data& eq, const cocycle& c, const base_path& p, long fiber,
                                       std::span<const step_function> tests, long n_max) {
    std::vector<double> worst(static_cast<std::size_t>(n_max + 1), 0.0);
    for (const auto& h : tests) {
        auto g = project_zero_mean(eq, fiber, h);
        const double base = g.bv();
        if (!(base > 0.0)) continue;
        worst[0] = std::max(worst[0], 1.0);
        for (long n = 1; n <= n_max; ++n) {
            g = normalized_apply(eq, c, p, fiber + n - 1, 1, g);
            const double ratio = g.bv() / base;
            if (ratio < numerical_zero) break;
            auto& w = worst[static_cast<std::size_t>(n)];
            w = std::max(w, ratio);
        }
    }
    return worst;
}

namespace {

double prefactor_for(const std::vector<double>& worst, double rate) {
    double m = 0.0;
    for (std::size_t n = 0; n < worst.size(); ++n)
        if (worst[n] > 0.0) m = std::max(m, worst[n] * std::exp(rate * static_cast<double>(n)));
    return (1.0 + c_var) * m;
}

} // namespace

decay_estimate fit_decay(const equivariant_data& eq, const cocycle& c, const base_path& p, long fiber,
                         std::span<const step_function> tests, long n_max) {
    if (n_max < 2) throw config_error("fit_decay: n_max must be at least 2");
    decay_estimate d;
    d.fiber = fiber;
    d.test_count = tests.size();
    d.worst_ratio = worst_decay_ratios(eq, c, p, fiber, tests, n_max);

    auto collect = [&](long from) {
        std::vector<double> xs, ys;
        for (long n = from; n <= n_max; ++n) {
            const double w = d.worst_ratio[static_cast<std::size_t>(n)];
            if (w > 0.0) {
                xs.push_back(static_cast<double>(n));
                ys.push_back(std::log(w));
            }
        }
        return std::pair{xs, ys};
    };
    auto [xs, ys] = collect(std::max(1L, n_max / 2));
    if (xs.size() < 2) std::tie(xs, ys) = collect(1);
    if (xs.empty()) {
        d.finite_time = true;
        d.rate = finite_time_rate;
    } else if (xs.size() == 1) {
        d.rate = -ys[0] / xs[0];
    } else {
        d.rate = -least_squares(xs, ys).slope;
    }
    d.mixing = d.rate > 1e-9;
    d.prefactor = prefactor_for(d.worst_ratio, d.rate);
    d.k_value = d.prefactor + c_var;
    return d;
}

double decay_prefactor(const equivariant_data& eq, const cocycle& c, const base_path& p, long fiber,
                       std::span<const step_function> tests, long n_max, double rate) {
    return prefactor_for(worst_decay_ratios(eq, c, p, fiber, tests, n_max), rate);
}

adapted_norm_value adapted_norm(const equivariant_data& eq, double rate, const cocycle& c, const base_path& p,
                                long fiber, const step_function& phi, long n_max) {
    adapted_norm_value r;
    const double mean = eq.mean(fiber, phi);
    r.mean_term = std::abs(mean);
    auto g = phi - mean;
    const double floor = numerical_zero * g.bv();
    const long head = (3 * n_max) / 4;
    double tail = 0.0;
    for (long n = 0; n <= n_max; ++n) {
        if (n > 0) g = normalized_apply(eq, c, p, fiber + n - 1, 1, g);
        if (g.bv() <= floor) break;
        const double v = g.bv() * std::exp(rate * static_cast<double>(n));
        if (n > head) tail = std::max(tail, v);
        if (v > r.sup_term) {
            r.sup_term = v;
            r.argmax = n;
        }
    }
    if (r.argmax > head && tail > 1e-6 * r.sup_term && r.argmax > 0) {
        double before = 0.0;
        auto h = phi - mean;
        for (long n = 0; n <= head; ++n) {
            if (n > 0) h = normalized_apply(eq, c, p, fiber + n - 1, 1, h);
            before = std::max(before, h.bv() * std::exp(rate * static_cast<double>(n)));
        }
        if (tail > before * (1.0 + 1e-6))
            throw certification_error("adapted norm: supremum not certified within n_max = " + std::to_string(n_max));
    }
    r.value = r.sup_term + r.mean_term;
    return r;
}

hitting_estimate k_hitting_estimate(const cocycle& c, const base_path& p, std::span<const std::size_t> expanding,
                                    double a, double lambda1, double constant, long n_max) {
    if (!(a > 0.0 && a <= 1.0)) throw config_error("k_hitting_estimate: a must lie in (0,1]");
    if (!p.contains(n_max - 1)) throw window_error(n_max - 1, p.first(), p.last());
    hitting_estimate h;
    h.counts.assign(static_cast<std::size_t>(n_max + 1), 0);
    for (long n = 1; n <= n_max; ++n) {
        const auto idx = c.map_index(p.at(n - 1));
        const bool hit = std::find(expanding.begin(), expanding.end(), idx) != expanding.end();
        h.counts[static_cast<std::size_t>(n)] = h.counts[static_cast<std::size_t>(n - 1)] + (hit ? 1 : 0);
    }
    auto holds = [&](long n) { return static_cast<double>(h.counts[static_cast<std::size_t>(n)]) >= 0.5 * a * static_cast<double>(n); };
    if (!holds(n_max)) throw certification_error("hitting time did not stabilize within n_max = " + std::to_string(n_max));
    long last_fail = 0;
    for (long n = n_max; n >= 1; --n) {
        if (!holds(n)) {
            last_fail = n;
            break;
        }
    }
    h.hitting_time = last_fail + 1;
    h.k_value = constant * std::exp(lambda1 * static_cast<double>(h.hitting_time));
    return h;
}

std::vector<std::size_t> expanding_maps(const cocycle& c) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < c.maps().size(); ++k)
        if (c.maps()[k].min_expansion() > 1.0) out.push_back(k);
    return out;
}

} // namespace rdlab
