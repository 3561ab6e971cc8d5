#include "rdlab/limit_theorems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "rdlab/errors.hpp"
#include "rdlab/parallel.hpp"
#include "rdlab/stats.hpp"
#include "rdlab/transfer.hpp"

namespace rdlab {

namespace {

// Pushed images whose l1 norm falls below this fraction of the start are
// rounding residue.
constexpr double vanishing = 1e-14;

step_function pushed(const cocycle& c, const base_path& p, long j, const step_function& g, const apply_options& opt) {
    auto out = transfer_apply(c.map_at(p, j), g);
    return opt.coalesce_tol > 0.0 ? out.coalesced(opt.coalesce_tol) : out;
}

complex_step_function pushed_twisted(const cocycle& c, const base_path& p, long j, const step_function& psi, double t,
                                     const complex_step_function& g, const apply_options& opt) {
    auto out = t == 0.0 ? transfer_apply(c.map_at(p, j), g) : twisted_apply(c.map_at(p, j), psi, t, g);
    return opt.coalesce_tol > 0.0 ? out.coalesced(opt.coalesce_tol) : out;
}

double geometric_tail(double rate, long from) {
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return std::exp(-rate * static_cast<double>(from)) / (1.0 - std::exp(-rate));
}

double max_component_bv(const fiber_observable& obs, long j) {
    double m = 0.0;
    for (const auto& f : obs.components(j)) m = std::max(m, f.bv());
    return m;
}

} // namespace

correlation_table correlations(const equivariant_data& eq, const cocycle& c, const base_path& p,
                               const fiber_observable& obs, long fiber, long n_max,
                               const std::optional<decay_estimate>& decay, const apply_options& opt) {
    const int d = obs.dimension();
    const auto du = static_cast<std::size_t>(d);
    correlation_table t;
    t.dimension = d;
    t.fiber = fiber;
    t.c.assign(static_cast<std::size_t>(n_max + 1), small_matrix(du * du, 0.0));

    std::vector<step_function> g;
    std::vector<double> start_l1;
    for (const auto& f : obs.components(fiber)) {
        g.push_back(f * eq.density(fiber));
        start_l1.push_back(g.back().l1());
    }
    for (long n = 0; n <= n_max; ++n) {
        bool alive = false;
        for (std::size_t a = 0; a < du; ++a) {
            if (!(g[a].l1() > vanishing * start_l1[a])) continue;
            alive = true;
            for (std::size_t b = 0; b < du; ++b)
                t.c[static_cast<std::size_t>(n)][a * du + b] = (g[a] * obs.at(fiber + n, static_cast<int>(b))).integral();
        }
        if (!alive) {
            t.terminated_at = n;
            break;
        }
        if (n < n_max)
            for (auto& ga : g) ga = pushed(c, p, fiber + n, ga, opt);
    }
    if (decay) {
        const double k = decay->k_value;
        const double here = max_component_bv(obs, fiber);
        for (long n = 0; n <= n_max; ++n) {
            const double bound =
                c_var * std::exp(-decay->rate * static_cast<double>(n)) * k * k * here * max_component_bv(obs, fiber + n);
            double worst = 0.0;
            for (double v : t.c[static_cast<std::size_t>(n)]) worst = std::max(worst, std::abs(v));
            t.within_bound.push_back(worst <= bound * (1.0 + 1e-9) + 1e-15);
        }
    }
    return t;
}

sigma_squared_result sigma_squared(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                   const fiber_observable& obs, long first, std::size_t count,
                                   const std::optional<decay_estimate>& decay, const sigma_squared_options& opt) {
    if (count == 0) throw config_error("sigma_squared: need at least one fiber");
    const int d = obs.dimension();
    const auto du = static_cast<std::size_t>(d);
    const double obs_bv = obs.max_bv();
    std::vector<small_matrix> terms(count);
    std::vector<double> tails(count, 0.0);
    std::vector<char> certified(count, 1);

    parallel_for(count, opt.threads, [&](std::size_t i) {
        const long j = first + static_cast<long>(i);
        const auto tab = correlations(eq, c, p, obs, j, opt.n_max, decay, opt.apply);
        small_matrix s = tab.c[0];
        for (long n = 1; n <= opt.n_max; ++n) {
            const auto& cn = tab.c[static_cast<std::size_t>(n)];
            for (std::size_t a = 0; a < du; ++a)
                for (std::size_t b = 0; b < du; ++b) s[a * du + b] += cn[a * du + b] + cn[b * du + a];
        }
        terms[i] = std::move(s);
        if (tab.terminated_at) return;
        // the reference constants must hold on this fiber's own lags
        const bool consistent = std::find(tab.within_bound.begin(), tab.within_bound.end(), false) == tab.within_bound.end();
        double tail = std::numeric_limits<double>::infinity();
        if (decay && decay->mixing && consistent)
            tail = 2.0 * c_var * decay->k_value * decay->k_value * max_component_bv(obs, j) * obs_bv *
                   geometric_tail(decay->rate, opt.n_max + 1);
        tails[i] = tail;
        certified[i] = tail <= opt.tail_tol;
    });

    sigma_squared_result r;
    r.dimension = d;
    r.fibers = count;
    r.value.assign(du * du, 0.0);
    r.std_error.assign(du * du, 0.0);
    for (std::size_t e = 0; e < du * du; ++e) {
        std::vector<double> col(count);
        for (std::size_t i = 0; i < count; ++i) col[i] = terms[i][e];
        const auto m = sample_moments(col);
        r.value[e] = m.mean;
        r.std_error[e] = m.std_error;
        if (e == 0) r.per_fiber = col;
    }
    // symmetrize rounding
    for (std::size_t a = 0; a < du; ++a)
        for (std::size_t b = a + 1; b < du; ++b) {
            const double v = 0.5 * (r.value[a * du + b] + r.value[b * du + a]);
            r.value[a * du + b] = r.value[b * du + a] = v;
        }
    Eigen::MatrixXd mat(d, d);
    for (std::size_t a = 0; a < du; ++a)
        for (std::size_t b = 0; b < du; ++b) mat(static_cast<long>(a), static_cast<long>(b)) = r.value[a * du + b];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(mat, Eigen::EigenvaluesOnly);
    for (long k = 0; k < d; ++k) r.eigenvalues.push_back(solver.eigenvalues()(k));
    r.psd = r.eigenvalues.front() >= -1e-8;

    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        acc += r.per_fiber[i];
        r.running_mean.push_back(acc / static_cast<double>(i + 1));
        r.max_tail_bound = std::max(r.max_tail_bound, tails[i]);
        if (!certified[i]) ++r.uncertified_fibers;
    }
    r.certified = r.uncertified_fibers == 0;
    if (decay) r.scaling_value = decay->k_value * obs_bv;
    if (!r.certified) {
        const std::size_t eighth = std::max<std::size_t>(1, count / 8);
        r.diagnostic = "series tail not certifiable at " + std::to_string(r.uncertified_fibers) + " of " +
                       std::to_string(count) + " fibers (lag window " + std::to_string(opt.n_max) +
                       "); running mean of truncated sums " + std::to_string(r.running_mean[eighth - 1]) + " after " +
                       std::to_string(eighth) + " fibers, " + std::to_string(r.running_mean.back()) + " after " +
                       std::to_string(count);
    }
    return r;
}

double martingale_decomposition::max_residual() const {
    return residual.empty() ? 0.0 : *std::max_element(residual.begin(), residual.end());
}

double martingale_decomposition::max_m_l1() const {
    double v = 0.0;
    for (const auto& f : m) v = std::max(v, f.l1());
    return v;
}

double martingale_decomposition::max_chi_sup() const {
    double v = 0.0;
    for (const auto& f : chi) v = std::max(v, f.sup());
    return v;
}

long chi_truncation(const decay_estimate& decay, double sup_bv, const martingale_options& opt) {
    if (!decay.mixing) throw certification_error("martingale_decompose: decay fit is not mixing, chi tail uncertifiable");
    long n = 1;
    while (decay.prefactor * sup_bv * geometric_tail(decay.rate, n + 1) >= opt.tol) {
        if (++n > opt.n_chi_max)
            throw certification_error("martingale_decompose: chi tail not certified below " + std::to_string(opt.tol) +
                                      " within " + std::to_string(opt.n_chi_max) + " terms");
    }
    return n;
}

martingale_decomposition martingale_decompose(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                              const fiber_observable& obs, long first, long last,
                                              const decay_estimate& decay, const martingale_options& opt) {
    if (obs.dimension() != 1) throw config_error("martingale_decompose: scalar observables only");
    if (last < first) throw config_error("martingale_decompose: empty fiber range");
    if (!decay.mixing) throw certification_error("martingale_decompose: decay fit is not mixing, chi tail uncertifiable");

    const double sup_bv = obs.max_bv();
    martingale_decomposition md;
    md.first = first;
    md.last = last;
    const long n = chi_truncation(decay, sup_bv, opt);
    md.truncation = n;
    md.tail_bound = decay.prefactor * sup_bv * geometric_tail(decay.rate, n + 1);
    if (!eq.covers(first - n)) throw window_error(first - n, eq.first_fiber(), eq.last_fiber());
    if (!obs.covers(first - n)) throw window_error(first - n, obs.first_fiber(), obs.last_fiber());
    if (!eq.covers(last + 1)) throw window_error(last + 1, eq.first_fiber(), eq.last_fiber());

    const auto count = static_cast<std::size_t>(last - first + 2);
    md.chi.resize(count);
    parallel_for(count, opt.threads, [&](std::size_t i) {
        const long j = first + static_cast<long>(i);
        step_function u;  // chi v0 at the current fiber
        for (long k = j - n; k < j; ++k) u = pushed(c, p, k, u + obs.at(k) * eq.density(k), opt.apply);
        md.chi[i] = divide(u, eq.density(j));
    });
    md.m.resize(count - 1);
    md.residual.resize(count - 1);
    parallel_for(count - 1, opt.threads, [&](std::size_t i) {
        const long j = first + static_cast<long>(i);
        md.m[i] = obs.at(j) + md.chi[i] - koopman_compose(md.chi[i + 1], c.map_at(p, j));
        md.residual[i] = normalized_apply(eq, c, p, j, 1, md.m[i], opt.apply).l1();
    });

    double nmax = 0.0;
    for (const auto& map : c.maps()) nmax = std::max(nmax, static_cast<double>(map.branch_count() + 1));
    md.k1 = std::max({decay.k_value, nmax, decay.prefactor});
    md.k_tilde = std::pow(md.k1, 3.5);
    md.scaling_value = md.k_tilde * sup_bv;
    return md;
}

std::vector<double> martingale_variances(const martingale_decomposition& md, const equivariant_data& eq, long from,
                                         long to) {
    if (from < md.first || to > md.last) throw window_error(from < md.first ? from : to, md.first, md.last);
    std::vector<double> out;
    for (long j = from; j <= to; ++j) {
        const auto& m = md.m_at(j);
        out.push_back((m * m * eq.density(j)).integral());
    }
    return out;
}

double telescoping_defect(const martingale_decomposition& md, const cocycle& c, const base_path& p,
                          const fiber_observable& obs, long fiber, long n) {
    step_function gap;
    for (long k = 0; k < n; ++k) gap = gap + koopman_power(c, p, fiber, k, obs.at(fiber + k) - md.m_at(fiber + k));
    const auto rhs = koopman_power(c, p, fiber, n, md.chi_at(fiber + n)) - md.chi_at(fiber);
    return sup_distance(gap, rhs);
}

marap_report marap_check(const martingale_decomposition& md, const cocycle& c, const base_path& p,
                         const fiber_observable& obs, long fiber, std::span<const double> points, long n_max) {
    marap_report r;
    r.bound = 2.0 * md.max_chi_sup();
    n_max = std::min(n_max, md.last - fiber + 1);
    for (double x0 : points) {
        double x = x0, gap = 0.0;
        for (long k = 0; k < n_max; ++k) {
            const long j = fiber + k;
            gap += obs.at(j)(x) - md.m_at(j)(x);
            r.max_gap = std::max(r.max_gap, std::abs(gap));
            x = c.map_at(p, j)(x);
        }
    }
    r.holds = r.max_gap <= r.bound * (1.0 + 1e-9) + 1e-12;
    return r;
}

bool is_coboundary(double sigma2, double max_m_l1) { return sigma2 < 1e-6 && max_m_l1 < 1e-6; }

std::complex<double> characteristic_function(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                             const fiber_observable& obs, long fiber, long n, double t,
                                             const apply_options& opt) {
    auto g = to_complex(eq.density(fiber));
    for (long k = 0; k < n; ++k) g = pushed_twisted(c, p, fiber + k, obs.at(fiber + k), t, g, opt);
    return g.integral();
}

std::vector<double> twisted_bv_trace(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                     const fiber_observable& obs, long fiber, long n_max, double t,
                                     const apply_options& opt) {
    std::vector<double> out;
    auto g = to_complex(eq.density(fiber));
    for (long k = 0; k <= n_max; ++k) {
        if (k > 0) g = pushed_twisted(c, p, fiber + k - 1, obs.at(fiber + k - 1), t, g, opt);
        const auto h = combine(g, eq.density(fiber + k), [](const complex& a, double b) { return a / b; });
        out.push_back(h.bv());
    }
    return out;
}

twisted_report twisted_checks(const equivariant_data& eq, const cocycle& c, const base_path& p,
                              const fiber_observable& obs, long fiber, const twisted_options& opt) {
    for (double t : opt.t_grid)
        if (std::abs(t) > opt.rho) throw config_error("twisted_checks: |t| exceeds rho");
    birkhoff_options bo;
    bo.trials = opt.trials;
    bo.n = opt.n;
    bo.threads = opt.threads;
    bo.seed = substream_seed(opt.seed, "twisted.mc");
    const auto batch = birkhoff(c, p, obs, eq.density(fiber), fiber, bo);
    const auto sums = batch.column(0);

    twisted_report r;
    r.tolerance = 5.0 / std::sqrt(static_cast<double>(opt.trials));
    const long tenth = std::max(1L, opt.n_max / 10);
    for (double t : opt.t_grid) {
        twisted_point pt;
        pt.t = t;
        pt.operator_cf = characteristic_function(eq, c, p, obs, fiber, opt.n, t);
        std::vector<double> re(sums.size()), im(sums.size());
        for (std::size_t k = 0; k < sums.size(); ++k) {
            re[k] = std::cos(t * sums[k]);
            im[k] = std::sin(t * sums[k]);
        }
        const double nn = static_cast<double>(sums.size());
        pt.empirical_cf = {pairwise_sum(re) / nn, pairwise_sum(im) / nn};
        pt.abs_diff = std::abs(pt.operator_cf - pt.empirical_cf);
        pt.bv_trace = twisted_bv_trace(eq, c, p, obs, fiber, opt.n_max, t);
        for (long k = 0; k <= opt.n_max; ++k) {
            const double v = pt.bv_trace[static_cast<std::size_t>(k)];
            if (k <= tenth) pt.bv_initial = std::max(pt.bv_initial, v);
            if (k >= opt.n_max - tenth) pt.bv_final = std::max(pt.bv_final, v);
        }
        r.max_abs_diff = std::max(r.max_abs_diff, pt.abs_diff);
        r.bounded = r.bounded && pt.bv_final <= 2.0 * pt.bv_initial;
        r.points.push_back(std::move(pt));
    }
    r.agree = r.max_abs_diff <= r.tolerance;
    return r;
}

namespace {

// int e^{i sum_l t_l psi_l o T^l} dmu for a twist schedule starting at `fiber`.
std::complex<double> twisted_expectation(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                         const fiber_observable& obs, long fiber, const std::vector<double>& twist) {
    auto g = to_complex(eq.density(fiber));
    long last = static_cast<long>(twist.size()) - 1;
    while (last >= 0 && twist[static_cast<std::size_t>(last)] == 0.0) --last;
    for (long l = 0; l <= last; ++l)
        g = pushed_twisted(c, p, fiber + l, obs.at(fiber + l), twist[static_cast<std::size_t>(l)], g, {});
    return g.integral();
}

} // namespace

decorrelation_report decorrelation_check(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                         const fiber_observable& obs, long fiber, const decorrelation_options& opt) {
    if (opt.left_blocks.size() != opt.t_left.size() || opt.right_blocks.size() != opt.t_right.size())
        throw config_error("decorrelation_check: one twist per block");
    if (opt.left_blocks.empty() || opt.right_blocks.empty())
        throw config_error("decorrelation_check: need blocks on both sides");
    long left_len = 0, right_len = 0;
    for (long b : opt.left_blocks) left_len += b;
    for (long b : opt.right_blocks) right_len += b;

    decorrelation_report r;
    for (long k : opt.k_grid) {
        const auto total = static_cast<std::size_t>(left_len + k + right_len);
        std::vector<double> left(total, 0.0), right(total, 0.0);
        long pos = 0;
        for (std::size_t b = 0; b < opt.left_blocks.size(); ++b)
            for (long l = 0; l < opt.left_blocks[b]; ++l) left[static_cast<std::size_t>(pos++)] = opt.t_left[b];
        pos = left_len + k;
        for (std::size_t b = 0; b < opt.right_blocks.size(); ++b)
            for (long l = 0; l < opt.right_blocks[b]; ++l) right[static_cast<std::size_t>(pos++)] = opt.t_right[b];
        std::vector<double> joint(total);
        for (std::size_t l = 0; l < total; ++l) joint[l] = left[l] + right[l];
        const auto ej = twisted_expectation(eq, c, p, obs, fiber, joint);
        const auto el = twisted_expectation(eq, c, p, obs, fiber, left);
        const auto er = twisted_expectation(eq, c, p, obs, fiber, right);
        r.k.push_back(k);
        r.difference.push_back(std::abs(ej - el * er));
    }
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < r.k.size(); ++i) {
        if (r.difference[i] > 1e-15) {
            xs.push_back(static_cast<double>(r.k[i]));
            ys.push_back(std::log(r.difference[i]));
        }
    }
    if (xs.empty()) {
        r.instant = true;
        r.rate = std::numeric_limits<double>::infinity();
    } else if (xs.size() == 1) {
        r.rate = -ys[0] / xs[0];
    } else {
        r.rate = -least_squares(xs, ys).slope;
    }
    for (std::size_t i = 0; i < xs.size(); ++i)
        r.prefactor = std::max(r.prefactor, std::exp(ys[i] + r.rate * xs[i]));
    return r;
}

covariance_report covariance_decay_check(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                         const fiber_observable& obs, std::span<const double> v,
                                         const std::vector<long>& n_grid, const std::vector<long>& k_grid) {
    const auto d = static_cast<std::size_t>(obs.dimension());
    if (v.size() != d) throw config_error("covariance_decay_check: vector dimension mismatch");
    covariance_report r;
    r.n_grid = n_grid;
    r.k_grid = k_grid;
    const long k_max = k_grid.empty() ? 0 : *std::max_element(k_grid.begin(), k_grid.end());
    std::vector<double> xs, ys;
    for (long n : n_grid) {
        const auto tab = correlations(eq, c, p, obs, n, k_max);
        for (long k : k_grid) {
            double cov = 0.0;
            const auto& ck = tab.c[static_cast<std::size_t>(k)];
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b) cov += v[a] * v[b] * ck[a * d + b];
            r.cov.push_back(cov);
            if (k == 0) r.c0 = std::max(r.c0, std::abs(cov));
            if (k >= 1 && std::abs(cov) > 1e-15) {
                xs.push_back(static_cast<double>(k));
                ys.push_back(std::log(std::abs(cov)));
            }
        }
    }
    if (xs.empty()) {
        r.r = 0.0;
    } else {
        const bool spread = std::any_of(xs.begin(), xs.end(), [&](double x) { return x != xs.front(); });
        r.r = spread ? std::exp(least_squares(xs, ys).slope) : std::exp(ys.front() / xs.front());
        for (std::size_t i = 0; i < xs.size(); ++i) r.c0 = std::max(r.c0, std::exp(ys[i]) / std::pow(r.r, xs[i]));
    }
    r.uniform_rate = r.r < 0.999;
    return r;
}

} // namespace rdlab
