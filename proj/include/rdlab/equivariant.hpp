#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rdlab/cocycle.hpp"
#include "rdlab/step_function.hpp"

namespace rdlab {

struct pullback_options {
    long n_max = 200;
    double tol = 1e-10;     // l1 distance between successive pullbacks
    int patience = 3;       // consecutive steps below tol before stopping
    bool require_convergence = true;
    apply_options apply{};
};

// Equivariant densities v0 on the fibers first..last of a path, with
// mu_j = v0_j dm. The density at `first` is a pullback L^n_{sigma^-n} 1; later
// fibers are its exact pushforwards, so L_j v0_j = v0_{j+1} along the window.
class equivariant_data {
public:
    long first_fiber() const { return first_; }
    long last_fiber() const { return first_ + static_cast<long>(densities_.size()) - 1; }
    bool covers(long j) const { return j >= first_fiber() && j <= last_fiber(); }

    const step_function& density(long j) const;
    // l(omega) = essinf v0
    double lower_bound(long j) const { return essinf(density(j)); }
    double mean(long j, const step_function& h) const { return (h * density(j)).integral(); }

    // ||L^n_{sigma^-n} 1 - L^{n-1}_{sigma^-(n-1)} 1||_1 for n = 1..truncation
    const std::vector<double>& convergence_trace() const { return trace_; }
    long converged_at() const { return converged_at_; }
    long truncation() const { return truncation_; }
    bool converged() const { return converged_; }
    double truncation_error() const { return trace_.empty() ? 0.0 : trace_.back(); }
    // ||L_j v0_j - v0_{j+1}||_1
    double equivariance_residual(long j) const;
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    long first_ = 0;
    std::vector<step_function> densities_;
    std::vector<double> residuals_;
    std::vector<double> trace_;
    long converged_at_ = 0;
    long truncation_ = 0;
    bool converged_ = false;
    std::vector<std::string> warnings_;

    friend equivariant_data pullback_density(const cocycle&, const base_path&, long, long, const pullback_options&);
};

// Requires p.first() <= first - opt.n_max.
equivariant_data pullback_density(const cocycle& c, const base_path& p, long first, long last,
                                  const pullback_options& opt = {});

// L^n_j h = L^n(h v0_j) / v0_{j+n}
step_function normalized_apply(const equivariant_data& eq, const cocycle& c, const base_path& p, long j, long n,
                               step_function h, const apply_options& opt = {});

// Pi(j) h = h - (int h dmu_j) 1
step_function project_zero_mean(const equivariant_data& eq, long j, const step_function& h);

// Haar functions on dyadic scales plus random step functions.
std::vector<step_function> default_test_set(std::uint64_t seed, std::size_t random_count = 24, int max_scale = 12);

struct decay_estimate {
    double rate = 0.0;        // lambda'
    double prefactor = 0.0;   // D~ at `fiber`
    double k_value = 0.0;     // K = D~ + C_var
    long fiber = 0;
    std::vector<double> worst_ratio;  // n = 0..n_max over the test set
    std::size_t test_count = 0;
    bool mixing = false;       // rate > 1e-9
    bool finite_time = false;  // every test function annihilated after one step
};

// Worst ratio ||L^n Pi h||_BV / ||Pi h||_BV over the test set for n = 0..n_max.
std::vector<double> worst_decay_ratios(const equivariant_data& eq, const cocycle& c, const base_path& p, long fiber,
                                       std::span<const step_function> tests, long n_max);

// Fits lambda' on the tail half of the worst-ratio curve and takes the
// smallest prefactor D~ = (1 + C_var) max_n ratio_n e^{lambda' n}.
decay_estimate fit_decay(const equivariant_data& eq, const cocycle& c, const base_path& p, long fiber,
                         std::span<const step_function> tests, long n_max);

// D~ at another fiber for a fixed rate.
double decay_prefactor(const equivariant_data& eq, const cocycle& c, const base_path& p, long fiber,
                       std::span<const step_function> tests, long n_max, double rate);

struct adapted_norm_value {
    double value = 0.0;      // ||phi||_omega
    double sup_term = 0.0;   // sup_n ||L^n Pi phi||_BV e^{lambda' n}
    double mean_term = 0.0;  // |int phi dmu|
    long argmax = 0;
};

// Truncated at n_max; throws certification_error when the last quarter of
// the window still exceeds the maximum over the first three quarters.
adapted_norm_value adapted_norm(const equivariant_data& eq, double rate, const cocycle& c, const base_path& p,
                                long fiber, const step_function& phi, long n_max);

struct hitting_estimate {
    long hitting_time = 0;   // N_omega
    double k_value = 0.0;    // C e^{lambda_1 N_omega}
    std::vector<long> counts;  // N_n(omega), n = 0..n_max
};

// N_omega = min{N >= 1 : N_n >= a n / 2 for all N <= n <= n_max}, counting
// fibers whose map index lies in `expanding`.
hitting_estimate k_hitting_estimate(const cocycle& c, const base_path& p, std::span<const std::size_t> expanding,
                                    double a, double lambda1, double constant, long n_max);

// Map indices with lambda(T) > 1.
std::vector<std::size_t> expanding_maps(const cocycle& c);

} // namespace rdlab
