#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdlab/cocycle.hpp"
#include "rdlab/equivariant.hpp"
#include "rdlab/monte_carlo.hpp"
#include "rdlab/observable.hpp"

namespace rdlab {

// d x d matrix stored row-major.
using small_matrix = std::vector<double>;

struct correlation_table {
    int dimension = 1;
    long fiber = 0;
    // c_n[a][b] = int L^n(psi^a_j) psi^b_{j+n} dmu_{j+n}, n = 0..n_max
    std::vector<small_matrix> c;
    // the pushed image vanished (to rounding) at this n, so later terms are 0
    std::optional<long> terminated_at;
    // |c_n| <= C_var e^{-lambda' n} K^2 ||psi_j||_BV ||psi_{j+n}||_BV with K from the decay fit
    std::vector<bool> within_bound;

    double scalar(long n) const { return c[static_cast<std::size_t>(n)][0]; }
};

// obs centered; eq and obs cover fibers..fiber+n_max.
correlation_table correlations(const equivariant_data& eq, const cocycle& c, const base_path& p,
                               const fiber_observable& obs, long fiber, long n_max,
                               const std::optional<decay_estimate>& decay = std::nullopt,
                               const apply_options& opt = {});

struct sigma_squared_options {
    long n_max = 200;          // correlation lags per fiber
    double tail_tol = 1e-8;    // certified tail bound per fiber
    unsigned threads = 1;
    apply_options apply{};
};

struct sigma_squared_result {
    int dimension = 1;
    small_matrix value;        // Birkhoff average of the per-fiber Green-Kubo sums
    small_matrix std_error;
    std::vector<double> eigenvalues;
    bool psd = true;           // eigenvalues >= -1e-8
    bool certified = true;     // every fiber's series tail certified
    std::size_t fibers = 0;
    std::size_t uncertified_fibers = 0;
    double max_tail_bound = 0.0;
    double scaling_value = 0.0;  // max over fibers of K ||psi_j||_BV
    std::vector<double> per_fiber;      // scalar (0,0) term per fiber
    std::vector<double> running_mean;   // running mean of per_fiber
    std::string diagnostic;

    double scalar() const { return value[0]; }
};

// Fibers first..first+count-1; eq and obs must cover first..first+count-1+n_max.
sigma_squared_result sigma_squared(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                   const fiber_observable& obs, long first, std::size_t count,
                                   const std::optional<decay_estimate>& decay, const sigma_squared_options& opt = {});

struct martingale_options {
    double tol = 1e-9;         // certified bound on the truncated chi tail
    long n_chi_max = 2000;
    unsigned threads = 1;
    apply_options apply{};
};

// m_j = psi_j + chi_j - chi_{j+1} o T_j with chi_j = sum_{n=1}^{N} L^n_{j-n} psi_{j-n}.
struct martingale_decomposition {
    long first = 0;            // m available on first..last
    long last = 0;
    long truncation = 0;       // N
    double tail_bound = 0.0;   // D~ sup||psi||_BV sum_{n>N} e^{-lambda' n}
    std::vector<step_function> chi;       // first..last+1
    std::vector<step_function> m;         // first..last
    std::vector<double> residual;         // ||L_j m_j||_1
    double k1 = 0.0;           // max{K, N(T), D~}
    double k_tilde = 0.0;      // K1^{7/2}
    double scaling_value = 0.0;  // K~ max ||psi||_BV

    const step_function& chi_at(long j) const { return chi[static_cast<std::size_t>(j - first)]; }
    const step_function& m_at(long j) const { return m[static_cast<std::size_t>(j - first)]; }
    double max_residual() const;
    double max_m_l1() const;
    double max_chi_sup() const;
};

// Scalar observable. eq and obs must cover first-N..last+1; N is the smallest
// truncation certified by the decay fit, else certification_error.
// Smallest N with D~ sup||psi||_BV sum_{n>N} e^{-lambda' n} < tol.
long chi_truncation(const decay_estimate& decay, double sup_bv, const martingale_options& opt = {});

martingale_decomposition martingale_decompose(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                              const fiber_observable& obs, long first, long last,
                                              const decay_estimate& decay, const martingale_options& opt = {});

// int m_j^2 dmu_j for j in [from, to].
std::vector<double> martingale_variances(const martingale_decomposition& md, const equivariant_data& eq, long from,
                                         long to);

// sup |(S_n psi - S_n m) - (chi_{j+n} o T^n - chi_j)| as step functions, n small.
double telescoping_defect(const martingale_decomposition& md, const cocycle& c, const base_path& p,
                          const fiber_observable& obs, long fiber, long n);

struct marap_report {
    double max_gap = 0.0;      // sup over points and n of |S_n psi - S_n m|
    double bound = 0.0;        // 2 sup |chi|
    bool holds = true;
};

// Pointwise along double-precision orbits from the given points.
marap_report marap_check(const martingale_decomposition& md, const cocycle& c, const base_path& p,
                         const fiber_observable& obs, long fiber, std::span<const double> points, long n_max);

// Coboundary verdict: Sigma^2 < 1e-6 and max ||m||_1 < 1e-6.
bool is_coboundary(double sigma2, double max_m_l1);

// int e^{it S_n psi} dmu_j computed as int L~^{it,n}(v_j) dm, component 0.
std::complex<double> characteristic_function(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                             const fiber_observable& obs, long fiber, long n, double t,
                                             const apply_options& opt = {});

// ||L^{it,k} 1||_BV for k = 0..n_max, normalized operator.
std::vector<double> twisted_bv_trace(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                     const fiber_observable& obs, long fiber, long n_max, double t,
                                     const apply_options& opt = {});

struct twisted_options {
    std::vector<double> t_grid{-0.1, -0.05, 0.05, 0.1};
    double rho = 0.1;
    long n = 100;               // time of the characteristic-function comparison
    long n_max = 200;           // length of the BV trace
    std::size_t trials = 100'000;
    unsigned threads = 1;
    std::uint64_t seed = 0;
};

struct twisted_point {
    double t = 0.0;
    std::complex<double> operator_cf;
    std::complex<double> empirical_cf;
    double abs_diff = 0.0;
    std::vector<double> bv_trace;
    double bv_initial = 0.0;    // max over the first tenth of the trace
    double bv_final = 0.0;      // max over the last tenth
};

struct twisted_report {
    std::vector<twisted_point> points;
    double tolerance = 0.0;     // 5 / sqrt(trials)
    double max_abs_diff = 0.0;
    bool agree = true;
    bool bounded = true;        // bv_final <= 2 bv_initial for every t
};

twisted_report twisted_checks(const equivariant_data& eq, const cocycle& c, const base_path& p,
                              const fiber_observable& obs, long fiber, const twisted_options& opt);

struct decorrelation_options {
    std::vector<long> left_blocks{2, 2};   // block lengths b_{j+1} - b_j
    std::vector<long> right_blocks{2, 2};
    std::vector<double> t_left{0.5, -0.5};
    std::vector<double> t_right{0.5, 0.5};
    std::vector<long> k_grid{1, 2, 3, 4, 6, 8, 10, 12, 16, 20, 24, 28, 32};
};

struct decorrelation_report {
    std::vector<long> k;
    std::vector<double> difference;  // |joint - product|
    double rate = 0.0;               // fitted c, infinite when every difference vanishes
    double prefactor = 0.0;          // fitted C^{n+m}
    bool instant = false;            // all differences zero
};

decorrelation_report decorrelation_check(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                         const fiber_observable& obs, long fiber, const decorrelation_options& opt);

struct covariance_report {
    std::vector<long> n_grid;
    std::vector<long> k_grid;
    std::vector<double> cov;     // [n_index * k_grid.size() + k_index], Cov(v.A_n, v.A_{n+k})
    double c0 = 0.0;
    double r = 0.0;
    bool uniform_rate = true;    // false when no r < 1 fits
};

covariance_report covariance_decay_check(const equivariant_data& eq, const cocycle& c, const base_path& p,
                                         const fiber_observable& obs, std::span<const double> v,
                                         const std::vector<long>& n_grid, const std::vector<long>& k_grid);

} // namespace rdlab
