#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rdlab/base.hpp"
#include "rdlab/cocycle.hpp"

namespace rdlab {

struct suspension_experiment {
    double delta = 0.5;
    std::uint64_t symbol_cap = 1'000'000;
    bool identity_interior = false;  // identity in place of T1 below the roof top
    std::uint64_t seed = 0;

    cocycle make_cocycle() const;
};

// n_c(omega, i) = h(omega) - i
inline long n_c(const base_state& s) { return static_cast<long>(s.symbol - s.counter); }

// 1 if n < n_c, else 0 (n = 0 gives int psi^2 dm = 1).
inline int exact_correlation(const base_state& s, long n) { return n < n_c(s) ? 1 : 0; }

// int (L^n psi) psi dm along the path by the step calculus, psi = 2 1_[0,1/2) - 1.
double operator_correlation(const cocycle& c, const base_path& p, long n);

struct blowup_options {
    std::vector<long> n_grid{100, 1'000, 10'000};
    std::size_t base_samples = 100;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    long bound = 0;  // > 0 replaces n_c by min(n_c, bound)
};

struct blowup_report {
    std::vector<long> n_grid;
    std::vector<double> mean_v;          // (1/N) sum_{n<N} min(n_c o sigma^n, N - n), averaged
    std::vector<double> second_moment;   // (1/N) E (S_N psi)^2 = 2 v - 1, averaged
    std::vector<std::vector<double>> per_sample_v;  // [sample][N index]
    double slope_v = 0.0;                // log-log slope of mean_v
    double slope_second_moment = 0.0;    // log-log slope of second_moment
    double growth_factor = 0.0;          // second_moment(last N) / second_moment(first N)
    double fraction_increasing = 0.0;    // samples with v(last N) > v(first N)
};

blowup_report variance_blowup(const suspension_experiment& exp, const blowup_options& opt);

// (1/N) sum_{n<N} min(n_c o sigma^n, N - n) on a single path.
double moving_average_nc(const base_path& p, long n, long bound = 0);

struct maker_options {
    std::vector<long> levels{1, 10};     // truncation levels M
    std::vector<long> n_grid{100, 1'000, 10'000};
    std::size_t base_samples = 100;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct maker_level {
    long level = 0;
    double expectation = 0.0;            // int min(n_c, M) dP
    std::vector<double> mean;            // (1/N) sum min(n_c, M) o sigma^n per N, averaged
    std::vector<double> std_error;
    bool within_3sigma = true;           // at the largest N
};

struct maker_report {
    std::vector<long> n_grid;
    std::vector<double> untruncated;     // moving average of min(n_c, N - n)
    std::vector<maker_level> levels;
};

maker_report maker_check(const suspension_experiment& exp, const maker_options& opt);

// int min(n_c, M) dP under the normalized suspension measure.
double truncated_nc_mean(const base_sampler& sampler, long level);

struct tail_report {
    double exponent = 0.0;               // fitted slope of log P(n_c = N) vs log N
    double expected = 0.0;               // -(1 + delta)
    double r2 = 0.0;
    std::size_t samples = 0;
    std::vector<double> bin_center;
    std::vector<double> pmf;
    bool cutoff_visible = false;         // mass reaches the symbol cap
};

// Throws certification_error on insufficient tail mass.
tail_report tail_check(const suspension_experiment& exp, std::size_t samples);

} // namespace rdlab
