#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rdlab/cocycle.hpp"
#include "rdlab/equivariant.hpp"
#include "rdlab/observable.hpp"
#include "rdlab/step_function.hpp"

namespace rdlab {

// Points with law v dm, v a step density.
std::vector<double> sample_mu(const step_function& density, std::size_t count, std::uint64_t seed);

struct birkhoff_options {
    std::size_t trials = 1000;
    long n = 1000;
    std::vector<long> checkpoints;  // times at which S_n is stored; default {n}
    bool keep_trajectories = false; // S_1..S_n of component 0 per trial
    unsigned threads = 1;
    std::uint64_t seed = 0;
    bool force_double = false;      // use double orbits even for dyadic maps
};

// S_n psi(omega, x) = sum_{k<n} psi_{k}(T^k x) for independent x ~ mu at `start`.
struct trial_batch {
    int dimension = 1;
    long start = 0;
    std::size_t trials = 0;
    bool exact_arithmetic = false;
    std::vector<long> checkpoints;
    std::vector<double> sums;  // [(checkpoint * trials + trial) * dimension + component]
    std::vector<std::vector<double>> trajectories;

    double sum(std::size_t checkpoint, std::size_t trial, int component = 0) const {
        return sums[(checkpoint * trials + trial) * static_cast<std::size_t>(dimension) +
                    static_cast<std::size_t>(component)];
    }
    std::vector<double> column(std::size_t checkpoint, int component = 0) const;
};

// obs must cover start..start+n-1 and the path the same fibers.
trial_batch birkhoff(const cocycle& c, const base_path& p, const fiber_observable& obs, const step_function& density,
                     long start, const birkhoff_options& opt);

// Same sums from given starting points, in double precision; returns
// S_n per point (component-major per point).
std::vector<double> birkhoff_points(const cocycle& c, const base_path& p, const fiber_observable& obs, long start,
                                    std::span<const double> points, long n);

struct variance_point {
    long n = 0;
    double value = 0.0;      // (1/n) mean S_n^2
    double std_error = 0.0;
};

// Requires at least 1000 trials.
std::vector<variance_point> variance_growth(const trial_batch& batch, int component = 0);

struct clt_report {
    double ks = 0.0;
    double second_moment = 0.0;  // E z^2, 1 for the normal law
    double fourth_moment = 0.0;  // E z^4, 3 for the normal law
    double threshold = 0.03;
    bool degenerate = false;
    bool pass = false;
};

// z = S_n / sqrt(n sigma2) against the standard normal.
clt_report clt_diagnostics(std::span<const double> sums, long n, double sigma2, double threshold = 0.03);

struct lil_report {
    double epsilon = 0.5;
    std::vector<double> quarter_violation;  // fraction of (trial, n) above the envelope, per quarter of [3, n]
    double final_quarter_violation = 0.0;
    double max_excursion = 0.0;             // max |S_n| / sqrt(2 sigma2 n log log n) over the final quarter
    std::vector<double> per_trial_final;    // per-trial final-quarter violation fraction
};

lil_report lil_envelope(const std::vector<std::vector<double>>& trajectories, double sigma2, double epsilon = 0.5);

} // namespace rdlab
