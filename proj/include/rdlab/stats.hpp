#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace rdlab {

struct linear_fit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
};

// Ordinary least squares y = intercept + slope x. Needs at least two distinct x.
linear_fit least_squares(std::span<const double> x, std::span<const double> y);

// Pairwise summation; the result depends only on the order of the input.
double pairwise_sum(std::span<const double> v);

struct moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double std_error = 0.0; // of the mean
    std::size_t count = 0;
};

moments sample_moments(std::span<const double> v);

double normal_cdf(double z);

// Kolmogorov distance sup |F_n - F| of the sample to a continuous cdf.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

// Asymptotic 95% critical value 1.36 / sqrt(n).
double ks_critical_95(std::size_t n);

} // namespace rdlab
