#pragma once

#include <cstdint>
#include <vector>

#include "rdlab/cocycle.hpp"
#include "rdlab/rng.hpp"
#include "rdlab/step_function.hpp"

namespace rdlab {

// Orbit arithmetic. For dyadic maps (slopes +-2^k, breakpoints and intercepts
// multiples of 2^-64) a point is the 64-bit window X = floor(x 2^64) of an
// infinite binary expansion whose unread bits are drawn lazily, so long
// orbits of expanding maps stay exact samples of Lebesgue-continuous initial
// laws. Other maps run in double precision.
struct fixed_point {
    std::uint64_t x = 0;
};

class compiled_map {
public:
    explicit compiled_map(const piecewise_linear_map& map);

    bool exact() const { return exact_; }
    const piecewise_linear_map& map() const { return *map_; }

    std::uint64_t apply(std::uint64_t x, bit_source& bits) const;
    double apply(double x) const { return (*map_)(x); }

private:
    const piecewise_linear_map* map_;
    bool exact_ = false;
    std::vector<std::uint64_t> lo_;
    std::vector<unsigned> shift_;
    std::vector<bool> negative_;
    std::vector<std::uint64_t> intercept_;
};

// Step function with breakpoints also stored as ceil(c 2^64).
class compiled_step {
public:
    compiled_step() = default;
    explicit compiled_step(const step_function& f);

    double operator()(std::uint64_t x) const;
    double operator()(double x) const { return values_[piece(x)]; }

private:
    std::size_t piece(double x) const;

    std::vector<double> cuts_;
    std::vector<std::uint64_t> fixed_cuts_;
    std::vector<double> values_;
};

// ceil(c 2^64) for c in [0,1); x >= c iff floor(x 2^64) >= this value for
// dyadic c, and up to a 2^-64 event otherwise.
std::uint64_t fixed_threshold(double c);
bool is_fixed_dyadic(double c);

// Inverse-CDF sampler for a nonnegative step density.
class density_sampler {
public:
    explicit density_sampler(const step_function& density);

    double sample(engine& g) const;
    std::uint64_t sample_fixed(bit_source& bits) const;

private:
    std::size_t pick(double u) const;

    step_function density_;
    std::vector<double> cdf_;
};

} // namespace rdlab
