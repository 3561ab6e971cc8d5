#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rdlab {

// Affine branch x -> slope * x + intercept on [lo, hi).
struct branch {
    double lo = 0.0;
    double hi = 1.0;
    double slope = 1.0;
    double intercept = 0.0;

    double apply(double x) const { return slope * x + intercept; }
    double image_lo() const { return slope > 0 ? apply(lo) : apply(hi); }
    double image_hi() const { return slope > 0 ? apply(hi) : apply(lo); }
};

struct preimage {
    double x = 0.0;
    double derivative = 0.0;  // |T'(x)|
};

// Nonsingular piecewise-linear map of [0,1) given by its branches.
class piecewise_linear_map {
public:
    piecewise_linear_map() = default;
    // Validates the partition, nonzero slopes and images inside [0,1].
    piecewise_linear_map(std::string name, std::vector<branch> branches, bool circle = false);

    const std::string& name() const { return name_; }
    const std::vector<branch>& branches() const { return branches_; }
    bool is_circle_map() const { return circle_; }

    // Branch containing x under the half-open convention.
    const branch& branch_at(double x) const;
    double operator()(double x) const;

    std::vector<preimage> preimages(double y) const;

    // lambda(T) = min |slope|
    double min_expansion() const;
    // N(T) = number of branches
    std::size_t branch_count() const { return branches_.size(); }

    // Every slope is +-2^k and every branch datum is a multiple of 2^-64,
    // so orbits can be followed exactly in 64-bit fixed point.
    bool is_dyadic() const;

private:
    std::string name_;
    std::vector<branch> branches_;
    bool circle_ = false;
};

piecewise_linear_map doubling_map();
// x -> (E(2x) + {4x}) / 2: doubling inside each half of [0,1).
piecewise_linear_map buzzi_t1_map();
piecewise_linear_map identity_map();

// Looks up "doubling", "buzzi_t1" or "identity"; throws config_error otherwise.
piecewise_linear_map catalog_map(std::string_view name);
std::vector<std::string> catalog_names();

// Parses "p/q" or a decimal literal.
double parse_rational(std::string_view text);

} // namespace rdlab
