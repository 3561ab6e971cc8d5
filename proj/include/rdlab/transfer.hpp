#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rdlab/maps.hpp"
#include "rdlab/step_function.hpp"

namespace rdlab {

// (Lf)(x) = sum_{Ty=x} f(y)/|T'(y)|, exact for affine branches.
template <class T>
basic_step_function<T> transfer_apply(const piecewise_linear_map& map, const basic_step_function<T>& f) {
    const auto& branches = map.branches();
    std::vector<double> cuts;
    cuts.reserve(2 * branches.size() + f.cuts().size());
    for (const auto& b : branches) {
        cuts.push_back(b.image_lo());
        cuts.push_back(b.image_hi());
        auto first = std::upper_bound(f.cuts().begin(), f.cuts().end(), b.lo);
        for (auto it = first; it != f.cuts().end() && *it < b.hi; ++it) cuts.push_back(b.apply(*it));
    }
    normalize_cuts(cuts);
    std::vector<T> vals(cuts.size() + 1, T{});
    for (std::size_t k = 0; k < vals.size(); ++k) {
        const double lo = k == 0 ? 0.0 : cuts[k - 1];
        const double hi = k == cuts.size() ? 1.0 : cuts[k];
        const double mid = 0.5 * (lo + hi);
        T acc{};
        for (const auto& b : branches) {
            if (mid > b.image_lo() && mid < b.image_hi()) acc += f((mid - b.intercept) / b.slope) / std::abs(b.slope);
        }
        vals[k] = acc;
    }
    return basic_step_function<T>::from_pieces(std::move(cuts), std::move(vals));
}

// f o T, pulling breakpoints back through every branch.
template <class T>
basic_step_function<T> koopman_compose(const basic_step_function<T>& f, const piecewise_linear_map& map) {
    std::vector<double> cuts;
    for (const auto& b : map.branches()) {
        cuts.push_back(b.lo);
        const double ilo = b.image_lo(), ihi = b.image_hi();
        auto first = std::upper_bound(f.cuts().begin(), f.cuts().end(), ilo);
        for (auto it = first; it != f.cuts().end() && *it < ihi; ++it) cuts.push_back((*it - b.intercept) / b.slope);
    }
    normalize_cuts(cuts);
    std::vector<T> vals;
    vals.reserve(cuts.size() + 1);
    for (std::size_t k = 0; k <= cuts.size(); ++k) {
        const double lo = k == 0 ? 0.0 : cuts[k - 1];
        const double hi = k == cuts.size() ? 1.0 : cuts[k];
        const double mid = 0.5 * (lo + hi);
        vals.push_back(f(map.branch_at(mid).apply(mid)));
    }
    return basic_step_function<T>::from_pieces(std::move(cuts), std::move(vals));
}

// L(e^{it psi} g), the twisted transfer operator.
inline complex_step_function twisted_apply(const piecewise_linear_map& map, const step_function& psi, double t,
                                           const complex_step_function& g) {
    return transfer_apply(map, exp_it(psi, t) * g);
}

// Empirical (Nom) check: ||g o T||_BV against (N(T) + 1) ||g||_BV.
struct nom_check_result {
    double ratio = 0.0;
    double bound = 0.0;
    bool holds = true;
};
nom_check_result nom_check(const piecewise_linear_map& map, const step_function& g);

// Ulam discretization on k uniform bins. entry(j, i) = m(B_i cap T^-1 B_j) / m(B_i).
class ulam_matrix {
public:
    ulam_matrix(const piecewise_linear_map& map, std::size_t bins);

    std::size_t bins() const { return bins_; }
    double entry(std::size_t j, std::size_t i) const { return a_[j * bins_ + i]; }
    std::vector<double> apply(std::span<const double> density) const;

private:
    std::size_t bins_;
    std::vector<double> a_;
};

// Bin averages of f over k uniform bins.
std::vector<double> bin_averages(const step_function& f, std::size_t bins);
step_function from_bins(std::span<const double> values);

} // namespace rdlab
