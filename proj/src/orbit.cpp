#include "rdlab/orbit.hpp"

#include <algorithm>
#include <cmath>

#include "rdlab/errors.hpp"

namespace rdlab {

namespace {

constexpr double two64 = 18446744073709551616.0;

// Fractional part of v as a multiple of 2^-64, when exact.
bool fixed_fraction(double v, std::uint64_t& out) {
    const double frac = v - std::floor(v);
    const double scaled = std::ldexp(frac, 64);
    if (scaled != std::floor(scaled) || scaled >= two64) return false;
    out = static_cast<std::uint64_t>(scaled);
    return true;
}

} // namespace

bool is_fixed_dyadic(double c) {
    std::uint64_t tmp;
    return fixed_fraction(c, tmp);
}

std::uint64_t fixed_threshold(double c) {
    if (!(c > 0.0)) return 0;
    if (!(c < 1.0)) return ~std::uint64_t{0};
    return static_cast<std::uint64_t>(std::ceil(std::ldexp(c, 64)));
}

compiled_map::compiled_map(const piecewise_linear_map& map) : map_(&map) {
    exact_ = true;
    for (const auto& b : map.branches()) {
        std::uint64_t lo = 0, icpt = 0;
        int e = 0;
        const double m = std::frexp(std::abs(b.slope), &e);
        const bool pow2 = m == 0.5 && e >= 1 && e <= 33;
        if (!pow2 || !fixed_fraction(b.lo, lo) || !fixed_fraction(b.intercept, icpt)) {
            exact_ = false;
            break;
        }
        lo_.push_back(lo);
        shift_.push_back(static_cast<unsigned>(e - 1));
        negative_.push_back(b.slope < 0);
        intercept_.push_back(icpt);
    }
    if (!exact_) {
        lo_.clear();
        shift_.clear();
        negative_.clear();
        intercept_.clear();
    }
}

std::uint64_t compiled_map::apply(std::uint64_t x, bit_source& bits) const {
    const auto k = static_cast<std::size_t>(std::upper_bound(lo_.begin(), lo_.end(), x) - lo_.begin()) - 1;
    const unsigned s = shift_[k];
    const std::uint64_t fresh = s == 0 ? 0 : bits.take(s);
    const std::uint64_t shifted = s == 0 ? x : (x << s) | fresh;
    if (!negative_[k]) return shifted + intercept_[k];
    // b - 2^s x: the unread tail u becomes 1 - u, again a fresh uniform tail
    return intercept_[k] - shifted - 1;
}

compiled_step::compiled_step(const step_function& f) : cuts_(f.cuts()), values_(f.values()) {
    fixed_cuts_.reserve(cuts_.size());
    for (double c : cuts_) fixed_cuts_.push_back(fixed_threshold(c));
}

double compiled_step::operator()(std::uint64_t x) const {
    const auto k = std::upper_bound(fixed_cuts_.begin(), fixed_cuts_.end(), x) - fixed_cuts_.begin();
    return values_[static_cast<std::size_t>(k)];
}

std::size_t compiled_step::piece(double x) const {
    return static_cast<std::size_t>(std::upper_bound(cuts_.begin(), cuts_.end(), x) - cuts_.begin());
}

density_sampler::density_sampler(const step_function& density) : density_(density) {
    double acc = 0.0;
    for (std::size_t k = 0; k < density.piece_count(); ++k) {
        if (density.values()[k] < 0.0) throw config_error("density must be nonnegative");
        acc += density.values()[k] * density.piece_length(k);
        cdf_.push_back(acc);
    }
    if (!(acc > 0.0)) throw config_error("density has zero mass");
    for (auto& v : cdf_) v /= acc;
    cdf_.back() = 1.0;
}

std::size_t density_sampler::pick(double u) const {
    auto k = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    k = std::min(k, cdf_.size() - 1);
    while (density_.values()[k] == 0.0 && k + 1 < cdf_.size()) ++k;
    return k;
}

double density_sampler::sample(engine& g) const {
    const std::size_t k = cdf_.size() == 1 ? 0 : pick(uniform01(g));
    const double a = density_.piece_begin(k);
    const double x = a + density_.piece_length(k) * uniform01(g);
    return std::min(x, std::nextafter(density_.piece_end(k), 0.0));
}

std::uint64_t density_sampler::sample_fixed(bit_source& bits) const {
    if (cdf_.size() == 1) return bits.word();
    const std::size_t k = pick(static_cast<double>(bits.word() >> 11) * 0x1.0p-53);
    const std::uint64_t a = fixed_threshold(density_.piece_begin(k));
    const unsigned __int128 span =
        (k + 1 == cdf_.size() ? (static_cast<unsigned __int128>(1) << 64) : fixed_threshold(density_.piece_end(k))) - a;
    const auto offset = static_cast<std::uint64_t>((span * bits.word()) >> 64);
    return a + offset;
}

} // namespace rdlab
