#include "rdlab/maps.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "rdlab/errors.hpp"

namespace rdlab {

namespace {

constexpr double partition_tol = 1e-12;

bool is_multiple_of_2_64(double v) {
    const double scaled = std::ldexp(v, 64);
    return std::isfinite(scaled) && scaled == std::floor(scaled);
}

} // namespace

piecewise_linear_map::piecewise_linear_map(std::string name, std::vector<branch> branches, bool circle)
    : name_(std::move(name)), branches_(std::move(branches)), circle_(circle) {
    if (branches_.empty()) throw config_error("map " + name_ + ": no branches");
    std::sort(branches_.begin(), branches_.end(), [](const branch& a, const branch& b) { return a.lo < b.lo; });
    double covered = 0.0;
    for (std::size_t k = 0; k < branches_.size(); ++k) {
        const auto& b = branches_[k];
        if (!(b.lo < b.hi)) throw config_error("map " + name_ + ": empty branch domain");
        if (b.slope == 0.0 || !std::isfinite(b.slope)) throw config_error("map " + name_ + ": slope must be nonzero");
        const double expected_lo = k == 0 ? 0.0 : branches_[k - 1].hi;
        if (std::abs(b.lo - expected_lo) > partition_tol)
            throw config_error("map " + name_ + ": branch domains must partition [0,1)");
        if (b.image_lo() < -partition_tol || b.image_hi() > 1.0 + partition_tol)
            throw config_error("map " + name_ + ": branch image leaves [0,1]");
        covered += b.hi - b.lo;
    }
    if (std::abs(branches_.back().hi - 1.0) > partition_tol || std::abs(covered - 1.0) > partition_tol)
        throw config_error("map " + name_ + ": branch domains must partition [0,1)");
}

const branch& piecewise_linear_map::branch_at(double x) const {
    auto it = std::upper_bound(branches_.begin(), branches_.end(), x,
                               [](double v, const branch& b) { return v < b.lo; });
    if (it == branches_.begin()) return branches_.front();
    return *std::prev(it);
}

double piecewise_linear_map::operator()(double x) const {
    double y = branch_at(x).apply(x);
    if (circle_ && y >= 1.0) y -= 1.0;
    return std::clamp(y, 0.0, std::nextafter(1.0, 0.0));
}

std::vector<preimage> piecewise_linear_map::preimages(double y) const {
    std::vector<preimage> out;
    for (const auto& b : branches_) {
        if (y >= b.image_lo() && y < b.image_hi()) {
            const double x = std::clamp((y - b.intercept) / b.slope, b.lo, std::nextafter(b.hi, b.lo));
            out.push_back({x, std::abs(b.slope)});
        }
    }
    return out;
}

double piecewise_linear_map::min_expansion() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : branches_) m = std::min(m, std::abs(b.slope));
    return m;
}

bool piecewise_linear_map::is_dyadic() const {
    for (const auto& b : branches_) {
        int e = 0;
        const double mant = std::frexp(std::abs(b.slope), &e);
        if (mant != 0.5 || e < 1 || e > 33) return false;  // |slope| = 2^(e-1), 0 <= e-1 <= 32
        if (!is_multiple_of_2_64(b.intercept) || !is_multiple_of_2_64(b.lo) || !is_multiple_of_2_64(b.hi))
            return false;
    }
    return true;
}

piecewise_linear_map doubling_map() {
    return piecewise_linear_map("doubling", {{0.0, 0.5, 2.0, 0.0}, {0.5, 1.0, 2.0, -1.0}}, true);
}

piecewise_linear_map buzzi_t1_map() {
    return piecewise_linear_map("buzzi_t1", {{0.0, 0.25, 2.0, 0.0},
                                             {0.25, 0.5, 2.0, -0.5},
                                             {0.5, 0.75, 2.0, -0.5},
                                             {0.75, 1.0, 2.0, -1.0}});
}

piecewise_linear_map identity_map() {
    return piecewise_linear_map("identity", {{0.0, 1.0, 1.0, 0.0}}, true);
}

piecewise_linear_map catalog_map(std::string_view name) {
    if (name == "doubling") return doubling_map();
    if (name == "buzzi_t1") return buzzi_t1_map();
    if (name == "identity") return identity_map();
    throw config_error("unknown catalog map '" + std::string(name) + "'");
}

std::vector<std::string> catalog_names() { return {"doubling", "buzzi_t1", "identity"}; }

double parse_rational(std::string_view text) {
    auto parse_double = [&](std::string_view s) {
        while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
        while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
        double v = 0.0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw config_error("cannot parse number '" + std::string(text) + "'");
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return parse_double(text);
    const double den = parse_double(text.substr(slash + 1));
    if (den == 0.0) throw config_error("zero denominator in '" + std::string(text) + "'");
    return parse_double(text.substr(0, slash)) / den;
}

} // namespace rdlab
