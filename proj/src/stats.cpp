#include "rdlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "rdlab/errors.hpp"

namespace rdlab {

linear_fit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw config_error("least_squares: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw config_error("least_squares: needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    if (!(sxx > 0.0)) throw config_error("least_squares: x values are all equal");
    linear_fit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

moments sample_moments(std::span<const double> v) {
    moments m;
    m.count = v.size();
    if (v.empty()) return m;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == *hi) {
        m.mean = *lo;
        return m;
    }
    m.mean = pairwise_sum(v) / static_cast<double>(v.size());
    if (v.size() < 2) return m;
    std::vector<double> sq(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) sq[k] = (v[k] - m.mean) * (v[k] - m.mean);
    m.variance = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
    m.std_error = std::sqrt(m.variance / static_cast<double>(v.size()));
    return m;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw config_error("ks_distance: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t k = 0; k < sample.size(); ++k) {
        const double f = cdf(sample[k]);
        d = std::max(d, std::max(static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n));
    }
    return d;
}

double ks_critical_95(std::size_t n) { return 1.36 / std::sqrt(static_cast<double>(n)); }

} // namespace rdlab
