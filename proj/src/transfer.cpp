#include "rdlab/transfer.hpp"

#include <algorithm>

#include "rdlab/errors.hpp"

namespace rdlab {

nom_check_result nom_check(const piecewise_linear_map& map, const step_function& g) {
    nom_check_result r;
    const double base = g.bv();
    r.bound = static_cast<double>(map.branch_count() + 1);
    r.ratio = base > 0.0 ? koopman_compose(g, map).bv() / base : 0.0;
    r.holds = r.ratio <= r.bound * (1.0 + 1e-12);
    return r;
}

ulam_matrix::ulam_matrix(const piecewise_linear_map& map, std::size_t bins) : bins_(bins), a_(bins * bins, 0.0) {
    if (bins < 2) throw config_error("ulam: need at least 2 bins");
    const double width = 1.0 / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const double a = static_cast<double>(i) * width;
        const double b = static_cast<double>(i + 1) * width;
        for (const auto& br : map.branches()) {
            const double lo = std::max(a, br.lo), hi = std::min(b, br.hi);
            if (!(lo < hi)) continue;
            const double ylo = std::min(br.apply(lo), br.apply(hi));
            const double yhi = std::max(br.apply(lo), br.apply(hi));
            const double scale = 1.0 / (std::abs(br.slope) * width);
            const auto jlo = static_cast<std::size_t>(std::clamp(std::floor(ylo / width), 0.0, static_cast<double>(bins - 1)));
            for (std::size_t j = jlo; j < bins; ++j) {
                const double blo = static_cast<double>(j) * width, bhi = static_cast<double>(j + 1) * width;
                if (blo >= yhi) break;
                const double overlap = std::min(yhi, bhi) - std::max(ylo, blo);
                if (overlap > 0.0) a_[j * bins + i] += overlap * scale;
            }
        }
    }
}

std::vector<double> ulam_matrix::apply(std::span<const double> density) const {
    if (density.size() != bins_) throw config_error("ulam: density length does not match bin count");
    std::vector<double> out(bins_, 0.0);
    for (std::size_t j = 0; j < bins_; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < bins_; ++i) s += a_[j * bins_ + i] * density[i];
        out[j] = s;
    }
    return out;
}

std::vector<double> bin_averages(const step_function& f, std::size_t bins) {
    std::vector<double> out(bins, 0.0);
    const double width = 1.0 / static_cast<double>(bins);
    for (std::size_t k = 0; k < f.piece_count(); ++k) {
        const double lo = f.piece_begin(k), hi = f.piece_end(k);
        auto first = static_cast<std::size_t>(std::floor(lo / width));
        for (std::size_t j = std::min(first, bins - 1); j < bins; ++j) {
            const double blo = static_cast<double>(j) * width, bhi = static_cast<double>(j + 1) * width;
            if (blo >= hi) break;
            const double overlap = std::min(hi, bhi) - std::max(lo, blo);
            if (overlap > 0.0) out[j] += f.values()[k] * overlap / width;
        }
    }
    return out;
}

step_function from_bins(std::span<const double> values) {
    std::vector<double> cuts;
    const double n = static_cast<double>(values.size());
    for (std::size_t j = 1; j < values.size(); ++j) cuts.push_back(static_cast<double>(j) / n);
    return step_function::from_pieces(std::move(cuts), {values.begin(), values.end()});
}

} // namespace rdlab
