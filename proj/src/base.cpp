#include "rdlab/base.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rdlab/errors.hpp"

namespace rdlab {

base_spec base_spec::finite(std::vector<double> w, std::uint64_t seed) {
    base_spec s;
    s.variant = kind::iid_finite;
    s.weights = std::move(w);
    s.seed = seed;
    return s;
}

base_spec base_spec::heavy_tail(double delta, std::uint64_t cap, std::uint64_t seed) {
    base_spec s;
    s.variant = kind::iid_heavy_tail;
    s.delta = delta;
    s.symbol_cap = cap;
    s.seed = seed;
    return s;
}

base_spec base_spec::suspension_over(base_spec inner, std::uint64_t seed) {
    base_spec s;
    s.variant = kind::suspension;
    inner.seed = seed;
    s.inner = std::make_shared<const base_spec>(std::move(inner));
    s.seed = seed;
    return s;
}

void base_spec::validate() const {
    switch (variant) {
    case kind::iid_finite: {
        if (weights.empty()) throw config_error("base.weights: empty alphabet");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw config_error("base.weights: negative weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw config_error("base.weights: weights must sum to 1");
        break;
    }
    case kind::iid_heavy_tail:
        if (!(delta > 0.0 && delta <= 1.0)) throw config_error("base.delta: must lie in (0,1]");
        if (symbol_cap < 1) throw config_error("base.symbol_cap: must be positive");
        break;
    case kind::suspension:
        if (!inner) throw config_error("base.inner: suspension needs an inner base");
        if (inner->variant == kind::suspension) throw config_error("base.inner: nested suspensions are not supported");
        inner->validate();
        if (inner->variant == kind::iid_finite && inner->weights[0] != 0.0)
            throw config_error("base.inner.weights: roof heights must be >= 1, so symbol 0 needs weight 0");
        break;
    }
}

categorical_law::categorical_law(const std::vector<double>& weights, std::int64_t offset)
    : offset_(offset) {
    const std::size_t n = weights.size();
    survival_.assign(n + 1, 0.0);
    // summing from the small end keeps the tail sums accurate
    for (std::size_t k = n; k-- > 0;) survival_[k] = survival_[k + 1] + weights[k];
    const double total = survival_[0];
    if (!(total > 0.0)) throw config_error("categorical law with zero total weight");
    prob_.resize(n);
    for (std::size_t k = 0; k < n; ++k) prob_[k] = weights[k] / total;
    for (auto& s : survival_) s /= total;
}

std::int64_t categorical_law::sample(engine& g) const {
    const double u = uniform01(g);
    // first index with survival <= u; survival_[0] = 1 > u
    auto it = std::upper_bound(survival_.begin(), survival_.end(), u,
                               [](double value, double s) { return s <= value; });
    const auto k = static_cast<std::int64_t>(it - survival_.begin()) - 1;
    return offset_ + std::clamp<std::int64_t>(k, 0, static_cast<std::int64_t>(prob_.size()) - 1);
}

double categorical_law::probability(std::int64_t symbol) const {
    const auto k = symbol - offset_;
    if (k < 0 || k >= static_cast<std::int64_t>(prob_.size())) return 0.0;
    return prob_[static_cast<std::size_t>(k)];
}

double categorical_law::mean() const {
    double m = 0.0;
    for (std::size_t k = prob_.size(); k-- > 0;) m += prob_[k] * static_cast<double>(offset_ + static_cast<std::int64_t>(k));
    return m;
}

double heavy_tail_normalizer(double delta, std::uint64_t cap) {
    double s = 0.0;
    for (std::uint64_t i = cap; i >= 1; --i) s += std::pow(static_cast<double>(i), -(2.0 + delta));
    return 1.0 / s;
}

namespace {

categorical_law law_of(const base_spec& s) {
    if (s.variant == base_spec::kind::iid_finite) return categorical_law(s.weights, 0);
    std::vector<double> w(s.symbol_cap);
    for (std::uint64_t i = 0; i < s.symbol_cap; ++i)
        w[i] = std::pow(static_cast<double>(i + 1), -(2.0 + s.delta));
    return categorical_law(w, 1);
}

} // namespace

base_sampler::base_sampler(base_spec spec) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.variant == base_spec::kind::suspension) {
        law_ = law_of(*spec_.inner);
        std::vector<double> w;
        const auto lo = law_.min_symbol();
        for (auto h = lo; h <= law_.max_symbol(); ++h)
            w.push_back(static_cast<double>(h) * law_.probability(h));
        biased_ = categorical_law(w, lo);
    } else {
        law_ = law_of(spec_);
    }
}

base_path base_sampler::sample(std::uint64_t seed, long n_back, long n_fwd) const {
    if (n_back < 0 || n_fwd < 0) throw config_error("window sizes must be nonnegative");
    auto d = std::make_shared<base_path::data>();
    d->first = -n_back;
    d->states.resize(static_cast<std::size_t>(n_back + n_fwd + 1));
    auto slot = [&](long k) -> base_state& { return d->states[static_cast<std::size_t>(k + n_back)]; };

    auto fwd = make_engine(seed, "base.forward");
    auto back = make_engine(seed, "base.backward");

    if (spec_.variant != base_spec::kind::suspension) {
        for (long k = 0; k <= n_fwd; ++k) slot(k) = {law_.sample(fwd), 0};
        for (long k = -1; k >= -n_back; --k) slot(k) = {law_.sample(back), 0};
    } else {
        d->suspension = true;
        auto org = make_engine(seed, "base.origin");
        slot(0) = sample_origin(org);
        for (long k = 1; k <= n_fwd; ++k) {
            const auto& prev = slot(k - 1);
            slot(k) = prev.at_roof_top() ? base_state{law_.sample(fwd), 0} : base_state{prev.symbol, prev.counter + 1};
        }
        for (long k = -1; k >= -n_back; --k) {
            const auto& next = slot(k + 1);
            if (next.counter > 0) {
                slot(k) = {next.symbol, next.counter - 1};
            } else {
                const auto h = law_.sample(back);
                slot(k) = {h, h - 1};
            }
        }
    }
    return base_path(std::move(d), 0);
}

base_state base_sampler::sample_origin(engine& g) const {
    if (spec_.variant != base_spec::kind::suspension) throw config_error("sample_origin needs a suspension base");
    const auto h = biased_.sample(g);
    return {h, static_cast<std::int64_t>(g() % static_cast<std::uint64_t>(h))};
}

base_path base_path::from_states(long first, std::vector<base_state> states, bool suspension) {
    const long last = first + static_cast<long>(states.size()) - 1;
    if (first > 0 || last < 0) throw config_error("explicit window must contain index 0");
    if (suspension) {
        for (std::size_t k = 0; k < states.size(); ++k) {
            const auto& s = states[k];
            if (s.symbol < 1 || s.counter < 0 || s.counter >= s.symbol)
                throw config_error("suspension state needs 0 <= i < h");
            if (k > 0) {
                const auto& prev = states[k - 1];
                const bool ok = prev.at_roof_top() ? s.counter == 0
                                                   : (s.symbol == prev.symbol && s.counter == prev.counter + 1);
                if (!ok) throw config_error("suspension states are not consecutive");
            }
        }
    }
    auto d = std::make_shared<data>();
    d->first = first;
    d->suspension = suspension;
    d->states = std::move(states);
    return base_path(std::move(d), 0);
}

const base_state& base_path::at(long k) const {
    if (!data_ || !contains(k)) throw window_error(k, first(), last());
    return data_->states[static_cast<std::size_t>(origin_ + k - data_->first)];
}

base_path base_path::shift(long k) const {
    if (!contains(k)) throw window_error(k, first(), last());
    return base_path(data_, origin_ + k);
}

base_path sample_path(const base_spec& spec, long n_back, long n_fwd) {
    return base_sampler(spec).sample(n_back, n_fwd);
}

std::int64_t roof(const base_path& p) {
    if (!p.is_suspension()) throw config_error("roof() needs a suspension base");
    return p.state().symbol;
}

void write_csv(std::ostream& out, const base_path& p) {
    out << "index,symbol,fiber_counter\n";
    for (long k = p.first(); k <= p.last(); ++k) {
        const auto& s = p.at(k);
        out << k << ',' << s.symbol << ',' << s.counter << '\n';
    }
}

} // namespace rdlab
