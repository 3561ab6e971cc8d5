#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "rdlab/rng.hpp"

namespace rdlab {

// The driving system (Omega, sigma, P).
struct base_spec {
    enum class kind { iid_finite, iid_heavy_tail, suspension };

    kind variant = kind::iid_finite;
    std::vector<double> weights{1.0};        // iid_finite: law of symbols 0..k-1
    double delta = 0.5;                      // iid_heavy_tail: P(i) = Z / i^{2+delta}
    std::uint64_t symbol_cap = 1'000'000;    // iid_heavy_tail: symbols 1..cap
    std::shared_ptr<const base_spec> inner;  // suspension: roof = current inner symbol
    std::uint64_t seed = 0;

    static base_spec finite(std::vector<double> w, std::uint64_t seed = 0);
    static base_spec heavy_tail(double delta, std::uint64_t cap = 1'000'000, std::uint64_t seed = 0);
    static base_spec suspension_over(base_spec inner, std::uint64_t seed = 0);

    // Throws config_error on a violated invariant.
    void validate() const;
};

// Current position of the base point. For i.i.d. bases counter is 0; for a
// suspension symbol is the roof h(omega) and counter is i, 0 <= i < h.
struct base_state {
    std::int64_t symbol = 0;
    std::int64_t counter = 0;

    bool at_roof_top() const { return counter == symbol - 1; }
    friend bool operator==(const base_state&, const base_state&) = default;
};

// Immutable two-sided window of base states; shift() returns a view with a
// moved origin sharing the same storage.
class base_path {
public:
    base_path() = default;

    // Explicit window; states[k] sits at index first + k and the origin is index 0.
    static base_path from_states(long first, std::vector<base_state> states, bool suspension = false);

    // States relative to the current origin: at(k) is the state of sigma^k(omega).
    const base_state& at(long k) const;
    const base_state& state() const { return at(0); }
    base_path shift(long k) const;

    long first() const { return data_ ? data_->first - origin_ : 0; }
    long last() const { return data_ ? data_->first + static_cast<long>(data_->states.size()) - 1 - origin_ : -1; }
    bool contains(long k) const { return k >= first() && k <= last(); }
    bool is_suspension() const { return data_ && data_->suspension; }

    // Absolute index of the origin inside the generated window.
    long origin() const { return origin_; }

private:
    struct data {
        long first = 0;
        bool suspension = false;
        std::vector<base_state> states;
    };

    base_path(std::shared_ptr<const data> d, long origin) : data_(std::move(d)), origin_(origin) {}

    std::shared_ptr<const data> data_;
    long origin_ = 0;

    friend class base_sampler;
};

// Categorical law sampled through survival sums, accurate in the far tail.
class categorical_law {
public:
    categorical_law() = default;
    // weights need not be normalized; symbol of index k is offset + k
    categorical_law(const std::vector<double>& weights, std::int64_t offset);

    std::int64_t sample(engine& g) const;
    double probability(std::int64_t symbol) const;
    double mean() const;
    std::int64_t min_symbol() const { return offset_; }
    std::int64_t max_symbol() const { return offset_ + static_cast<std::int64_t>(prob_.size()) - 1; }

private:
    std::vector<double> survival_;  // survival_[k] = P(index >= k), survival_[0] = 1
    std::vector<double> prob_;
    std::int64_t offset_ = 0;
};

// Heavy-tail normalizer Z = 1 / sum_{i <= cap} i^{-(2+delta)}.
double heavy_tail_normalizer(double delta, std::uint64_t cap);

// Builds the laws of a spec once and samples many paths from it.
class base_sampler {
public:
    explicit base_sampler(base_spec spec);

    const base_spec& spec() const { return spec_; }
    // Law of the i.i.d. symbols (inner law for a suspension).
    const categorical_law& symbol_law() const { return law_; }
    // Mean roof height for a suspension.
    double mean_roof() const { return law_.mean(); }

    base_path sample(long n_back, long n_fwd) const { return sample(spec_.seed, n_back, n_fwd); }
    base_path sample(std::uint64_t seed, long n_back, long n_fwd) const;
    // Origin (h, i) of a suspension: h length biased, i uniform on 0..h-1.
    base_state sample_origin(engine& g) const;

private:
    base_spec spec_;
    categorical_law law_;
    categorical_law biased_;  // length-biased inner law for the suspension origin
};

base_path sample_path(const base_spec& spec, long n_back, long n_fwd);

// sigma^k as a view.
inline base_path shift(const base_path& p, long k) { return p.shift(k); }

// Roof height h(omega) = omega_0 of the inner sequence; suspension paths only.
std::int64_t roof(const base_path& p);

// CSV columns: index, symbol, fiber_counter (indices relative to the origin).
void write_csv(std::ostream& out, const base_path& p);

} // namespace rdlab
