#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "rdlab/errors.hpp"

namespace rdlab {

using complex = std::complex<double>;

// Breakpoints closer than this are identified. Dyadic data never comes near
// it; it only absorbs rounding in images of non-dyadic breakpoints.
inline constexpr double breakpoint_snap = 1e-14;

// Sorts cuts, drops those within the snap distance of 0 or 1 and merges
// near-duplicates.
inline void normalize_cuts(std::vector<double>& cuts) {
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> out;
    out.reserve(cuts.size());
    for (double c : cuts) {
        if (!(c > breakpoint_snap) || !(c < 1.0 - breakpoint_snap)) continue;
        if (!out.empty() && c - out.back() <= breakpoint_snap) continue;
        out.push_back(c);
    }
    cuts.swap(out);
}

// Piecewise-constant function on [0,1) with right-continuous pieces
// [c_{k-1}, c_k). Values are real or complex.
template <class T>
class basic_step_function {
public:
    using value_type = T;

    basic_step_function() : values_{T{}} {}

    static basic_step_function constant(T c) {
        basic_step_function f;
        f.values_[0] = c;
        return f;
    }

    // v on [a,b), zero elsewhere.
    static basic_step_function indicator(double a, double b, T v = T(1)) {
        if (!(a < b)) throw config_error("indicator needs a < b");
        a = std::clamp(a, 0.0, 1.0);
        b = std::clamp(b, 0.0, 1.0);
        std::vector<double> cuts;
        std::vector<T> vals;
        if (a > 0.0) {
            cuts.push_back(a);
            vals.push_back(T{});
        }
        vals.push_back(v);
        if (b < 1.0) {
            cuts.push_back(b);
            vals.push_back(T{});
        }
        return from_pieces(std::move(cuts), std::move(vals));
    }

    // Validates strictly increasing interior cuts and merges equal neighbours.
    static basic_step_function from_pieces(std::vector<double> cuts, std::vector<T> values) {
        if (values.size() != cuts.size() + 1)
            throw config_error("step function needs exactly one more value than breakpoints");
        for (std::size_t k = 0; k < cuts.size(); ++k) {
            if (!(cuts[k] > 0.0 && cuts[k] < 1.0))
                throw config_error("breakpoints must lie in (0,1)");
            if (k > 0 && !(cuts[k] > cuts[k - 1]))
                throw config_error("breakpoints must be strictly increasing");
        }
        basic_step_function f;
        f.cuts_ = std::move(cuts);
        f.values_ = std::move(values);
        f.merge_equal();
        return f;
    }

    const std::vector<double>& cuts() const noexcept { return cuts_; }
    const std::vector<T>& values() const noexcept { return values_; }
    std::size_t piece_count() const noexcept { return values_.size(); }
    double piece_begin(std::size_t k) const { return k == 0 ? 0.0 : cuts_[k - 1]; }
    double piece_end(std::size_t k) const { return k == cuts_.size() ? 1.0 : cuts_[k]; }
    double piece_length(std::size_t k) const { return piece_end(k) - piece_begin(k); }

    std::size_t piece_index(double x) const {
        return static_cast<std::size_t>(std::upper_bound(cuts_.begin(), cuts_.end(), x) - cuts_.begin());
    }

    T operator()(double x) const { return values_[piece_index(x)]; }

    T integral() const {
        T s{};
        for (std::size_t k = 0; k < values_.size(); ++k) s += values_[k] * piece_length(k);
        return s;
    }

    double l1() const {
        double s = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) s += std::abs(values_[k]) * piece_length(k);
        return s;
    }

    // Sum of absolute interior jumps.
    double variation() const {
        double s = 0.0;
        for (std::size_t k = 1; k < values_.size(); ++k) s += std::abs(values_[k] - values_[k - 1]);
        return s;
    }

    double sup() const {
        double s = 0.0;
        for (const auto& v : values_) s = std::max(s, static_cast<double>(std::abs(v)));
        return s;
    }

    double bv() const { return l1() + variation(); }

    bool is_zero() const { return values_.size() == 1 && values_[0] == T{}; }

    // Merges neighbours whose values differ by at most rel_tol * sup.
    basic_step_function coalesced(double rel_tol) const {
        if (rel_tol <= 0.0) return *this;
        const double tol = rel_tol * sup();
        basic_step_function f;
        f.values_.clear();
        f.values_.push_back(values_[0]);
        for (std::size_t k = 1; k < values_.size(); ++k) {
            if (std::abs(values_[k] - f.values_.back()) <= tol) continue;
            f.cuts_.push_back(cuts_[k - 1]);
            f.values_.push_back(values_[k]);
        }
        return f;
    }

    template <class Fn>
    auto map_values(Fn&& fn) const {
        using R = std::decay_t<decltype(fn(values_[0]))>;
        std::vector<R> out;
        out.reserve(values_.size());
        for (const auto& v : values_) out.push_back(fn(v));
        return basic_step_function<R>::from_pieces(cuts_, std::move(out));
    }

private:
    void merge_equal() {
        std::vector<double> cuts;
        std::vector<T> vals;
        cuts.reserve(cuts_.size());
        vals.reserve(values_.size());
        vals.push_back(values_[0]);
        for (std::size_t k = 1; k < values_.size(); ++k) {
            if (values_[k] == vals.back()) continue;
            cuts.push_back(cuts_[k - 1]);
            vals.push_back(values_[k]);
        }
        cuts_.swap(cuts);
        values_.swap(vals);
    }

    std::vector<double> cuts_;
    std::vector<T> values_;
};

using step_function = basic_step_function<double>;
using complex_step_function = basic_step_function<complex>;

// Pointwise op on the common refinement of f and g.
template <class A, class B, class Op>
auto combine(const basic_step_function<A>& f, const basic_step_function<B>& g, Op op) {
    using R = std::decay_t<decltype(op(f.values()[0], g.values()[0]))>;
    std::vector<double> cuts;
    cuts.reserve(f.cuts().size() + g.cuts().size());
    cuts.insert(cuts.end(), f.cuts().begin(), f.cuts().end());
    cuts.insert(cuts.end(), g.cuts().begin(), g.cuts().end());
    normalize_cuts(cuts);
    std::vector<R> vals;
    vals.reserve(cuts.size() + 1);
    for (std::size_t k = 0; k <= cuts.size(); ++k) {
        const double lo = k == 0 ? 0.0 : cuts[k - 1];
        const double hi = k == cuts.size() ? 1.0 : cuts[k];
        const double mid = 0.5 * (lo + hi);
        vals.push_back(op(f(mid), g(mid)));
    }
    return basic_step_function<R>::from_pieces(std::move(cuts), std::move(vals));
}

template <class T>
basic_step_function<T> operator+(const basic_step_function<T>& f, const basic_step_function<T>& g) {
    return combine(f, g, [](const T& a, const T& b) { return a + b; });
}

template <class T>
basic_step_function<T> operator-(const basic_step_function<T>& f, const basic_step_function<T>& g) {
    return combine(f, g, [](const T& a, const T& b) { return a - b; });
}

template <class T>
basic_step_function<T> operator*(const basic_step_function<T>& f, const basic_step_function<T>& g) {
    return combine(f, g, [](const T& a, const T& b) { return a * b; });
}

inline complex_step_function operator*(const complex_step_function& f, const step_function& g) {
    return combine(f, g, [](const complex& a, double b) { return a * b; });
}

template <class T>
basic_step_function<T> operator*(T c, const basic_step_function<T>& f) {
    return f.map_values([c](const T& v) { return c * v; });
}

template <class T>
basic_step_function<T> operator+(const basic_step_function<T>& f, T c) {
    return f.map_values([c](const T& v) { return v + c; });
}

template <class T>
basic_step_function<T> operator-(const basic_step_function<T>& f, T c) {
    return f.map_values([c](const T& v) { return v - c; });
}

inline complex_step_function to_complex(const step_function& f) {
    return f.map_values([](double v) { return complex(v, 0.0); });
}

inline step_function real_part(const complex_step_function& f) {
    return f.map_values([](const complex& v) { return v.real(); });
}

// e^{itf} for real f.
inline complex_step_function exp_it(const step_function& f, double t) {
    return f.map_values([t](double v) { return std::polar(1.0, t * v); });
}

// f / g; g must be bounded away from zero.
inline step_function divide(const step_function& f, const step_function& g, double floor = 1e-12) {
    return combine(f, g, [floor](double a, double b) {
        if (!(std::abs(b) >= floor)) throw certification_error("division by a density below the essinf floor");
        return a / b;
    });
}

inline double essinf(const step_function& f) {
    return *std::min_element(f.values().begin(), f.values().end());
}

inline double esssup(const step_function& f) {
    return *std::max_element(f.values().begin(), f.values().end());
}

template <class T>
double l1_distance(const basic_step_function<T>& f, const basic_step_function<T>& g) {
    return (f - g).l1();
}

template <class T>
double sup_distance(const basic_step_function<T>& f, const basic_step_function<T>& g) {
    return (f - g).sup();
}

struct bv_norms {
    double l1 = 0.0;
    double variation = 0.0;
    double bv = 0.0;
    double sup = 0.0;
};

// C_var for the jump variation on [0,1): sup|f| <= ||f||_1 + var(f).
inline constexpr double c_var = 1.0;

template <class T>
bv_norms norms(const basic_step_function<T>& f) {
    bv_norms n;
    n.l1 = f.l1();
    n.variation = f.variation();
    n.bv = n.l1 + n.variation;
    n.sup = f.sup();
    return n;
}

} // namespace rdlab
