#include "rdlab/observable.hpp"

#include <algorithm>
#include <cmath>

#include "rdlab/errors.hpp"
#include "rdlab/transfer.hpp"

namespace rdlab {

const std::vector<step_function>& observable_spec::at(const base_state& s) const {
    auto it = by_symbol.find(s.symbol);
    return it == by_symbol.end() ? components : it->second;
}

void observable_spec::validate() const {
    if (components.empty() || components.size() > 3) throw config_error("observable dimension must be 1, 2 or 3");
    for (const auto& [sym, comps] : by_symbol)
        if (comps.size() != components.size())
            throw config_error("observable components for symbol " + std::to_string(sym) + " have the wrong dimension");
}

observable_spec observable_spec::scalar(step_function psi, bool centered) {
    observable_spec s;
    s.components.push_back(std::move(psi));
    s.centered = centered;
    return s;
}

fiber_observable::fiber_observable(long first, std::vector<std::vector<step_function>> values)
    : first_(first), values_(std::move(values)) {
    if (values_.empty()) throw config_error("fiber observable needs at least one fiber");
    for (const auto& v : values_)
        if (v.size() != values_.front().size()) throw config_error("fiber observable dimension varies");
}

const std::vector<step_function>& fiber_observable::components(long j) const {
    if (!covers(j)) throw window_error(j, first_fiber(), last_fiber());
    return values_[static_cast<std::size_t>(j - first_)];
}

double fiber_observable::max_bv() const {
    double m = 0.0;
    for (const auto& v : values_)
        for (const auto& f : v) m = std::max(m, f.bv());
    return m;
}

fiber_observable evaluate(const observable_spec& spec, const base_path& p, long first, long last) {
    spec.validate();
    std::vector<std::vector<step_function>> values;
    values.reserve(static_cast<std::size_t>(last - first + 1));
    for (long j = first; j <= last; ++j) values.push_back(spec.at(p.at(j)));
    return fiber_observable(first, std::move(values));
}

fiber_observable center(const fiber_observable& obs, const equivariant_data& eq) {
    std::vector<std::vector<step_function>> values;
    for (long j = obs.first_fiber(); j <= obs.last_fiber(); ++j) {
        std::vector<step_function> comps;
        for (const auto& f : obs.components(j)) {
            const double mean = eq.mean(j, f);
            comps.push_back(std::abs(mean) <= 1e-15 * std::max(1.0, f.sup()) ? f : f - mean);
        }
        values.push_back(std::move(comps));
    }
    return fiber_observable(obs.first_fiber(), std::move(values));
}

double max_centering_error(const fiber_observable& obs, const equivariant_data& eq) {
    double m = 0.0;
    for (long j = obs.first_fiber(); j <= obs.last_fiber(); ++j)
        for (const auto& f : obs.components(j)) m = std::max(m, std::abs(eq.mean(j, f)));
    return m;
}

fiber_observable coboundary_observable(const cocycle& c, const base_path& p, const step_function& r, long first,
                                       long last) {
    std::vector<std::vector<step_function>> values;
    for (long j = first; j <= last; ++j) values.push_back({r - koopman_compose(r, c.map_at(p, j))});
    return fiber_observable(first, std::move(values));
}

} // namespace rdlab
