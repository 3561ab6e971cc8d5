#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "rdlab/base.hpp"
#include "rdlab/cocycle.hpp"
#include "rdlab/equivariant.hpp"
#include "rdlab/step_function.hpp"

namespace rdlab {

// psi^i_s for components i = 0..d-1; symbols without an entry use `components`.
struct observable_spec {
    std::vector<step_function> components;
    std::map<std::int64_t, std::vector<step_function>> by_symbol;
    bool centered = false;

    int dimension() const { return static_cast<int>(components.size()); }
    const std::vector<step_function>& at(const base_state& s) const;
    void validate() const;

    static observable_spec scalar(step_function psi, bool centered = false);
};

// An observable resolved on the fibers first..last of a path.
class fiber_observable {
public:
    fiber_observable() = default;
    fiber_observable(long first, std::vector<std::vector<step_function>> values);

    long first_fiber() const { return first_; }
    long last_fiber() const { return first_ + static_cast<long>(values_.size()) - 1; }
    bool covers(long j) const { return j >= first_fiber() && j <= last_fiber(); }
    int dimension() const { return values_.empty() ? 0 : static_cast<int>(values_.front().size()); }

    const std::vector<step_function>& components(long j) const;
    const step_function& at(long j, int i = 0) const { return components(j)[static_cast<std::size_t>(i)]; }
    // max over covered fibers and components of ||psi||_BV
    double max_bv() const;

private:
    long first_ = 0;
    std::vector<std::vector<step_function>> values_;
};

fiber_observable evaluate(const observable_spec& spec, const base_path& p, long first, long last);

// Shifts each component by its mu_j-mean. Idempotent.
fiber_observable center(const fiber_observable& obs, const equivariant_data& eq);

// max_j,i |int psi^i_j dmu_j|
double max_centering_error(const fiber_observable& obs, const equivariant_data& eq);

// psi_j = r - r o T_j on the fibers first..last.
fiber_observable coboundary_observable(const cocycle& c, const base_path& p, const step_function& r, long first,
                                       long last);

} // namespace rdlab
