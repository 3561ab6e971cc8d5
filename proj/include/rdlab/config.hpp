#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rdlab/base.hpp"
#include "rdlab/cocycle.hpp"
#include "rdlab/maps.hpp"
#include "rdlab/observable.hpp"

namespace rdlab {

struct tolerance_set {
    double pullback = 1e-10;
    double series = 1e-9;      // martingale chi tail
    double sigma_tail = 1e-8;  // Green-Kubo tail per fiber
    double coalesce = 1e-14;
    double clt_ks = 0.03;
};

struct grid_set {
    long n_max = 200;          // pullback depth and correlation lags
    long decay_n_max = 40;     // horizon of the decay fit
    std::vector<long> n_grid{100, 1'000, 10'000};
    std::vector<double> t_grid{-0.1, -0.05, 0.05, 0.1};
    double rho = 0.1;
    long twisted_n = 100;
    long twisted_trace = 200;
};

struct window_set {
    long first = 0;
    long fibers = 100;
};

struct monte_carlo_set {
    std::size_t trials = 10'000;
    long n = 10'000;
    std::size_t lil_trials = 200;
    long lil_n = 10'000;
    double lil_epsilon = 0.5;
    std::size_t twisted_trials = 100'000;
};

struct counterexample_set {
    double delta = 0.5;
    std::uint64_t symbol_cap = 1'000'000;
    bool identity_interior = false;
    std::size_t base_samples = 100;
    std::vector<long> levels{1, 10};
    std::size_t tail_samples = 100'000;
};

struct kestimate_set {
    double a = -1.0;           // < 0: mass of symbols carrying expanding maps
    double lambda1 = 0.6931471805599453;
    double constant = 2.0;
    long n_max = 1'000;
    std::size_t paths = 10'000;
    long fit_k_max = 50;
    std::size_t decay_fibers = 20;
    long decay_n_max = 80;
};

struct experiment_config {
    base_spec base;
    std::vector<piecewise_linear_map> maps;
    map_assignment assignment;
    observable_spec observable;
    tolerance_set tolerances;
    grid_set grids;
    window_set window;
    monte_carlo_set monte_carlo;
    counterexample_set counterexample;
    kestimate_set kestimate;
    std::uint64_t seed = 0;
    std::string output = "out";
    nlohmann::json source;     // the document as given, with defaults filled in

    cocycle make_cocycle() const;
    // FNV-1a of the canonical dump of `source`, as 16 hex digits.
    std::string hash() const;
    void set_seed(std::uint64_t s);
};

// Throws config_error whose message starts with the offending field path.
experiment_config parse_config(const nlohmann::json& doc);
experiment_config load_config(const std::filesystem::path& path);

// Default document for the i.i.d. {doubling, buzzi_t1} mix with psi.
nlohmann::json default_config_document();

} // namespace rdlab
