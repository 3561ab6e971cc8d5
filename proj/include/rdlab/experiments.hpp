#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rdlab/config.hpp"

namespace rdlab {

enum class output_format { csv, json, both };

output_format parse_format(const std::string& s);

struct run_options {
    std::filesystem::path out;   // empty: config output
    unsigned threads = 1;
    output_format format = output_format::both;
};

const std::vector<std::string>& subcommands();

// Runs one subcommand and writes manifest.json plus its artifacts.
// Returns 0 on success, 2 when a certification fails; throws config_error
// for an unknown subcommand.
int run_experiment(const std::string& subcommand, const experiment_config& cfg, const run_options& opt,
                   std::ostream& log);

} // namespace rdlab
