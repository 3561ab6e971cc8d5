#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rdlab/config.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"rdlab: quenched limit theorems for random transfer-operator cocycles"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 1;
    std::string format = "both";

    const std::map<std::string, std::string> about{
        {"density", "equivariant densities and the quenched decay fit"},
        {"correlate", "decay of correlations against the fitted bound"},
        {"variance", "Green-Kubo variance with Monte Carlo comparison"},
        {"martingale", "martingale-coboundary decomposition"},
        {"clt", "Birkhoff sums against the normal law, LIL envelope"},
        {"twisted", "twisted operators and characteristic functions"},
        {"counterexample", "variance divergence on the suspension base"},
        {"kestimate", "hitting times and the quenched decay rate"},
        {"validate", "check a config and expansion on average"}};

    for (const auto& name : rdlab::subcommands()) {
        auto* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "master seed, overrides the config");
        sub->add_option("--out", out, "output directory, overrides the config");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
        sub->add_option("--format", format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const std::string subcommand = app.get_subcommands().front()->get_name();
    try {
        auto cfg = rdlab::load_config(config_path);
        if (seed) cfg.set_seed(*seed);
        rdlab::run_options opt;
        opt.out = out;
        opt.threads = threads;
        opt.format = rdlab::parse_format(format);
        return rdlab::run_experiment(subcommand, cfg, opt, std::cout);
    } catch (const rdlab::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const rdlab::certification_error& e) {
        std::cerr << "certification failed: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
