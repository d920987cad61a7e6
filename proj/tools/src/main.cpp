#include "fmrexec_cli/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using fmrexec::cli::Options;
    CLI::App app{"Optimal execution under fast mean-reverting stochastic impact"};
    app.require_subcommand(1);

    Options opts;
    std::uint64_t seed = 0;
    std::size_t paths = 0, workers = 0;

    auto common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", opts.config, "JSON run configuration");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out, "output directory")->default_val(".");
    };
    auto sim_flags = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "base seed (overrides sim.seed)");
        sub->add_option("--paths", paths, "number of Monte Carlo paths");
        sub->add_option("--workers", workers, "worker threads (0 = hardware concurrency)");
        sub->add_option("--policies", opts.policies, "comma-separated: AC, TS, FirstOrder")->delimiter(',');
        sub->add_option("--phi-multiples", opts.phi_multiples, "phi = m * b for each m")->delimiter(',');
    };

    auto* calibrate = app.add_subcommand("calibrate", "fit kappa(t) and the OU impact factor to a series");
    common(calibrate, false);
    calibrate->add_option("--input", opts.input, "CSV: value per row, or t,value")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--order", opts.order, "number of polynomial coefficients")->default_val(8);

    auto* solve = app.add_subcommand("solve", "Riccati coefficient, Phi tables and C1 on the time grid");
    common(solve, true);
    solve->add_option("--phi-multiples", opts.phi_multiples, "phi = m * b for each m")->delimiter(',');

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo paths under one policy");
    common(simulate, true);
    sim_flags(simulate);

    auto* compare = app.add_subcommand("compare", "coupled policy comparison: savings and inventory quantiles");
    common(compare, true);
    sim_flags(compare);

    auto* verify = app.add_subcommand("verify-accuracy", "PDE check of the O(eps) accuracy of chi_0");
    common(verify, true);
    verify->add_option("--eps", opts.eps, "comma-separated eps values")->delimiter(',');
    verify->add_option("--workers", workers, "concurrent eps solves (0 = one per eps)");
    verify->add_flag("--dump-field", opts.dump_field, "write the (t, y) field for each eps");

    auto* synth = app.add_subcommand("synth-series", "synthetic per-second impact series from the config");
    common(synth, true);
    synth->add_option("--seed", seed, "seed (overrides sim.seed)");
    synth->add_option("--length", opts.series_length, "number of observations")->default_val(23400);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : fmrexec::cli::kConfigError;
    }

    auto given = [](CLI::App* sub, const char* name) {
        const auto* opt = sub->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    for (auto* sub : app.get_subcommands()) {
        if (given(sub, "--seed")) opts.seed = seed;
        if (given(sub, "--paths")) opts.paths = paths;
        if (given(sub, "--workers")) opts.workers = workers;
    }
    return fmrexec::cli::run(app.get_subcommands().front()->get_name(), opts, std::cerr);
}
