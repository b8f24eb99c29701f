// pode: probabilistic O-D demand estimation from day-to-day link counts.
//
//   pode synthesize --config run.ini [--seed N] [--out DIR]
//   pode estimate   --config run.ini [--distance kl|hellinger] [--out DIR]
//   pode lasso-path --config run.ini [--jobs N]
//   pode evaluate   --config run.ini
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

#include "pode/commands.hpp"
#include "pode/error.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic O-D demand estimation"};
    app.require_subcommand(1);

    pode::CommandOptions opts;
    std::string config, out, distance;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "run configuration (INI)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "override the random seed");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--distance", distance, "stopping distance")->check(CLI::IsMember({"kl", "hellinger"}));
        cmd->add_option("--jobs", opts.jobs, "parallel jobs (cold-start lasso grid)")->check(CLI::PositiveNumber);
    };
    auto* synth = app.add_subcommand("synthesize", "sample synthetic observations from a known truth");
    auto* est = app.add_subcommand("estimate", "estimate the demand distribution (IGLS)");
    auto* lasso = app.add_subcommand("lasso-path", "covariance coefficient paths over a lambda grid");
    auto* eval = app.add_subcommand("evaluate", "compare an estimate with the truth");
    for (auto* cmd : {synth, est, lasso, eval}) add_common(cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        opts.config = config;
        if (!out.empty()) opts.out = out;
        if (!distance.empty()) opts.distance = pode::parse_distance(distance);
        for (auto* cmd : {synth, est, lasso, eval})
            if (cmd->count("--seed")) opts.seed = seed;

        std::vector<std::filesystem::path> written;
        if (*synth) written = pode::cmd_synthesize(opts);
        else if (*est) written = pode::cmd_estimate(opts);
        else if (*lasso) written = pode::cmd_lasso_path(opts);
        else written = pode::cmd_evaluate(opts);
        for (const auto& f : written) std::cout << "wrote " << f.string() << '\n';
        return 0;
    } catch (const pode::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const pode::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
