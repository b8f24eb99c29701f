#pragma once

// Batch commands behind the `pode` executable. Each reads a configuration
// file, writes its outputs into the output directory and returns the paths
// it wrote. Errors are reported as InputError / NumericalError.

#include "pode/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace pode {

struct CommandOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<Distance> distance;
    int jobs = 1;
};

/// Config with command-line overrides applied.
RunConfig resolve_config(const CommandOptions& opts);

/// observations.csv and truth.json
std::vector<std::filesystem::path> cmd_synthesize(const CommandOptions& opts);

/// result.json and convergence.csv
std::vector<std::filesystem::path> cmd_estimate(const CommandOptions& opts);

/// lasso_path.csv and lasso_summary.csv
std::vector<std::filesystem::path> cmd_lasso_path(const CommandOptions& opts);

/// evaluation.json comparing a result against the truth
std::vector<std::filesystem::path> cmd_evaluate(const CommandOptions& opts);

} // namespace pode
