#pragma once

// INI-style run configuration shared by the command-line tools. Relative
// paths are resolved against the directory of the configuration file.

#include "pode/gesta.hpp"
#include "pode/igls.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pode {

struct RunConfig {
    std::filesystem::path source;

    // [network]
    std::filesystem::path links_file;
    std::filesystem::path od_file;
    std::optional<std::filesystem::path> observed_file;
    int paths_per_od = 3;

    // [truth]
    std::optional<DemandDistribution> truth;

    // [synthesis]
    int days = 500;
    double epsilon = 0.0;
    std::uint64_t seed = 1;

    // [equilibrium], [igls], [lasso], [prior]
    EquilibriumConfig equilibrium{};
    IGLSConfig igls{};

    // [data]
    std::optional<std::filesystem::path> observations_file;
    std::optional<std::filesystem::path> truth_file;
    std::optional<std::filesystem::path> result_file;

    // [lasso] grid for the coefficient path: explicit values, or grid_points
    // log-spaced values from grid_min to grid_max (default 2 * lambda_max).
    std::vector<double> lambda_grid;
    double grid_min = 0.01;
    std::optional<double> grid_max;
    int grid_points = 20;
    bool cold_start = false;

    // [output]
    std::filesystem::path out_dir = ".";

    // Raw section -> key -> value, echoed into results.
    std::map<std::string, std::map<std::string, std::string>> raw;
};

RunConfig load_config(const std::filesystem::path& file);

/// Comma separated list of numbers.
std::vector<double> parse_number_list(const std::string& text, const std::string& field);

Distance parse_distance(const std::string& text);
ChoiceModel parse_choice_model(const std::string& text);
LassoAlgorithm parse_lasso_algorithm(const std::string& text);

std::string to_string(Distance d);
std::string to_string(ChoiceModel m);
std::string to_string(LassoAlgorithm a);

} // namespace pode
