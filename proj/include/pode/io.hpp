#pragma once

// JSON and CSV serialization of estimates and ground truth. Matrices are
// stored as {"rows": r, "cols": c, "data": [row-major values]}.

#include "pode/gesta.hpp"
#include "pode/igls.hpp"
#include "pode/metrics.hpp"
#include "pode/network.hpp"

#include <json.hpp>

#include <filesystem>

namespace pode {

using Json = nlohmann::json;

Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Vector vector_from_json(const Json& j, const std::string& field);
Matrix matrix_from_json(const Json& j, const std::string& field);

/// Link id sequences of every path, grouped by O-D pair.
Json paths_json(const Network& net, const PathSet& ps);

struct Truth {
    DemandDistribution demand;
    Vector p; // may be empty
};

void write_truth_json(const std::filesystem::path& file, const Network& net, const PathSet& ps,
                      const DemandDistribution& demand, const RouteChoice& rc);
Truth read_truth_json(const std::filesystem::path& file);

Json decomposition_json(const Network& net, const VarianceDecomposition& vd);

/// outer,tau,mean_residual,mean_passes,lasso_objective
void write_convergence_csv(const std::filesystem::path& file, const IGLSResult& res);

Json read_json(const std::filesystem::path& file);
void write_json(const std::filesystem::path& file, const Json& j);

} // namespace pode
