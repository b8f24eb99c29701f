#pragma once

// Synthetic day-to-day observations: demand ~ rounded truncated MVN,
// per-O-D multinomial route choice, multiplicative uniform perturbation.

#include "pode/gesta.hpp"
#include "pode/network.hpp"

#include <cstdint>
#include <filesystem>

namespace pode {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// n x |A^o| day-by-link counts; column j belongs to observed.indices[j].
struct ObservationSet {
    Matrix counts;
    ObservedLinks observed;

    int days() const { return static_cast<int>(counts.rows()); }
    void validate() const;
};

struct SynthesisConfig {
    std::uint64_t seed = 1;
    int n_days = 1;
    double epsilon = 0.0;
    DemandDistribution truth;
    RouteChoice route_choice;
};

/// n independent demand vectors, MVN(q, sigma_q) rounded to the nearest
/// integer and clipped at zero.
CountMatrix sample_demand(const DemandDistribution& d, int n, std::uint64_t seed);

struct DaySample {
    CountVector path_counts;
    Vector link_counts;
};

/// Multinomial(q_rs, p_rs) path counts for every O-D pair, loaded onto links.
DaySample sample_day(const PathSet& ps, const CountVector& demand, const RouteChoice& rc,
                     std::uint64_t seed);

/// x_a * (1 + u_a * epsilon), u_a ~ U[-1, 1], floored at zero.
Vector perturb(const Vector& x, double epsilon, std::uint64_t seed);

/// Demand draw, route choice, perturbation and restriction to the observed
/// links, once per day. Day i uses its own substream of cfg.seed.
ObservationSet synthesize(const Network& net, const PathSet& ps, const SynthesisConfig& cfg);

/// CSV with header day,link_<id>,... and one row per day.
void write_observations_csv(const std::filesystem::path& file, const ObservationSet& obs, const Network& net);
ObservationSet read_observations_csv(const std::filesystem::path& file, const Network& net);

} // namespace pode
