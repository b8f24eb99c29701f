#pragma once

#include "pode/gesta.hpp"
#include "pode/network.hpp"
#include "pode/sampler.hpp"

#include <random>
#include <string>
#include <vector>

namespace fixtures {

using pode::Link;
using pode::Matrix;
using pode::Network;
using pode::Vector;

// link 1: 1->3 (10), link 2: 1->2 (10), link 3: 2->3 (5); O-D 1->3, 2->3
inline Network three_link() {
    std::vector<Link> links{{"1", "1", "3", 10, 360, 0.15, 4},
                            {"2", "1", "2", 10, 360, 0.15, 4},
                            {"3", "2", "3", 5, 360, 0.15, 4}};
    return Network(links, {{"1", "3"}, {"2", "3"}});
}

// Two identical parallel links r->s, one O-D pair.
inline Network toy() {
    std::vector<Link> links{{"1", "r", "s", 10, 360, 0.15, 4}, {"2", "r", "s", 10, 360, 0.15, 4}};
    return Network(links, {{"r", "s"}});
}

inline pode::PathSet toy_paths(std::vector<int> observed = {0, 1}) {
    return pode::build_incidence(toy(), {{{0}, {1}}}, pode::ObservedLinks{observed});
}

// Shared trunk 1->2 feeding five single-link spokes; O-D i: 1 -> (i+2).
// Each O-D has two paths: through the trunk and a direct bypass.
inline Network five_od() {
    std::vector<Link> links{{"t", "1", "2", 5, 1800, 0.15, 4}};
    std::vector<pode::OdPair> ods;
    for (int i = 0; i < 5; ++i) {
        const std::string to = std::to_string(i + 3);
        links.push_back({"s" + std::to_string(i), "2", to, 5, 600, 0.15, 4});
        links.push_back({"b" + std::to_string(i), "1", to, 12, 600, 0.15, 4});
        ods.push_back({"1", to});
    }
    return Network(links, ods);
}

inline Matrix random_spd(int dim, std::mt19937_64& rng, double ridge = 0.1) {
    std::normal_distribution<double> normal;
    Matrix a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = normal(rng);
    return a * a.transpose() + ridge * Matrix::Identity(dim, dim);
}

inline Vector random_probabilities(int count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Vector p(count);
    for (int i = 0; i < count; ++i) p[i] = u(rng);
    return p / p.sum();
}

// Route choice with random probabilities per O-D group.
inline pode::RouteChoice random_route_choice(const pode::PathSet& ps, std::mt19937_64& rng) {
    Vector p(ps.num_paths());
    for (int od = 0; od < ps.num_ods(); ++od) {
        const int first = ps.od_first_path[od];
        p.segment(first, ps.od_path_count(od)) = random_probabilities(ps.od_path_count(od), rng);
    }
    return pode::make_route_choice(ps, p);
}

// Observation set with exactly the given mean and (1/n) covariance:
// days are mean + L z over the 2^m sign patterns z.
inline pode::ObservationSet exact_moments(const Vector& mean, const Matrix& cov, const std::vector<int>& observed) {
    const int m = static_cast<int>(mean.size());
    const int n = 1 << m;
    const Eigen::LLT<Matrix> llt(cov);
    const Matrix l = llt.matrixL();
    pode::ObservationSet obs;
    obs.observed.indices = observed;
    obs.counts.resize(n, m);
    for (int d = 0; d < n; ++d) {
        Vector z(m);
        for (int i = 0; i < m; ++i) z[i] = (d >> i) & 1 ? 1.0 : -1.0;
        obs.counts.row(d) = (mean + l * z).transpose();
    }
    return obs;
}

} // namespace fixtures
