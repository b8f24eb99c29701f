#pragma once

// Iterative generalized least squares: alternate the mean and covariance
// sub-problems with network loading until consecutive demand distributions
// stop moving.

#include "pode/cov_estimator.hpp"
#include "pode/gesta.hpp"
#include "pode/mean_estimator.hpp"
#include "pode/network.hpp"
#include "pode/sampler.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace pode {

enum class Distance { KL, Hellinger };

/// Hellinger distance between N(mu1, sigma1) and N(mu2, sigma2), in [0, 1].
double hellinger(const Vector& mu1, const Matrix& sigma1, const Vector& mu2, const Matrix& sigma2);

/// KL(N(mu1, sigma1) || N(mu2, sigma2)).
double kl(const Vector& mu1, const Matrix& sigma1, const Vector& mu2, const Matrix& sigma2);

double distance(Distance metric, const Vector& mu1, const Matrix& sigma1, const Vector& mu2,
                const Matrix& sigma2);

/// D(next, prev) between consecutive demand distribution estimates.
double stopping_tau(const DemandDistribution& prev, const DemandDistribution& next, Distance metric);

struct Loading {
    FlowDistribution flows;
    CostDistribution costs;
};

/// Flow and cost moments implied by (q, sigma_q, p).
Loading network_loading(const Network& net, const PathSet& ps, const DemandDistribution& demand,
                        const RouteChoice& rc, bool path_covariance = true);

struct IGLSConfig {
    int outer_iters = 99;
    int inner_iters = 9;          // mean alternation passes per outer iteration
    Distance distance = Distance::KL;
    double tau_tol = 1e-6;
    double init_sigma_scale = 1.0; // sigma_q start = c0 * I
    std::optional<std::uint64_t> init_sigma_seed; // random PSD start instead of c0 * I
    double mean_tol = 1e-6;
    EquilibriumConfig equilibrium{};
    LassoConfig lasso{};
    std::optional<HistoricalPrior> prior;
    GlsOptions gls{};

    void validate() const;
};

struct IGLSResult {
    DemandDistribution demand;
    RouteChoice route_choice;
    FlowDistribution flows;
    CostDistribution costs;
    Matrix sigma_e_obs;               // PSD part of P^o - implied observed covariance
    std::vector<double> tau_trace;
    std::vector<double> mean_residuals;  // per outer iteration
    std::vector<double> lasso_objectives;
    std::vector<int> mean_passes;
    double final_tau = 0.0;
    int outer_iterations = 0;
    bool converged = false;
};

/// Initial demand distribution: prior mean or a uniform vector scaled to the
/// observed totals under `rc`; c0 * I (or a seeded random PSD matrix).
DemandDistribution igls_initial_demand(const PathSet& ps, const RouteChoice& rc, const Vector& x_hat_obs,
                                       const IGLSConfig& cfg);

IGLSResult run_igls(const Network& net, const PathSet& ps, const ObservationSet& obs, const IGLSConfig& cfg);

} // namespace pode
