#pragma once

#include "pode/gesta.hpp"
#include "pode/igls.hpp"
#include "pode/network.hpp"
#include "pode/sampler.hpp"

#include <vector>

namespace pode {

/// 100 * sqrt(mean squared error) / mean true demand.
double prmse(const Vector& q_hat, const Vector& q_true);

/// KL(N(q_hat, sigma_hat) || N(q_true, sigma_true)).
double kl_od(const Vector& q_hat, const Matrix& sigma_hat, const Vector& q_true, const Matrix& sigma_true);

/// Distance between the model N(x_hat, sigma_hat) on the observed links and
/// the data fit N(sample mean, P^o).
double goodness_of_fit(const Vector& x_hat_obs, const Matrix& sigma_hat_obs, const ObservationSet& obs,
                       Distance metric);

/// Link flow variance split into demand, route choice and unknown error.
struct VarianceDecomposition {
    Vector demand_share;
    Vector route_share;
    Vector error_share;
    Vector total;               // per-link total variance
    std::vector<bool> defined;  // false where the total variance is zero
    double demand_trace_share = 0.0;
    double route_trace_share = 0.0;
    double error_trace_share = 0.0;
    Matrix demand_part;         // Delta p_tilde sigma_q p_tilde^T Delta^T
    Matrix route_part;          // Delta sigma_f|q Delta^T
    Matrix error_part;          // sigma_e
};

/// sigma_e may be empty (zero). Shares of links with zero total are zero and
/// flagged undefined.
VarianceDecomposition variance_decomposition(const PathSet& ps, const RouteChoice& rc, const Vector& q_hat,
                                             const Matrix& sigma_q, const Matrix& sigma_e = {});

} // namespace pode
