#pragma once

// Mean sub-problem: observed link-flow mean, then demand or path-flow means
// by nonnegative generalized least squares with the covariances held fixed.

#include "pode/gesta.hpp"
#include "pode/network.hpp"
#include "pode/nonneg_qp.hpp"
#include "pode/sampler.hpp"

#include <optional>
#include <vector>

namespace pode {

struct HistoricalPrior {
    Vector q_h;
    Matrix sigma_q_h; // empty means identity

    void validate(int num_ods) const;
};

struct MeanEstimate {
    Vector q_hat;
    Vector f_hat;
    Vector x_hat_obs;
    std::vector<double> objective_trace;
    double objective = 0.0;
    double kkt_residual = 0.0;
    bool non_unique = false; // rank-deficient data term without prior
    bool converged = true;
};

struct GlsOptions {
    double jitter = 1e-8;  // ridge on the link covariance, times trace / m
    NonnegOptions solver{};
    std::optional<Vector> start; // warm start for the QP
};

/// Column mean of the observed counts.
Vector observed_mean(const ObservationSet& obs);

/// Covariance of the sample mean, sigma / n.
Matrix mean_sampling_cov(const Matrix& sigma_x_obs, int n);

/// min_q>=0  n (G q - x)^T S^{-1} (G q - x) [+ (q_h - q)^T Sh^{-1} (q_h - q)],
/// G = Delta^o p_tilde. An empty link covariance means identity; n = 0 keeps
/// only the prior.
MeanEstimate estimate_q_gls(const PathSet& ps, const RouteChoice& rc, const Vector& x_hat_obs,
                            const Matrix& sigma_x_obs, int n,
                            const std::optional<HistoricalPrior>& prior = std::nullopt,
                            const GlsOptions& options = {});

/// min_q>=0 ||diag(weights) (G q - x)||^2.
MeanEstimate estimate_q_simple(const PathSet& ps, const RouteChoice& rc, const Vector& x_hat_obs,
                               const Vector& weights, const GlsOptions& options = {});

/// max(D^+ v, 0) with D = S^{-1/2} G and v = S^{-1/2} x.
MeanEstimate estimate_q_pinv(const PathSet& ps, const RouteChoice& rc, const Vector& x_hat_obs,
                             const Matrix& sigma_x_obs);

/// Path flow estimator: min_f>=0 n (Delta^o f - x)^T S^{-1} (Delta^o f - x)
/// + (q_h - M f)^T Sh^{-1} (q_h - M f). The prior is mandatory.
MeanEstimate estimate_f_gls(const PathSet& ps, const Vector& x_hat_obs, const Matrix& sigma_x_obs,
                            int n, const std::optional<HistoricalPrior>& prior,
                            const GlsOptions& options = {});

struct EquilibriumMeanConfig {
    EquilibriumConfig equilibrium{};
    int max_passes = 9;
    double tol = 1e-6; // ||q_next - q||_inf / (1 + ||q||_inf)
    GlsOptions gls{};
};

struct EquilibriumMeanEstimate {
    MeanEstimate estimate;
    RouteChoice route_choice;
    EquilibriumResult equilibrium;
    int passes = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Alternates p from the statistical equilibrium at (q, sigma_q) with the GLS
/// demand estimate under that p. f_hat = p_tilde q_hat.
EquilibriumMeanEstimate estimate_f_equilibrium(const Network& net, const PathSet& ps,
                                               const Vector& x_hat_obs, const Matrix& sigma_x_obs,
                                               int n, const Vector& q_init, const Matrix& sigma_q,
                                               const std::optional<HistoricalPrior>& prior,
                                               const EquilibriumMeanConfig& cfg,
                                               const std::optional<Vector>& p_init = std::nullopt);

} // namespace pode
