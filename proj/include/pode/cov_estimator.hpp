#pragma once

// Covariance sub-problem: sparse demand covariance from the empirical
// observed-link covariance by proximal gradient on a least-squares fit with
// an elementwise l1 penalty and a PSD constraint.

#include "pode/gesta.hpp"
#include "pode/network.hpp"
#include "pode/sampler.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace pode {

struct EmpiricalCov {
    Matrix s_x;          // 1/n divisor
    Matrix p_x;          // 1/(n-1) divisor, empty when n < 2
    int n = 0;

    bool has_p_x() const { return p_x.size() != 0; }
};

EmpiricalCov empirical_cov(const ObservationSet& obs);

enum class LassoAlgorithm { ISTA, FISTA };

struct LassoConfig {
    double lambda = 0.0;
    LassoAlgorithm algorithm = LassoAlgorithm::FISTA;
    int max_iters = 500;
    double step_init = 0.0; // 0: 1 / Lipschitz estimate
    double backtrack = 0.5;
    double tol = 1e-10;     // relative objective change
    // Exact l1 + PSD prox (alternating projections) up to this dimension;
    // larger problems soft-threshold and then clip eigenvalues.
    int exact_prox_max_dim = 400;

    void validate() const;
};

struct CovEstimate {
    Matrix sigma_q_hat;
    std::vector<double> objective_trace;
    double objective = 0.0;
    int nnz = 0;
    int iterations = 0;
    bool converged = false;
};

/// Fixed data of the sub-problem: S^o, G = Delta^o p_tilde and the route
/// choice part R = Delta^o sigma_f|q Delta^o^T, built from (p, q_hat).
struct CovProblem {
    Matrix s_x;
    SparseMatrix g;
    Matrix route;

    int dim() const { return static_cast<int>(g.cols()); }
    /// Implied observed covariance R + G sigma_q G^T.
    Matrix implied(const Matrix& sigma_q) const;
};

CovProblem make_cov_problem(const Matrix& s_x_obs, const PathSet& ps, const RouteChoice& rc, const Vector& q_hat);

/// log det(sigma) + trace(S sigma^{-1}) at the implied covariance.
double wishart_nll(const Matrix& sigma_q, const CovProblem& problem);

/// ||S - R - G sigma_q G^T||_F^2.
double smooth_objective(const Matrix& sigma_q, const CovProblem& problem);

/// Smooth term plus lambda * sum_ij |sigma_q(i, j)|.
double lasso_objective(const Matrix& sigma_q, const CovProblem& problem, double lambda);

/// 2 G^T (G sigma_q G^T + R - S) G.
Matrix smooth_gradient(const Matrix& sigma_q, const CovProblem& problem);

Matrix soft_threshold(const Matrix& beta, double lambda);

/// Smallest lambda for which the zero matrix is a fixed point.
double lambda_max(const CovProblem& problem);

/// Proximal gradient with backtracking from `start` (zero by default).
/// Throws NumericalError if the objective exceeds ten times its start value.
CovEstimate solve_sigma_q(const CovProblem& problem, const LassoConfig& cfg,
                          const std::optional<Matrix>& start = std::nullopt);

struct LassoPathPoint {
    double lambda = 0.0;
    CovEstimate estimate;
};

/// Solutions along an ascending lambda grid, warm started from the previous
/// grid point unless cold_start is set.
std::vector<LassoPathPoint> lasso_path(const CovProblem& problem, const std::vector<double>& grid,
                                       const LassoConfig& cfg, bool cold_start = false);

/// CSV lambda,entry_row,entry_col,value over the upper triangle (1-based).
void write_lasso_path_csv(const std::filesystem::path& file, const std::vector<LassoPathPoint>& path);

} // namespace pode
