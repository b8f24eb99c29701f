#pragma once

// Forward statistical traffic assignment: from a multivariate demand
// distribution and path choice probabilities to the moments of path flows,
// link flows and path costs, plus the fixed point tying choices to costs.

#include "pode/linalg.hpp"
#include "pode/network.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pode {

/// O-D demand Q ~ N(mean, cov), truncated at zero and rounded when sampled.
struct DemandDistribution {
    Vector mean;
    Matrix cov;

    void validate() const;
};

/// Path choice probabilities p and p_tilde = diag(p) B.
struct RouteChoice {
    Vector p;
    SparseMatrix p_tilde;
};

/// Validates p against the path grouping and assembles p_tilde.
RouteChoice make_route_choice(const PathSet& ps, Vector p);

/// Moments of path and link flows. sigma_f is left empty when path-level
/// covariance was not requested (large path sets).
struct FlowDistribution {
    Vector f;
    Matrix sigma_f;
    SparseMatrix sigma_f_given_q;
    Vector x;
    Matrix sigma_x;
    Matrix sigma_e;

    /// Covariance of measured flows, sigma_x + sigma_e.
    Matrix measured_cov() const;
};

/// Path cost moments. sigma_c may be empty; od_blocks always holds the
/// within-O-D blocks of the path cost covariance.
struct CostDistribution {
    Vector c;
    Matrix sigma_c;
    std::vector<Matrix> od_blocks;
};

enum class ChoiceModel { Logit, Probit };

struct EquilibriumConfig {
    ChoiceModel model = ChoiceModel::Probit;
    double theta = 1.0;          // logit dispersion, p ~ exp(-theta * c)
    int mc_samples = 20000;      // probit Monte Carlo draws per O-D pair
    std::uint64_t seed = 12345;  // probit common random numbers
    int max_iters = 1000;
    double tol = 1e-4;           // on ||p_next - p||_inf
    int msa_offset = 0;          // step 1 / (iter + 1 + offset)
    bool path_covariance = true; // keep dense path-level covariances

    void validate() const;
};

/// Block-diagonal multinomial covariance q_rs (diag(p_rs) - p_rs p_rs^T).
SparseMatrix conditional_path_cov(const PathSet& ps, const RouteChoice& rc, const Vector& q);

struct PathFlowMoments {
    Vector f;
    Matrix sigma_f;
    SparseMatrix sigma_f_given_q;
};

/// f = p_tilde q, sigma_f = sigma_f|q + p_tilde sigma_q p_tilde^T.
PathFlowMoments path_flow_distribution(const PathSet& ps, const RouteChoice& rc,
                                       const DemandDistribution& d);

/// x = Delta f, sigma_x = Delta sigma_f Delta^T. An empty sigma_e means zero.
FlowDistribution link_flow_distribution(const PathSet& ps, const Vector& f, const Matrix& sigma_f,
                                        const Matrix& sigma_e = {});

/// Same moments as path_flow_distribution followed by link_flow_distribution,
/// computed without forming the dense path covariance unless requested.
FlowDistribution flow_distribution(const PathSet& ps, const RouteChoice& rc,
                                   const DemandDistribution& d, bool path_covariance = true,
                                   const Matrix& sigma_e = {});

/// First-order propagation of link flow moments through the BPR functions:
/// c = Delta^T t(x), sigma_c = Delta^T J sigma_x J Delta with J = diag(t'(x)).
CostDistribution path_cost_distribution(const Network& net, const PathSet& ps, const Vector& x,
                                        const Matrix& sigma_x, bool full_covariance = true);

RouteChoice route_choice_logit(const PathSet& ps, const Vector& c, double theta);

RouteChoice route_choice_probit(const PathSet& ps, const CostDistribution& cd, int mc_samples,
                                std::uint64_t seed);

struct EquilibriumResult {
    RouteChoice route_choice;
    FlowDistribution flows;
    CostDistribution costs;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::vector<double> residual_trace;
};

/// Method-of-successive-averages fixed point p = psi(costs(flows(p, d))).
/// Non-convergence is reported through the result, not thrown.
EquilibriumResult solve_statistical_equilibrium(const Network& net, const PathSet& ps,
                                                const DemandDistribution& d,
                                                const EquilibriumConfig& cfg,
                                                const std::optional<Vector>& initial_p = std::nullopt);

/// Choice probabilities at free-flow costs with zero cost variance.
RouteChoice free_flow_route_choice(const Network& net, const PathSet& ps, const EquilibriumConfig& cfg);

} // namespace pode
