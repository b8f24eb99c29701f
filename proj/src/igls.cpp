#include "pode/igls.hpp"

#include "pode/error.hpp"
#include "rng.hpp"

#include <cmath>
#include <string>

namespace pode {

namespace {

void check_pair(const Vector& mu1, const Matrix& sigma1, const Vector& mu2, const Matrix& sigma2) {
    const Eigen::Index d = mu1.size();
    if (mu2.size() != d || sigma1.rows() != d || sigma1.cols() != d || sigma2.rows() != d || sigma2.cols() != d)
        throw InputError("distance: dimension mismatch");
}

} // namespace

double hellinger(const Vector& mu1, const Matrix& sigma1, const Vector& mu2, const Matrix& sigma2) {
    check_pair(mu1, sigma1, mu2, sigma2);
    if (mu1.size() == 0) return 0.0;
    const Matrix s1 = symmetrize(sigma1);
    const Matrix s2 = symmetrize(sigma2);
    const Matrix avg = 0.5 * (s1 + s2);
    const auto l1 = robust_cholesky(s1, "hellinger: first covariance");
    const auto l2 = robust_cholesky(s2, "hellinger: second covariance");
    const auto la = robust_cholesky(avg, "hellinger: mean covariance");
    const Vector d = mu2 - mu1;
    const double maha = d.dot(la.solve(d));
    const double log_bc = 0.25 * log_det(l1) + 0.25 * log_det(l2) - 0.5 * log_det(la) - 0.125 * maha;
    return std::clamp(1.0 - std::exp(log_bc), 0.0, 1.0);
}

double kl(const Vector& mu1, const Matrix& sigma1, const Vector& mu2, const Matrix& sigma2) {
    check_pair(mu1, sigma1, mu2, sigma2);
    const auto d = static_cast<double>(mu1.size());
    if (mu1.size() == 0) return 0.0;
    const Matrix s1 = symmetrize(sigma1);
    const Matrix s2 = symmetrize(sigma2);
    const auto l1 = robust_cholesky(s1, "kl: first covariance");
    const auto l2 = robust_cholesky(s2, "kl: second covariance");
    const Vector diff = mu2 - mu1;
    const double trace = l2.solve(s1).trace();
    const double maha = diff.dot(l2.solve(diff));
    return std::max(0.0, 0.5 * (log_det(l2) - log_det(l1) - d + trace + maha));
}

double distance(Distance metric, const Vector& mu1, const Matrix& sigma1, const Vector& mu2, const Matrix& sigma2) {
    return metric == Distance::KL ? kl(mu1, sigma1, mu2, sigma2) : hellinger(mu1, sigma1, mu2, sigma2);
}

double stopping_tau(const DemandDistribution& prev, const DemandDistribution& next, Distance metric) {
    return distance(metric, next.mean, next.cov, prev.mean, prev.cov);
}

Loading network_loading(const Network& net, const PathSet& ps, const DemandDistribution& demand,
                        const RouteChoice& rc, bool path_covariance) {
    Loading out;
    out.flows = flow_distribution(ps, rc, demand, path_covariance);
    out.costs = path_cost_distribution(net, ps, out.flows.x, out.flows.sigma_x, path_covariance);
    return out;
}

void IGLSConfig::validate() const {
    if (outer_iters < 0) throw InputError("igls: outer_iters must be >= 0");
    if (inner_iters < 1) throw InputError("igls: inner_iters must be >= 1");
    if (!(tau_tol > 0.0)) throw InputError("igls: tau_tol must be > 0");
    if (!(init_sigma_scale >= 0.0)) throw InputError("igls: init_sigma_scale must be >= 0");
    if (!(mean_tol >= 0.0)) throw InputError("igls: mean_tol must be >= 0");
    equilibrium.validate();
    lasso.validate();
}

DemandDistribution igls_initial_demand(const PathSet& ps, const RouteChoice& rc, const Vector& x_hat_obs,
                                       const IGLSConfig& cfg) {
    const int k = ps.num_ods();
    DemandDistribution d;
    if (cfg.prior) {
        cfg.prior->validate(k);
        d.mean = cfg.prior->q_h;
    } else {
        const Vector ones = Vector::Ones(k);
        const double loaded = (ps.delta_obs * (rc.p_tilde * ones)).sum();
        const double observed = x_hat_obs.sum();
        d.mean = ones * (loaded > 0.0 && observed > 0.0 ? observed / loaded : 1.0);
    }
    if (cfg.init_sigma_seed) {
        auto rng = detail::substream(*cfg.init_sigma_seed, detail::kDemandStream, 0xC0u);
        std::normal_distribution<double> normal;
        Matrix a(k, k);
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = normal(rng);
        d.cov = symmetrize(cfg.init_sigma_scale * (a * a.transpose()) / static_cast<double>(k));
    } else {
        d.cov = cfg.init_sigma_scale * Matrix::Identity(k, k);
    }
    return d;
}

namespace {

template <class F>
auto at_iteration(int outer, const char* step, F&& f) {
    try {
        return f();
    } catch (const NumericalError& e) {
        throw NumericalError("igls outer iteration " + std::to_string(outer) + " (" + step + "): " + e.what());
    } catch (const InputError& e) {
        throw InputError("igls outer iteration " + std::to_string(outer) + " (" + step + "): " + e.what());
    }
}

} // namespace

IGLSResult run_igls(const Network& net, const PathSet& ps, const ObservationSet& obs, const IGLSConfig& cfg) {
    cfg.validate();
    obs.validate();
    if (obs.observed.indices != ps.observed.indices)
        throw InputError("igls: observation columns do not match the path set's observed links");
    if (ps.num_links() != net.num_links() || ps.num_ods() != net.num_ods())
        throw InputError("igls: path set does not belong to the network");

    const int n = obs.days();
    const Vector x_hat = observed_mean(obs);
    const EmpiricalCov emp = empirical_cov(obs);

    IGLSResult res;
    res.route_choice = free_flow_route_choice(net, ps, cfg.equilibrium);
    res.demand = igls_initial_demand(ps, res.route_choice, x_hat, cfg);

    EquilibriumMeanConfig mean_cfg;
    mean_cfg.equilibrium = cfg.equilibrium;
    mean_cfg.equilibrium.path_covariance = false;
    mean_cfg.max_passes = cfg.inner_iters;
    mean_cfg.tol = cfg.mean_tol;
    mean_cfg.gls = cfg.gls;

    Matrix sigma_x_obs; // unknown before the first loading: identity weight
    std::optional<Matrix> warm;
    for (int outer = 1; outer <= cfg.outer_iters; ++outer) {
        const DemandDistribution prev = res.demand;

        // Step 1: mean with covariances fixed.
        const auto mean = at_iteration(outer, "mean", [&] {
            return estimate_f_equilibrium(net, ps, x_hat, sigma_x_obs, n, prev.mean, prev.cov, cfg.prior,
                                          mean_cfg, res.route_choice.p);
        });
        res.route_choice = mean.route_choice;
        res.mean_residuals.push_back(mean.residual);
        res.mean_passes.push_back(mean.passes);

        // Step 2: covariance with the mean fixed.
        const auto cov = at_iteration(outer, "covariance", [&] {
            const CovProblem problem = make_cov_problem(emp.s_x, ps, res.route_choice, mean.estimate.q_hat);
            return solve_sigma_q(problem, cfg.lasso, warm);
        });
        warm = cov.sigma_q_hat;
        res.lasso_objectives.push_back(cov.objective);
        res.demand = DemandDistribution{mean.estimate.q_hat, cov.sigma_q_hat};

        // Step 3: network loading.
        const Loading loading = at_iteration(outer, "loading", [&] {
            return network_loading(net, ps, res.demand, res.route_choice, cfg.equilibrium.path_covariance);
        });
        res.flows = loading.flows;
        res.costs = loading.costs;
        sigma_x_obs = principal_submatrix(res.flows.sigma_x, ps.observed.indices);

        // Step 4: stopping criterion.
        const double tau = at_iteration(outer, "stopping", [&] { return stopping_tau(prev, res.demand, cfg.distance); });
        res.tau_trace.push_back(tau);
        res.final_tau = tau;
        res.outer_iterations = outer;
        if (tau <= cfg.tau_tol) {
            res.converged = true;
            break;
        }
    }

    if (res.outer_iterations == 0) {
        const Loading loading = network_loading(net, ps, res.demand, res.route_choice, cfg.equilibrium.path_covariance);
        res.flows = loading.flows;
        res.costs = loading.costs;
        sigma_x_obs = principal_submatrix(res.flows.sigma_x, ps.observed.indices);
    }
    if (emp.has_p_x()) res.sigma_e_obs = project_psd(emp.p_x - sigma_x_obs);
    return res;
}

} // namespace pode
