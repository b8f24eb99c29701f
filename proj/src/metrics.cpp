#include "pode/metrics.hpp"

#include "pode/cov_estimator.hpp"
#include "pode/error.hpp"
#include "pode/mean_estimator.hpp"

#include <cmath>

namespace pode {

double prmse(const Vector& q_hat, const Vector& q_true) {
    if (q_hat.size() != q_true.size()) throw InputError("prmse: dimension mismatch");
    if (q_true.size() == 0) throw InputError("prmse: empty demand vectors");
    const double total = q_true.sum();
    if (!(total > 0.0)) throw InputError("prmse: total true demand must be positive");
    const auto k = static_cast<double>(q_true.size());
    return 100.0 * std::sqrt((q_hat - q_true).squaredNorm() / k) * k / total;
}

double kl_od(const Vector& q_hat, const Matrix& sigma_hat, const Vector& q_true, const Matrix& sigma_true) {
    return kl(q_hat, sigma_hat, q_true, sigma_true);
}

double goodness_of_fit(const Vector& x_hat_obs, const Matrix& sigma_hat_obs, const ObservationSet& obs,
                       Distance metric) {
    if (obs.days() < 2) throw InputError("goodness_of_fit: at least two days are required");
    const EmpiricalCov emp = empirical_cov(obs);
    return distance(metric, x_hat_obs, sigma_hat_obs, observed_mean(obs), emp.p_x);
}

VarianceDecomposition variance_decomposition(const PathSet& ps, const RouteChoice& rc, const Vector& q_hat,
                                             const Matrix& sigma_q, const Matrix& sigma_e) {
    const auto a = static_cast<Eigen::Index>(ps.num_links());
    if (q_hat.size() != ps.num_ods() || sigma_q.rows() != ps.num_ods() || sigma_q.cols() != ps.num_ods())
        throw InputError("variance_decomposition: demand dimension mismatch");
    if (rc.p.size() != ps.num_paths()) throw InputError("variance_decomposition: route choice dimension mismatch");
    if (sigma_e.size() != 0 && (sigma_e.rows() != a || sigma_e.cols() != a))
        throw InputError("variance_decomposition: sigma_e must be |A| x |A|");

    VarianceDecomposition out;
    const SparseMatrix g = ps.delta * rc.p_tilde;
    Matrix left = g * sigma_q;
    out.demand_part = symmetrize(left * g.transpose());
    const SparseMatrix cond = conditional_path_cov(ps, rc, q_hat);
    out.route_part = symmetrize(Matrix(ps.delta * cond * SparseMatrix(ps.delta.transpose())));
    out.error_part = sigma_e.size() == 0 ? Matrix::Zero(a, a) : symmetrize(sigma_e);

    const Vector d = out.demand_part.diagonal();
    const Vector r = out.route_part.diagonal();
    const Vector e = out.error_part.diagonal();
    out.total = d + r + e;
    out.demand_share = Vector::Zero(a);
    out.route_share = Vector::Zero(a);
    out.error_share = Vector::Zero(a);
    out.defined.assign(static_cast<std::size_t>(a), false);
    for (Eigen::Index i = 0; i < a; ++i) {
        if (!(out.total[i] > 0.0)) continue;
        out.defined[static_cast<std::size_t>(i)] = true;
        out.demand_share[i] = d[i] / out.total[i];
        out.route_share[i] = r[i] / out.total[i];
        out.error_share[i] = e[i] / out.total[i];
    }
    const double tr = out.total.sum();
    if (tr > 0.0) {
        out.demand_trace_share = d.sum() / tr;
        out.route_trace_share = r.sum() / tr;
        out.error_trace_share = e.sum() / tr;
    }
    return out;
}

} // namespace pode
