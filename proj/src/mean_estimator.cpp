#include "pode/mean_estimator.hpp"

#include "pode/error.hpp"

#include <Eigen/QR>

#include <cmath>
#include <string>

namespace pode {

void HistoricalPrior::validate(int num_ods) const {
    if (q_h.size() != num_ods) throw InputError("prior: q_h must have one entry per O-D pair");
    if ((q_h.array() < 0.0).any()) throw InputError("prior: q_h must be nonnegative");
    if (sigma_q_h.size() == 0) return;
    if (sigma_q_h.rows() != num_ods || sigma_q_h.cols() != num_ods)
        throw InputError("prior: sigma_q_h must be square with one row per O-D pair");
    Eigen::LLT<Matrix> llt(symmetrize(sigma_q_h));
    if (llt.info() != Eigen::Success) throw InputError("prior: sigma_q_h must be positive definite");
}

Vector observed_mean(const ObservationSet& obs) {
    if (obs.counts.rows() < 1) throw InputError("observed_mean: no observations");
    return obs.counts.colwise().mean().transpose();
}

Matrix mean_sampling_cov(const Matrix& sigma_x_obs, int n) {
    if (n < 1) throw InputError("mean_sampling_cov: n must be >= 1");
    return sigma_x_obs / static_cast<double>(n);
}

namespace {

// Symmetric positive definite weight applied as a product: identity,
// diagonal, or the inverse of a dense covariance.
class Weight {
public:
    static Weight identity() { return Weight{}; }
    static Weight diagonal(Vector w) {
        Weight out;
        out.diag_ = std::move(w);
        return out;
    }
    static Weight inverse_of(const Matrix& sigma, double jitter) {
        Weight out;
        Matrix s = symmetrize(sigma);
        s.diagonal().array() += ridge_jitter(s, jitter);
        out.llt_ = robust_cholesky(s, "link covariance");
        out.dense_ = true;
        return out;
    }

    Vector apply(const Vector& v) const {
        if (dense_) return llt_.solve(v);
        if (diag_.size()) return diag_.cwiseProduct(v);
        return v;
    }

private:
    bool dense_ = false;
    Vector diag_;
    Eigen::LLT<Matrix> llt_;
};

// min_z>=0 n (A z - x)^T W (A z - x) + (q_h - C z)^T P (q_h - C z)
struct GlsProblem {
    const SparseMatrix* a = nullptr;
    Vector x;
    Weight w;
    double n = 1.0;
    const SparseMatrix* c = nullptr; // null means identity
    std::optional<Vector> q_h;
    Weight p;
};

bool rank_deficient(const SparseMatrix& a) {
    if (a.cols() > a.rows()) return true;
    if (static_cast<double>(a.rows()) * static_cast<double>(a.cols()) > 1e7) return false;
    Eigen::ColPivHouseholderQR<Matrix> qr{Matrix(a)};
    return qr.rank() < a.cols();
}

double largest_eigenvalue(const std::function<Vector(const Vector&)>& h, Eigen::Index dim) {
    Vector v = Vector::Ones(dim) / std::sqrt(static_cast<double>(dim));
    double lambda = 0.0;
    for (int k = 0; k < 30; ++k) {
        Vector hv = h(v);
        const double norm = hv.norm();
        if (norm == 0.0) return 0.0;
        lambda = norm;
        v = hv / norm;
    }
    return lambda;
}

struct GlsSolution {
    NonnegSolution qp;
    bool non_unique = false;
};

GlsSolution solve_gls(const GlsProblem& g, Eigen::Index dim, const GlsOptions& options) {
    const SparseMatrix& a = *g.a;
    const bool has_prior = g.q_h.has_value();
    const bool has_data = g.n > 0.0;

    auto to_q = [&](const Vector& z) -> Vector { return g.c ? Vector(*g.c * z) : z; };
    auto from_q = [&](const Vector& v) -> Vector { return g.c ? Vector(g.c->transpose() * v) : v; };

    NonnegQuadratic problem;
    auto base = [&](const Vector& z) {
        Vector out = Vector::Zero(dim);
        if (has_data) out += 2.0 * g.n * (a.transpose() * g.w.apply(a * z));
        if (has_prior) out += 2.0 * from_q(g.p.apply(to_q(z)));
        return out;
    };
    problem.b = Vector::Zero(dim);
    if (has_data) {
        const Vector wx = g.w.apply(g.x);
        problem.b += 2.0 * g.n * (a.transpose() * wx);
        problem.constant += g.n * g.x.dot(wx);
    }
    if (has_prior) {
        const Vector pq = g.p.apply(*g.q_h);
        problem.b += 2.0 * from_q(pq);
        problem.constant += g.q_h->dot(pq);
    }

    GlsSolution out;
    // Without a prior a rank-deficient data term has a face of minimizers;
    // a tiny ridge selects (approximately) the minimum-norm one.
    double ridge = 0.0;
    if (!has_prior && (!has_data || rank_deficient(a))) {
        out.non_unique = true;
        ridge = 1e-10 * std::max(largest_eigenvalue(base, dim), 1e-300);
    }
    problem.apply_h = [&, ridge](const Vector& z) -> Vector {
        Vector hz = base(z);
        if (ridge > 0.0) hz += ridge * z;
        return hz;
    };

    Vector start = options.start ? *options.start : Vector::Zero(dim);
    if (start.size() != dim) start = Vector::Zero(dim);
    out.qp = solve_nonneg_quadratic(problem, start, options.solver);
    return out;
}

void check_link_inputs(const PathSet& ps, const Vector& x_hat_obs, const Matrix& sigma_x_obs) {
    const auto m = static_cast<Eigen::Index>(ps.num_observed());
    if (x_hat_obs.size() != m) throw InputError("observed mean must have one entry per observed link");
    if (sigma_x_obs.size() != 0 && (sigma_x_obs.rows() != m || sigma_x_obs.cols() != m))
        throw InputError("observed link covariance must be |A^o| x |A^o|");
}

Weight link_weight(const Matrix& sigma_x_obs, double jitter) {
    return sigma_x_obs.size() == 0 ? Weight::identity() : Weight::inverse_of(sigma_x_obs, jitter);
}

Weight prior_weight(const HistoricalPrior& prior) {
    return prior.sigma_q_h.size() == 0 ? Weight::identity() : Weight::inverse_of(prior.sigma_q_h, 0.0);
}

MeanEstimate finish(const GlsSolution& sol, Vector q, Vector f, const Vector& x_hat_obs) {
    MeanEstimate est;
    est.q_hat = std::move(q);
    est.f_hat = std::move(f);
    est.x_hat_obs = x_hat_obs;
    est.objective_trace = sol.qp.objective_trace;
    est.objective = sol.qp.objective_trace.empty() ? 0.0 : sol.qp.objective_trace.back();
    est.kkt_residual = sol.qp.kkt_residual;
    est.non_unique = sol.non_unique;
    est.converged = sol.qp.converged;
    return est;
}

} // namespace

MeanEstimate estimate_q_gls(const PathSet& ps, const RouteChoice& rc, const Vector& x_hat_obs,
                            const Matrix& sigma_x_obs, int n, const std::optional<HistoricalPrior>& prior,
                            const GlsOptions& options) {
    check_link_inputs(ps, x_hat_obs, sigma_x_obs);
    if (n < 0) throw InputError("estimate_q_gls: n must be >= 0");
    if (n == 0 && !prior) throw InputError("estimate_q_gls: n = 0 requires a prior");
    if (rc.p.size() != ps.num_paths()) throw InputError("estimate_q_gls: route choice dimension mismatch");
    if (prior) prior->validate(ps.num_ods());

    const SparseMatrix a = ps.delta_obs * rc.p_tilde;
    GlsProblem g;
    g.a = &a;
    g.x = x_hat_obs;
    g.n = n;
    if (n > 0) g.w = link_weight(sigma_x_obs, options.jitter);
    if (prior) {
        g.q_h = prior->q_h;
        g.p = prior_weight(*prior);
    }
    const GlsSolution sol = solve_gls(g, ps.num_ods(), options);
    Vector f = rc.p_tilde * sol.qp.z;
    return finish(sol, sol.qp.z, std::move(f), x_hat_obs);
}

MeanEstimate estimate_q_simple(const PathSet& ps, const RouteChoice& rc, const Vector& x_hat_obs,
                               const Vector& weights, const GlsOptions& options) {
    check_link_inputs(ps, x_hat_obs, {});
    if (weights.size() != x_hat_obs.size()) throw InputError("estimate_q_simple: one weight per observed link");
    if ((weights.array() < 0.0).any()) throw InputError("estimate_q_simple: weights must be nonnegative");
    if (rc.p.size() != ps.num_paths()) throw InputError("estimate_q_simple: route choice dimension mismatch");

    // Rows with zero weight carry no information; dropping them keeps the
    // rank test honest.
    std::vector<Eigen::Triplet<double>> t;
    std::vector<int> kept;
    for (Eigen::Index j = 0; j < weights.size(); ++j)
        if (weights[j] > 0.0) {
            t.emplace_back(static_cast<int>(kept.size()), static_cast<int>(j), 1.0);
            kept.push_back(static_cast<int>(j));
        }
    SparseMatrix select(static_cast<Eigen::Index>(kept.size()), weights.size());
    select.setFromTriplets(t.begin(), t.end());

    const SparseMatrix a = select * (ps.delta_obs * rc.p_tilde);
    GlsProblem g;
    g.a = &a;
    g.x = select * x_hat_obs;
    g.w = Weight::diagonal((select * weights).cwiseAbs2());
    g.n = 1.0;
    GlsSolution sol;
    if (kept.empty()) {
        sol.non_unique = true;
        sol.qp.z = Vector::Zero(ps.num_ods());
        sol.qp.objective_trace = {0.0};
        sol.qp.converged = true;
    } else {
        sol = solve_gls(g, ps.num_ods(), options);
    }
    Vector f = rc.p_tilde * sol.qp.z;
    return finish(sol, sol.qp.z, std::move(f), x_hat_obs);
}

MeanEstimate estimate_q_pinv(const PathSet& ps, const RouteChoice& rc, const Vector& x_hat_obs,
                             const Matrix& sigma_x_obs) {
    check_link_inputs(ps, x_hat_obs, sigma_x_obs);
    if (sigma_x_obs.size() == 0) throw InputError("estimate_q_pinv: link covariance required");
    if (rc.p.size() != ps.num_paths()) throw InputError("estimate_q_pinv: route choice dimension mismatch");
    const Matrix root = inverse_sqrt_spd(symmetrize(sigma_x_obs));
    const Matrix d = root * Matrix(ps.delta_obs * rc.p_tilde);
    const Vector v = root * x_hat_obs;
    MeanEstimate est;
    est.q_hat = (pseudo_inverse(d) * v).cwiseMax(0.0);
    est.f_hat = rc.p_tilde * est.q_hat;
    est.x_hat_obs = x_hat_obs;
    const Vector r = d * est.q_hat - v;
    est.objective = r.squaredNorm();
    est.objective_trace = {est.objective};
    Eigen::ColPivHouseholderQR<Matrix> qr(d);
    est.non_unique = qr.rank() < d.cols();
    return est;
}

MeanEstimate estimate_f_gls(const PathSet& ps, const Vector& x_hat_obs, const Matrix& sigma_x_obs, int n,
                            const std::optional<HistoricalPrior>& prior, const GlsOptions& options) {
    check_link_inputs(ps, x_hat_obs, sigma_x_obs);
    if (!prior) throw InputError("estimate_f_gls: a historical prior is required for path flow estimation");
    if (n < 0) throw InputError("estimate_f_gls: n must be >= 0");
    prior->validate(ps.num_ods());

    GlsProblem g;
    g.a = &ps.delta_obs;
    g.x = x_hat_obs;
    g.n = n;
    if (n > 0) g.w = link_weight(sigma_x_obs, options.jitter);
    g.c = &ps.od_incidence;
    g.q_h = prior->q_h;
    g.p = prior_weight(*prior);
    const GlsSolution sol = solve_gls(g, ps.num_paths(), options);
    Vector q = ps.od_incidence * sol.qp.z;
    return finish(sol, std::move(q), sol.qp.z, x_hat_obs);
}

EquilibriumMeanEstimate estimate_f_equilibrium(const Network& net, const PathSet& ps, const Vector& x_hat_obs,
                                               const Matrix& sigma_x_obs, int n, const Vector& q_init,
                                               const Matrix& sigma_q, const std::optional<HistoricalPrior>& prior,
                                               const EquilibriumMeanConfig& cfg,
                                               const std::optional<Vector>& p_init) {
    if (cfg.max_passes < 1) throw InputError("estimate_f_equilibrium: max_passes must be >= 1");
    if (q_init.size() != ps.num_ods()) throw InputError("estimate_f_equilibrium: q_init dimension mismatch");

    EquilibriumMeanEstimate out;
    Vector q = q_init.cwiseMax(0.0);
    std::optional<Vector> p = p_init;
    for (int pass = 0; pass < cfg.max_passes; ++pass) {
        out.equilibrium = solve_statistical_equilibrium(net, ps, DemandDistribution{q, sigma_q}, cfg.equilibrium, p);
        GlsOptions gls = cfg.gls;
        gls.start = q;
        out.estimate = estimate_q_gls(ps, out.equilibrium.route_choice, x_hat_obs, sigma_x_obs, n, prior, gls);
        out.residual = (out.estimate.q_hat - q).lpNorm<Eigen::Infinity>() / (1.0 + q.lpNorm<Eigen::Infinity>());
        out.passes = pass + 1;
        q = out.estimate.q_hat;
        p = out.equilibrium.route_choice.p;
        if (out.residual <= cfg.tol) {
            out.converged = true;
            break;
        }
    }
    out.route_choice = out.equilibrium.route_choice;
    return out;
}

} // namespace pode
