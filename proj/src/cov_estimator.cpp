#include "pode/cov_estimator.hpp"

#include "pode/error.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

namespace pode {

EmpiricalCov empirical_cov(const ObservationSet& obs) {
    const Eigen::Index n = obs.counts.rows();
    if (n < 1) throw InputError("empirical_cov: no observations");
    EmpiricalCov out;
    out.n = static_cast<int>(n);
    const Matrix centered = obs.counts.rowwise() - obs.counts.colwise().mean();
    Matrix scatter = centered.transpose() * centered;
    scatter = symmetrize(scatter);
    out.s_x = scatter / static_cast<double>(n);
    if (n >= 2) out.p_x = scatter / static_cast<double>(n - 1);
    return out;
}

void LassoConfig::validate() const {
    if (!(lambda >= 0.0)) throw InputError("lasso: lambda must be >= 0");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw InputError("lasso: backtrack factor must lie in (0, 1)");
    if (max_iters < 0) throw InputError("lasso: max_iters must be >= 0");
    if (step_init < 0.0) throw InputError("lasso: step_init must be >= 0");
    if (!(tol >= 0.0)) throw InputError("lasso: tol must be >= 0");
}

Matrix CovProblem::implied(const Matrix& sigma_q) const {
    Matrix left = g * sigma_q;
    Matrix out = left * g.transpose();
    out += route;
    return symmetrize(out);
}

CovProblem make_cov_problem(const Matrix& s_x_obs, const PathSet& ps, const RouteChoice& rc, const Vector& q_hat) {
    const auto m = static_cast<Eigen::Index>(ps.num_observed());
    if (s_x_obs.rows() != m || s_x_obs.cols() != m)
        throw InputError("covariance problem: S must be |A^o| x |A^o|");
    if (q_hat.size() != ps.num_ods()) throw InputError("covariance problem: q_hat dimension mismatch");
    if (rc.p.size() != ps.num_paths()) throw InputError("covariance problem: route choice dimension mismatch");
    CovProblem pr;
    pr.s_x = symmetrize(s_x_obs);
    pr.g = ps.delta_obs * rc.p_tilde;
    const SparseMatrix cond = conditional_path_cov(ps, rc, q_hat.cwiseMax(0.0));
    pr.route = Matrix(ps.delta_obs * cond * SparseMatrix(ps.delta_obs.transpose()));
    pr.route = symmetrize(pr.route);
    return pr;
}

namespace {

void check_dim(const Matrix& sigma_q, const CovProblem& pr) {
    if (sigma_q.rows() != pr.dim() || sigma_q.cols() != pr.dim())
        throw InputError("sigma_q must be " + std::to_string(pr.dim()) + "x" + std::to_string(pr.dim()));
}

// G X G^T without the route part.
Matrix load(const CovProblem& pr, const Matrix& x) {
    Matrix left = pr.g * x;
    return left * pr.g.transpose();
}

Matrix gradient_from_residual(const CovProblem& pr, const Matrix& residual) {
    const SparseMatrix gt = pr.g.transpose();
    Matrix right = residual * pr.g;
    Matrix out = gt * right;
    out *= 2.0;
    return symmetrize(out);
}

double l1(const Matrix& x) { return x.cwiseAbs().sum(); }

Matrix prox(const Matrix& v, double threshold, int exact_max_dim) {
    Matrix sym = symmetrize(v);
    Matrix y = threshold == 0.0 ? sym : soft_threshold(sym, threshold);
    // A Cholesky test is far cheaper than the eigendecomposition it avoids.
    const double shift = std::min(1e-11, 1e-12 * std::max(1.0, y.diagonal().cwiseAbs().maxCoeff()));
    if (threshold == 0.0 || sym.rows() > exact_max_dim) return project_psd_blockwise(y, shift);
    if (is_psd_fast(y, shift)) return y;

    // Alternating proximal steps converge to the prox of l1 + PSD indicator.
    Matrix x = sym;
    Matrix p = Matrix::Zero(sym.rows(), sym.cols());
    Matrix q = p;
    const double scale = 1e-13 * (1.0 + sym.cwiseAbs().maxCoeff());
    for (int it = 0; it < 500; ++it) {
        Matrix yk = soft_threshold(x + p, threshold);
        p = x + p - yk;
        Matrix xn = project_psd(yk + q);
        q = yk + q - xn;
        const double change = (xn - x).cwiseAbs().maxCoeff();
        x = std::move(xn);
        if (change <= scale) break;
    }
    return x;
}

double lipschitz(const CovProblem& pr) {
    // ||grad f(A) - grad f(B)|| <= 2 ||G^T G||^2 ||A - B||
    const Eigen::Index k = pr.g.cols();
    if (k == 0) return 1.0;
    Vector v = Vector::Ones(k) / std::sqrt(static_cast<double>(k));
    double ev = 0.0;
    for (int it = 0; it < 100; ++it) {
        Vector w = pr.g.transpose() * (pr.g * v);
        const double norm = w.norm();
        if (norm == 0.0) break;
        const double next = v.dot(w);
        v = w / norm;
        if (std::abs(next - ev) <= 1e-10 * next) {
            ev = next;
            break;
        }
        ev = next;
    }
    return std::max(2.0 * ev * ev * 1.01, 1e-300);
}

int count_nnz(const Matrix& x) { return static_cast<int>((x.array().abs() > 1e-8).count()); }

} // namespace

double smooth_objective(const Matrix& sigma_q, const CovProblem& problem) {
    check_dim(sigma_q, problem);
    return (problem.s_x - problem.implied(sigma_q)).squaredNorm();
}

double lasso_objective(const Matrix& sigma_q, const CovProblem& problem, double lambda) {
    return smooth_objective(sigma_q, problem) + lambda * l1(sigma_q);
}

Matrix smooth_gradient(const Matrix& sigma_q, const CovProblem& problem) {
    check_dim(sigma_q, problem);
    const Matrix residual = problem.implied(sigma_q) - problem.s_x;
    return gradient_from_residual(problem, residual);
}

double wishart_nll(const Matrix& sigma_q, const CovProblem& problem) {
    check_dim(sigma_q, problem);
    const Matrix implied = problem.implied(sigma_q);
    Eigen::LLT<Matrix> llt(implied);
    if (llt.info() != Eigen::Success) {
        Matrix jittered = implied;
        jittered.diagonal().array() += ridge_jitter(implied, 1e-10);
        llt.compute(jittered);
        if (llt.info() != Eigen::Success)
            throw NumericalError("wishart_nll: implied observed covariance is not positive definite");
    }
    const Matrix solved = llt.solve(problem.s_x);
    return log_det(llt) + solved.trace();
}

Matrix soft_threshold(const Matrix& beta, double lambda) {
    if (lambda < 0.0) throw InputError("soft_threshold: lambda must be >= 0");
    return beta.unaryExpr([lambda](double b) {
        if (b > lambda) return b - lambda;
        if (b < -lambda) return b + lambda;
        return 0.0;
    });
}

double lambda_max(const CovProblem& problem) {
    const Matrix zero = Matrix::Zero(problem.dim(), problem.dim());
    return smooth_gradient(zero, problem).cwiseAbs().maxCoeff();
}

CovEstimate solve_sigma_q(const CovProblem& problem, const LassoConfig& cfg, const std::optional<Matrix>& start) {
    cfg.validate();
    const Eigen::Index k = problem.dim();
    Matrix x = start ? *start : Matrix::Zero(k, k);
    check_dim(x, problem);
    x = symmetrize(x);

    const Matrix base = problem.route - problem.s_x; // residual = G X G^T + base
    Matrix gx = load(problem, x);
    double f_x = (gx + base).squaredNorm();
    double obj = f_x + cfg.lambda * l1(x);
    const double obj0 = obj;
    const double blowup_floor = 1e-12 * (1.0 + problem.s_x.squaredNorm());

    CovEstimate out;
    out.objective_trace.push_back(obj);
    double step = cfg.step_init > 0.0 ? cfg.step_init : 1.0 / lipschitz(problem);
    const bool fista = cfg.algorithm == LassoAlgorithm::FISTA;
    Matrix x_prev = x;
    Matrix gx_prev = gx;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        Matrix y, gy;
        if (fista && it > 2) {
            const double beta = static_cast<double>(it - 2) / static_cast<double>(it + 1);
            y = x + beta * (x - x_prev);
            gy = gx + beta * (gx - gx_prev);
        } else {
            y = x;
            gy = gx;
        }
        const Matrix residual = gy + base;
        const double f_y = residual.squaredNorm();
        const Matrix grad = gradient_from_residual(problem, residual);

        Matrix xn, gxn;
        double f_xn = 0.0;
        for (int bt = 0; bt < 60; ++bt) {
            xn = prox(y - step * grad, step * cfg.lambda, cfg.exact_prox_max_dim);
            gxn = load(problem, xn);
            f_xn = (gxn + base).squaredNorm();
            const Matrix d = xn - y;
            const double model = f_y + grad.cwiseProduct(d).sum() + d.squaredNorm() / (2.0 * step);
            if (f_xn <= model + 1e-12 * std::abs(f_y)) break;
            step *= cfg.backtrack;
        }
        const double obj_n = f_xn + cfg.lambda * l1(xn);
        out.iterations = it;

        // ISTA is a descent method; keep its trace monotone even when the
        // prox is only approximate.
        if (!fista && obj_n > obj) {
            out.converged = true;
            break;
        }
        if (obj_n > 10.0 * obj0 && obj_n > blowup_floor) {
            std::string msg = "lasso diverged at iteration " + std::to_string(it) + "; objective trace:";
            for (double v : out.objective_trace) msg += " " + std::to_string(v);
            throw NumericalError(msg);
        }

        x_prev = std::move(x);
        gx_prev = std::move(gx);
        x = std::move(xn);
        gx = std::move(gxn);
        out.objective_trace.push_back(obj_n);
        const double change = std::abs(obj_n - obj);
        obj = obj_n;
        if (change <= cfg.tol * std::max(1.0, std::abs(obj))) {
            out.converged = true;
            break;
        }
    }

    out.sigma_q_hat = symmetrize(x);
    out.objective = lasso_objective(out.sigma_q_hat, problem, cfg.lambda);
    out.nnz = count_nnz(out.sigma_q_hat);
    return out;
}

std::vector<LassoPathPoint> lasso_path(const CovProblem& problem, const std::vector<double>& grid,
                                       const LassoConfig& cfg, bool cold_start) {
    if (grid.empty()) throw InputError("lasso_path: empty lambda grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0)) throw InputError("lasso_path: lambda values must be >= 0");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("lasso_path: lambda grid must be ascending");
    }
    std::vector<LassoPathPoint> out;
    out.reserve(grid.size());
    std::optional<Matrix> warm;
    for (double lambda : grid) {
        LassoConfig c = cfg;
        c.lambda = lambda;
        LassoPathPoint point{lambda, solve_sigma_q(problem, c, cold_start ? std::nullopt : warm)};
        if (!cold_start) warm = point.estimate.sigma_q_hat;
        out.push_back(std::move(point));
    }
    return out;
}

void write_lasso_path_csv(const std::filesystem::path& file, const std::vector<LassoPathPoint>& path) {
    std::ofstream out(file);
    if (!out) throw InputError("cannot write " + file.string());
    out << "lambda,entry_row,entry_col,value\n" << std::setprecision(12);
    for (const auto& point : path) {
        const Matrix& s = point.estimate.sigma_q_hat;
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            for (Eigen::Index j = i; j < s.cols(); ++j)
                out << point.lambda << ',' << i + 1 << ',' << j + 1 << ',' << s(i, j) << '\n';
    }
}

} // namespace pode
