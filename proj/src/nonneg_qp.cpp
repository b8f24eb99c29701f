#include "pode/nonneg_qp.hpp"

#include "pode/error.hpp"

#include <algorithm>
#include <cmath>

namespace pode {

double kkt_residual(const Vector& z, const Vector& gradient, const Vector& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double v = z[i] > 0.0 ? std::abs(gradient[i]) : std::max(0.0, -gradient[i]);
        worst = std::max(worst, v);
    }
    const double scale = std::max(1.0, b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
    return worst / scale;
}

namespace {

struct State {
    Vector z, hz, g;
    double j = 0.0;
};

// Projected search along z + alpha * d. The decrease is evaluated from the
// gradient and the change in Hz, which avoids cancellation in J itself.
bool projected_search(const NonnegQuadratic& p, State& s, const Vector& d, double alpha, double armijo) {
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
        Vector zt = (s.z + alpha * d).cwiseMax(0.0);
        const Vector step = zt - s.z;
        if (step.lpNorm<Eigen::Infinity>() == 0.0) return false;
        Vector hzt = p.apply_h(zt);
        const double gs = s.g.dot(step);
        const double delta = gs + 0.5 * step.dot(hzt - s.hz);
        if (delta <= armijo * gs && delta <= 0.0) {
            s.z = std::move(zt);
            s.hz = std::move(hzt);
            s.g = s.hz - p.b;
            s.j += delta;
            return true;
        }
    }
    return false;
}

std::vector<char> active_set(const Vector& z) {
    std::vector<char> a(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) a[static_cast<std::size_t>(i)] = z[i] <= 0.0;
    return a;
}

} // namespace

NonnegSolution solve_nonneg_quadratic(const NonnegQuadratic& problem, const Vector& z0,
                                      const NonnegOptions& options) {
    const Eigen::Index n = problem.b.size();
    if (z0.size() != 0 && z0.size() != n) throw InputError("nonneg QP: start point has wrong dimension");
    if (!problem.apply_h) throw InputError("nonneg QP: missing Hessian product");

    State s;
    s.z = z0.size() ? Vector(z0.cwiseMax(0.0)) : Vector(Vector::Zero(n));
    s.hz = problem.apply_h(s.z);
    s.g = s.hz - problem.b;
    s.j = problem.value(s.z, s.hz);

    NonnegSolution out;
    out.objective_trace.push_back(s.j);
    const double scale = std::max(1.0, n ? problem.b.cwiseAbs().maxCoeff() : 0.0);

    for (int it = 0; it < options.max_iters; ++it) {
        out.iterations = it;
        if (kkt_residual(s.z, s.g, problem.b) <= options.tol) {
            out.converged = true;
            break;
        }

        // Gradient projection until the active set settles.
        auto active = active_set(s.z);
        for (int k = 0; k < options.projection_steps; ++k) {
            Vector gr = s.g;
            for (Eigen::Index i = 0; i < n; ++i)
                if (s.z[i] <= 0.0 && s.g[i] >= 0.0) gr[i] = 0.0;
            const double gg = gr.squaredNorm();
            if (gg == 0.0) break;
            const double curv = gr.dot(problem.apply_h(gr));
            const double alpha = curv > 0.0 ? gg / curv : 1.0;
            if (!projected_search(problem, s, -s.g, alpha, options.armijo)) break;
            out.objective_trace.push_back(s.j);
            auto next = active_set(s.z);
            const bool settled = next == active;
            active = std::move(next);
            if (settled) break;
        }

        // Conjugate gradients on the free face.
        Vector mask = Vector::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i)
            if (s.z[i] > 0.0) mask[i] = 1.0;
        const Eigen::Index free = static_cast<Eigen::Index>(mask.sum());
        if (free == 0) continue;
        Vector r = -s.g.cwiseProduct(mask);
        Vector d = Vector::Zero(n);
        Vector dir = r;
        double rr = r.squaredNorm();
        const double cg_tol = 1e-2 * options.tol * scale;
        const Eigen::Index cg_cap = std::min<Eigen::Index>(2 * free + 10, 500);
        for (Eigen::Index k = 0; k < cg_cap && std::sqrt(rr) > cg_tol; ++k) {
            const Vector hd = problem.apply_h(dir).cwiseProduct(mask);
            const double curv = dir.dot(hd);
            if (!(curv > 0.0)) break;
            const double a = rr / curv;
            d += a * dir;
            r -= a * hd;
            const double rr_next = r.squaredNorm();
            dir = r + (rr_next / rr) * dir;
            rr = rr_next;
        }
        if (d.lpNorm<Eigen::Infinity>() > 0.0 && projected_search(problem, s, d, 1.0, options.armijo))
            out.objective_trace.push_back(s.j);
    }
    if (!out.converged && kkt_residual(s.z, s.g, problem.b) <= options.tol) out.converged = true;
    out.kkt_residual = kkt_residual(s.z, s.g, problem.b);
    out.z = std::move(s.z);
    return out;
}

} // namespace pode
