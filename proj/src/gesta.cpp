#include "pode/gesta.hpp"

#include "pode/error.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pode {

void DemandDistribution::validate() const {
    if (cov.rows() != mean.size() || cov.cols() != mean.size())
        throw InputError("demand covariance must be " + std::to_string(mean.size()) + "x" +
                         std::to_string(mean.size()));
    if ((mean.array() < 0.0).any()) throw InputError("demand mean must be nonnegative");
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw InputError("demand covariance must be symmetric");
    if (mean.size() > 0 && !is_psd_fast(cov, 1e-8 * std::max(1.0, cov.trace())))
        throw InputError("demand covariance must be positive semidefinite");
}

void EquilibriumConfig::validate() const {
    if (!(theta > 0.0)) throw InputError("equilibrium: theta must be > 0");
    if (mc_samples < 1) throw InputError("equilibrium: mc_samples must be >= 1");
    if (!(tol > 0.0)) throw InputError("equilibrium: tol must be > 0");
    if (max_iters < 1) throw InputError("equilibrium: max_iters must be >= 1");
    if (msa_offset < 0) throw InputError("equilibrium: msa_offset must be >= 0");
}

RouteChoice make_route_choice(const PathSet& ps, Vector p) {
    if (p.size() != ps.num_paths()) throw InputError("route choice: one probability per path required");
    for (int od = 0; od < ps.num_ods(); ++od) {
        const int b = ps.od_first_path[od];
        const int n = ps.od_path_count(od);
        const auto seg = p.segment(b, n);
        if ((seg.array() < -1e-12).any() || (seg.array() > 1.0 + 1e-12).any())
            throw InputError("route choice: probabilities must lie in [0, 1]");
        if (std::abs(seg.sum() - 1.0) > 1e-9)
            throw InputError("route choice: probabilities of O-D " + std::to_string(od) + " must sum to 1");
    }
    RouteChoice rc;
    rc.p = std::move(p);
    rc.p_tilde = ps.transition;
    for (int k = 0; k < rc.p_tilde.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(rc.p_tilde, k); it; ++it) it.valueRef() = rc.p[it.row()];
    return rc;
}

Matrix FlowDistribution::measured_cov() const {
    if (sigma_e.size() == 0) return sigma_x;
    return sigma_x + sigma_e;
}

SparseMatrix conditional_path_cov(const PathSet& ps, const RouteChoice& rc, const Vector& q) {
    if (q.size() != ps.num_ods()) throw InputError("conditional_path_cov: demand dimension mismatch");
    std::vector<Eigen::Triplet<double>> t;
    for (int od = 0; od < ps.num_ods(); ++od) {
        const int b = ps.od_first_path[od];
        const int n = ps.od_path_count(od);
        for (int i = 0; i < n; ++i) {
            const double pi = rc.p[b + i];
            for (int j = 0; j < n; ++j) {
                const double v = q[od] * ((i == j ? pi : 0.0) - pi * rc.p[b + j]);
                if (v != 0.0) t.emplace_back(b + i, b + j, v);
            }
        }
    }
    SparseMatrix out(ps.num_paths(), ps.num_paths());
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

namespace {

void check_demand(const PathSet& ps, const DemandDistribution& d) {
    if (d.mean.size() != ps.num_ods() || d.cov.rows() != ps.num_ods() || d.cov.cols() != ps.num_ods())
        throw InputError("demand dimension does not match the number of O-D pairs");
}

void check_route_choice(const PathSet& ps, const RouteChoice& rc) {
    if (rc.p.size() != ps.num_paths() || rc.p_tilde.rows() != ps.num_paths() ||
        rc.p_tilde.cols() != ps.num_ods())
        throw InputError("route choice dimension does not match the path set");
}

// G sigma G^T for sparse G and dense symmetric sigma.
Matrix congruence(const SparseMatrix& g, const Matrix& sigma) {
    Matrix left = g * sigma;
    Matrix out = left * g.transpose();
    return symmetrize(out);
}

} // namespace

PathFlowMoments path_flow_distribution(const PathSet& ps, const RouteChoice& rc,
                                       const DemandDistribution& d) {
    check_demand(ps, d);
    check_route_choice(ps, rc);
    PathFlowMoments m;
    m.f = rc.p_tilde * d.mean;
    m.sigma_f_given_q = conditional_path_cov(ps, rc, d.mean);
    m.sigma_f = Matrix(m.sigma_f_given_q) + congruence(rc.p_tilde, d.cov);
    return m;
}

FlowDistribution link_flow_distribution(const PathSet& ps, const Vector& f, const Matrix& sigma_f,
                                        const Matrix& sigma_e) {
    if (f.size() != ps.num_paths() || sigma_f.rows() != ps.num_paths() || sigma_f.cols() != ps.num_paths())
        throw InputError("link_flow_distribution: path dimension mismatch");
    if (sigma_e.size() != 0 && (sigma_e.rows() != ps.num_links() || sigma_e.cols() != ps.num_links()))
        throw InputError("link_flow_distribution: sigma_e must be |A| x |A|");
    FlowDistribution fd;
    fd.f = f;
    fd.sigma_f = sigma_f;
    fd.x = ps.delta * f;
    fd.sigma_x = congruence(ps.delta, sigma_f);
    fd.sigma_e = sigma_e.size() == 0 ? Matrix::Zero(ps.num_links(), ps.num_links()) : sigma_e;
    return fd;
}

FlowDistribution flow_distribution(const PathSet& ps, const RouteChoice& rc, const DemandDistribution& d,
                                   bool path_covariance, const Matrix& sigma_e) {
    check_demand(ps, d);
    check_route_choice(ps, rc);
    if (sigma_e.size() != 0 && (sigma_e.rows() != ps.num_links() || sigma_e.cols() != ps.num_links()))
        throw InputError("flow_distribution: sigma_e must be |A| x |A|");
    FlowDistribution fd;
    fd.f = rc.p_tilde * d.mean;
    fd.sigma_f_given_q = conditional_path_cov(ps, rc, d.mean);
    fd.x = ps.delta * fd.f;
    const SparseMatrix g = ps.delta * rc.p_tilde;
    const SparseMatrix route = ps.delta * fd.sigma_f_given_q * SparseMatrix(ps.delta.transpose());
    fd.sigma_x = Matrix(route) + congruence(g, d.cov);
    fd.sigma_x = symmetrize(fd.sigma_x);
    if (path_covariance) fd.sigma_f = Matrix(fd.sigma_f_given_q) + congruence(rc.p_tilde, d.cov);
    fd.sigma_e = sigma_e.size() == 0 ? Matrix::Zero(ps.num_links(), ps.num_links()) : sigma_e;
    return fd;
}

CostDistribution path_cost_distribution(const Network& net, const PathSet& ps, const Vector& x,
                                        const Matrix& sigma_x, bool full_covariance) {
    if (x.size() != ps.num_links() || sigma_x.rows() != ps.num_links() || sigma_x.cols() != ps.num_links())
        throw InputError("path_cost_distribution: link dimension mismatch");
    // Round-off in p_tilde q can leave -1e-13 style flows.
    const Vector xc = x.cwiseMax(0.0);
    const Vector t = net.link_costs(xc);
    const Vector j = net.link_cost_derivatives(xc);
    CostDistribution cd;
    cd.c = ps.delta.transpose() * t;

    cd.od_blocks.resize(ps.num_ods());
    for (int od = 0; od < ps.num_ods(); ++od) {
        const int b = ps.od_first_path[od];
        const int n = ps.od_path_count(od);
        Matrix block(n, n);
        for (int r = 0; r < n; ++r) {
            for (int s = r; s < n; ++s) {
                double v = 0.0;
                for (int a : ps.paths[b + r])
                    for (int c : ps.paths[b + s]) v += j[a] * j[c] * sigma_x(a, c);
                block(r, s) = block(s, r) = v;
            }
        }
        cd.od_blocks[od] = std::move(block);
    }
    if (full_covariance) {
        const SparseMatrix jd = j.asDiagonal() * ps.delta;
        cd.sigma_c = congruence(SparseMatrix(jd.transpose()), sigma_x);
    }
    return cd;
}

RouteChoice route_choice_logit(const PathSet& ps, const Vector& c, double theta) {
    if (!(theta > 0.0)) throw InputError("route_choice_logit: theta must be > 0");
    if (c.size() != ps.num_paths()) throw InputError("route_choice_logit: cost dimension mismatch");
    Vector p(ps.num_paths());
    for (int od = 0; od < ps.num_ods(); ++od) {
        const int b = ps.od_first_path[od];
        const int n = ps.od_path_count(od);
        if (n == 0) throw InputError("route_choice_logit: O-D pair without paths");
        const double cmin = c.segment(b, n).minCoeff();
        double z = 0.0;
        for (int i = 0; i < n; ++i) z += (p[b + i] = std::exp(-theta * (c[b + i] - cmin)));
        p.segment(b, n) /= z;
    }
    return make_route_choice(ps, std::move(p));
}

namespace {

// Probit choice by Monte Carlo with common random numbers: standard normal
// draws are fixed per (seed, O-D) so repeated evaluations are smooth in the
// cost moments. Draws are cached when they fit in memory.
class ProbitEvaluator {
public:
    ProbitEvaluator(const PathSet& ps, int samples, std::uint64_t seed)
        : ps_(ps), samples_(samples), seed_(seed) {
        std::size_t total = 0;
        for (int od = 0; od < ps.num_ods(); ++od)
            if (ps.od_path_count(od) > 1) total += static_cast<std::size_t>(ps.od_path_count(od)) * samples;
        cache_ = total <= kCacheLimit;
        if (cache_) {
            draws_.resize(ps.num_ods());
            for (int od = 0; od < ps.num_ods(); ++od)
                if (ps.od_path_count(od) > 1) draws_[od] = make_draws(od);
        }
    }

    RouteChoice operator()(const CostDistribution& cd) const {
        if (cd.c.size() != ps_.num_paths()) throw InputError("route_choice_probit: cost dimension mismatch");
        // per-O-D blocks, taken from the full covariance when not supplied
        const bool full = cd.od_blocks.empty();
        if (full ? (cd.sigma_c.rows() != ps_.num_paths() || cd.sigma_c.cols() != ps_.num_paths())
                 : static_cast<int>(cd.od_blocks.size()) != ps_.num_ods())
            throw InputError("route_choice_probit: cost covariance dimension mismatch");
        Vector p = Vector::Zero(ps_.num_paths());
        Vector cost;
        for (int od = 0; od < ps_.num_ods(); ++od) {
            const int b = ps_.od_first_path[od];
            const int n = ps_.od_path_count(od);
            if (n == 1) {
                p[b] = 1.0;
                continue;
            }
            const Matrix l = psd_factor(full ? Matrix(cd.sigma_c.block(b, b, n, n)) : cd.od_blocks[od]);
            const Matrix z = cache_ ? Matrix() : make_draws(od);
            const Matrix& zr = cache_ ? draws_[od] : z;
            const Vector mean = cd.c.segment(b, n);
            Vector counts = Vector::Zero(n);
            const double scale = std::max(1.0, mean.cwiseAbs().maxCoeff());
            const Matrix sampled = l * zr;
            for (int s = 0; s < samples_; ++s) {
                cost = mean + sampled.col(s);
                const double best = cost.minCoeff();
                int ties = 0;
                for (int i = 0; i < n; ++i) ties += (cost[i] - best <= 1e-12 * scale);
                for (int i = 0; i < n; ++i)
                    if (cost[i] - best <= 1e-12 * scale) counts[i] += 1.0 / ties;
            }
            p.segment(b, n) = counts / counts.sum();
        }
        return make_route_choice(ps_, std::move(p));
    }

private:
    static constexpr std::size_t kCacheLimit = 20'000'000;

    Matrix make_draws(int od) const {
        auto rng = detail::substream(seed_, detail::kProbitStream, static_cast<std::uint64_t>(od));
        std::normal_distribution<double> normal;
        Matrix z(ps_.od_path_count(od), samples_);
        for (int s = 0; s < samples_; ++s)
            for (int i = 0; i < z.rows(); ++i) z(i, s) = normal(rng);
        return z;
    }

    const PathSet& ps_;
    int samples_;
    std::uint64_t seed_;
    bool cache_ = false;
    std::vector<Matrix> draws_;
};

} // namespace

RouteChoice route_choice_probit(const PathSet& ps, const CostDistribution& cd, int mc_samples,
                                std::uint64_t seed) {
    if (mc_samples < 1) throw InputError("route_choice_probit: mc_samples must be >= 1");
    return ProbitEvaluator(ps, mc_samples, seed)(cd);
}

RouteChoice free_flow_route_choice(const Network& net, const PathSet& ps, const EquilibriumConfig& cfg) {
    CostDistribution cd;
    cd.c = path_costs(ps, net.free_flow_times());
    if (cfg.model == ChoiceModel::Logit) return route_choice_logit(ps, cd.c, cfg.theta);
    cd.od_blocks.resize(ps.num_ods());
    for (int od = 0; od < ps.num_ods(); ++od)
        cd.od_blocks[od] = Matrix::Zero(ps.od_path_count(od), ps.od_path_count(od));
    return route_choice_probit(ps, cd, 1, cfg.seed);
}

EquilibriumResult solve_statistical_equilibrium(const Network& net, const PathSet& ps,
                                                const DemandDistribution& d, const EquilibriumConfig& cfg,
                                                const std::optional<Vector>& initial_p) {
    cfg.validate();
    d.validate();
    check_demand(ps, d);
    std::optional<ProbitEvaluator> probit;
    if (cfg.model == ChoiceModel::Probit) probit.emplace(ps, cfg.mc_samples, cfg.seed);

    auto choice = [&](const CostDistribution& cd) {
        return cfg.model == ChoiceModel::Logit ? route_choice_logit(ps, cd.c, cfg.theta) : (*probit)(cd);
    };

    EquilibriumResult res;
    RouteChoice rc = initial_p ? make_route_choice(ps, *initial_p) : free_flow_route_choice(net, ps, cfg);
    for (int it = 0; it < cfg.max_iters; ++it) {
        CostDistribution costs;
        if (cfg.model == ChoiceModel::Logit) {
            // Logit only needs mean costs.
            costs.c = path_costs(ps, net.link_costs(ps.delta * (rc.p_tilde * d.mean)));
        } else {
            const FlowDistribution flows = flow_distribution(ps, rc, d, false);
            costs = path_cost_distribution(net, ps, flows.x, flows.sigma_x, false);
        }
        const RouteChoice target = choice(costs);
        const double step = 1.0 / (it + 1 + cfg.msa_offset);
        Vector next = rc.p + step * (target.p - rc.p);
        // Keep each O-D group on the simplex despite round-off.
        for (int od = 0; od < ps.num_ods(); ++od) {
            auto seg = next.segment(ps.od_first_path[od], ps.od_path_count(od));
            seg = seg.cwiseMax(0.0);
            seg /= seg.sum();
        }
        res.residual = (next - rc.p).cwiseAbs().maxCoeff();
        res.residual_trace.push_back(res.residual);
        rc = make_route_choice(ps, std::move(next));
        res.iterations = it + 1;
        if (res.residual <= cfg.tol) {
            res.converged = true;
            break;
        }
    }
    res.flows = flow_distribution(ps, rc, d, cfg.path_covariance);
    res.costs = path_cost_distribution(net, ps, res.flows.x, res.flows.sigma_x, cfg.path_covariance);
    res.route_choice = std::move(rc);
    return res;
}

} // namespace pode
