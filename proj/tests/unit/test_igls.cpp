#include "fixtures.hpp"

#include "pode/error.hpp"
#include "pode/igls.hpp"

#include <doctest.h>

#include <cmath>

using namespace pode;

namespace {

double min_eig(const Matrix& a) { return Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().minCoeff(); }

Vector v1(double a) { return Vector::Constant(1, a); }
Matrix m1(double a) { return Matrix::Constant(1, 1, a); }

IGLSConfig toy_config() {
    IGLSConfig cfg;
    cfg.equilibrium.model = ChoiceModel::Logit;
    return cfg;
}

ObservationSet toy_observations() {
    Matrix s(2, 2);
    s << 100, 50, 50, 100;
    return fixtures::exact_moments(Vector::Constant(2, 50), s, {0, 1});
}

} // namespace

TEST_SUITE("igls") {

TEST_CASE("hellinger distance") {
    CHECK(hellinger(v1(3), m1(2), v1(3), m1(2)) == doctest::Approx(0).epsilon(1e-12));
    CHECK(hellinger(v1(0), m1(1), v1(1), m1(1)) == doctest::Approx(1 - std::exp(-1.0 / 8)).epsilon(1e-9));
    CHECK(hellinger(v1(0), m1(1), v1(1), m1(1)) == doctest::Approx(0.117503).epsilon(1e-6));
    Matrix a(2, 2), b(2, 2);
    a << 2, 0.5, 0.5, 1;
    b << 1, -0.2, -0.2, 3;
    Vector mu(2), nu(2);
    mu << 1, 2;
    nu << -1, 0.5;
    const double h = hellinger(mu, a, nu, b);
    CHECK(h == doctest::Approx(hellinger(nu, b, mu, a)).epsilon(1e-12));
    CHECK(h > 0);
    CHECK(h < 1);
    CHECK_THROWS_AS(hellinger(mu, a, v1(0), m1(1)), InputError);
}

TEST_CASE("kl divergence") {
    CHECK(kl(v1(3), m1(2), v1(3), m1(2)) == doctest::Approx(0).epsilon(1e-12));
    CHECK(kl(v1(0), m1(1), v1(1), m1(1)) == doctest::Approx(0.5));
    const double ab = kl(v1(0), m1(1), v1(0), m1(4));
    const double ba = kl(v1(0), m1(4), v1(0), m1(1));
    CHECK(ab == doctest::Approx(0.5 * (std::log(4.0) - 1 + 0.25)));
    CHECK(ba == doctest::Approx(0.5 * (std::log(0.25) - 1 + 4)));
    CHECK(ab != doctest::Approx(ba));
    CHECK_THROWS_AS(kl(v1(0), m1(1), v1(0), Matrix::Constant(1, 1, -1)), NumericalError);
}

TEST_CASE("stopping tau") {
    const DemandDistribution a{v1(0), m1(1)}, b{v1(1), m1(1)};
    CHECK(stopping_tau(a, a, Distance::KL) == doctest::Approx(0).epsilon(1e-12));
    CHECK(stopping_tau(a, b, Distance::KL) == doctest::Approx(0.5));
    const DemandDistribution c{v1(0), m1(4)};
    // tau = D(next, prev)
    CHECK(stopping_tau(a, c, Distance::KL) == doctest::Approx(kl(v1(0), m1(4), v1(0), m1(1))));
    CHECK(stopping_tau(a, b, Distance::Hellinger) == doctest::Approx(0.117503).epsilon(1e-6));
}

TEST_CASE("network loading") {
    const PathSet ps = fixtures::toy_paths();
    const RouteChoice rc = make_route_choice(ps, Vector::Constant(2, 0.5));
    const Loading l = network_loading(fixtures::toy(), ps, {v1(100), m1(300)}, rc);
    CHECK(l.flows.sigma_x(0, 0) == doctest::Approx(100));
    CHECK((l.flows.sigma_x - Matrix(ps.delta) * l.flows.sigma_f * Matrix(ps.delta).transpose()).norm() == 0.0);
    CHECK((l.flows.f - Matrix(rc.p_tilde) * v1(100)).norm() == 0.0);
    CHECK(l.costs.c.size() == 2);
}

TEST_CASE("toy estimation recovers mean and variance") {
    const Network net = fixtures::toy();
    const PathSet ps = fixtures::toy_paths();
    const IGLSResult r = run_igls(net, ps, toy_observations(), toy_config());
    CHECK(r.converged);
    CHECK(r.demand.mean[0] == doctest::Approx(100).epsilon(1e-8));
    CHECK(r.demand.cov(0, 0) == doctest::Approx(300).epsilon(1e-6));
    CHECK(r.route_choice.p[0] == doctest::Approx(0.5));
    // P^o uses the 1/(n-1) divisor: with n = 4 the unexplained part is S/3
    Matrix s(2, 2);
    s << 100, 50, 50, 100;
    CHECK((r.sigma_e_obs - s / 3.0).norm() <= 1e-6);
    for (double t : r.tau_trace) {
        CHECK(std::isfinite(t));
        CHECK(t >= 0);
    }
    // the final loading is consistent with the final estimates
    const Loading l = network_loading(net, ps, r.demand, r.route_choice);
    CHECK((l.flows.x - r.flows.x).norm() <= 1e-9);
    CHECK((l.flows.sigma_x - r.flows.sigma_x).norm() <= 1e-9);

    IGLSConfig h = toy_config();
    h.distance = Distance::Hellinger;
    const IGLSResult rh = run_igls(net, ps, toy_observations(), h);
    CHECK(rh.converged);
    CHECK(rh.demand.mean[0] == doctest::Approx(100).epsilon(1e-8));
}

TEST_CASE("zero outer iterations return the initialization") {
    const Network net = fixtures::toy();
    const PathSet ps = fixtures::toy_paths();
    IGLSConfig cfg = toy_config();
    cfg.outer_iters = 0;
    const ObservationSet obs = toy_observations();
    const IGLSResult r = run_igls(net, ps, obs, cfg);
    const RouteChoice rc = free_flow_route_choice(net, ps, cfg.equilibrium);
    const DemandDistribution init = igls_initial_demand(ps, rc, observed_mean(obs), cfg);
    CHECK((r.demand.mean - init.mean).norm() == 0.0);
    CHECK((r.demand.cov - init.cov).norm() == 0.0);
    CHECK(r.tau_trace.empty());
    // totals of the initial loading match the observed totals
    CHECK((Matrix(ps.delta_obs) * Matrix(rc.p_tilde) * init.mean).sum() == doctest::Approx(100));
}

TEST_CASE("tau below tolerance halts the loop") {
    const Network net = fixtures::toy();
    const PathSet ps = fixtures::toy_paths();
    IGLSConfig cfg = toy_config();
    cfg.tau_tol = 1e30;
    const IGLSResult r = run_igls(net, ps, toy_observations(), cfg);
    CHECK(r.tau_trace.size() == 1);
    CHECK(r.converged);

    cfg.tau_tol = 1e-300;
    cfg.outer_iters = 1;
    const IGLSResult capped = run_igls(net, ps, toy_observations(), cfg);
    CHECK(capped.outer_iterations == 1);
    CHECK_FALSE(capped.converged);
    CHECK(capped.final_tau == capped.tau_trace.back());
}

TEST_CASE("three-link estimation is reproducible and feasible") {
    const Network net = fixtures::three_link();
    const PathSet ps = generate_paths(net, 3, net.free_flow_times(), ObservedLinks{{0, 2}});
    Vector q(2);
    q << 700, 500;
    Matrix s(2, 2);
    s << 175, 0, 0, 125;
    IGLSConfig cfg;
    cfg.equilibrium.mc_samples = 2000;
    cfg.outer_iters = 8;
    const auto eq = solve_statistical_equilibrium(net, ps, {q, s}, cfg.equilibrium);
    SynthesisConfig sc;
    sc.truth = {q, s};
    sc.route_choice = eq.route_choice;
    sc.n_days = 300;
    sc.seed = 4;
    const ObservationSet obs = synthesize(net, ps, sc);
    const IGLSResult a = run_igls(net, ps, obs, cfg);
    const IGLSResult b = run_igls(net, ps, obs, cfg);
    CHECK((a.demand.mean - b.demand.mean).norm() == 0.0);
    CHECK((a.demand.cov - b.demand.cov).norm() == 0.0);
    CHECK(a.tau_trace == b.tau_trace);
    CHECK((a.demand.mean.array() >= 0).all());
    CHECK(min_eig(a.demand.cov) >= -1e-9 * (1 + a.demand.cov.trace()));
    CHECK(min_eig(a.sigma_e_obs) >= -1e-9 * (1 + a.sigma_e_obs.trace()));
    CHECK(std::abs(a.demand.mean[0] - 700) <= 70);
    CHECK(std::abs(a.demand.mean[1] - 500) <= 50);
}

TEST_CASE("config validation") {
    IGLSConfig cfg;
    cfg.tau_tol = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg.tau_tol = 1e-6;
    cfg.inner_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}

}
