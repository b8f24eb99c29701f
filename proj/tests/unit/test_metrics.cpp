#include "fixtures.hpp"

#include "pode/error.hpp"
#include "pode/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pode;

TEST_SUITE("metrics") {

TEST_CASE("prmse") {
    Vector t(2), e(2);
    t << 700, 500;
    e << 699.50, 499.63;
    CHECK(prmse(t, t) == 0.0);
    // 100 * sqrt((0.25 + 0.1369) / 2) * 2 / 1200
    CHECK(prmse(e, t) == doctest::Approx(0.0733).epsilon(1e-3));
    const Vector twice = t + 2.0 * (e - t);
    CHECK(prmse(twice, t) == doctest::Approx(2.0 * prmse(e, t)));
    Vector rt(2), re(2);
    rt << 500, 700;
    re << 499.63, 699.50;
    CHECK(prmse(re, rt) == doctest::Approx(prmse(e, t)));
    CHECK_THROWS_AS(prmse(e, Vector::Zero(2)), InputError);
    CHECK_THROWS_AS(prmse(e, Vector::Ones(3)), InputError);
}

TEST_CASE("kl to the truth") {
    CHECK(kl_od(Vector::Constant(1, 0), Matrix::Identity(1, 1), Vector::Constant(1, 1), Matrix::Identity(1, 1)) ==
          doctest::Approx(0.5));
    Vector q(2);
    q << 700, 500;
    Matrix s(2, 2);
    s << 175, 40, 40, 125;
    CHECK(kl_od(q, s, q, s) == doctest::Approx(0).epsilon(1e-12));
    Vector shifted = q;
    shifted[0] += 1e-3;
    CHECK(kl_od(shifted, s, q, s) > 0);
}

TEST_CASE("goodness of fit") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    ObservationSet obs;
    obs.observed.indices = {0, 1};
    obs.counts.resize(10000, 2);
    for (int i = 0; i < 10000; ++i) {
        const double z1 = normal(rng), z2 = normal(rng);
        obs.counts(i, 0) = 100 + 10 * z1;
        obs.counts(i, 1) = 50 + 3 * z1 + 4 * z2;
    }
    Vector mean(2);
    mean << 100, 50;
    Matrix cov(2, 2);
    cov << 100, 30, 30, 25;
    for (auto metric : {Distance::KL, Distance::Hellinger}) {
        const double good = goodness_of_fit(mean, cov, obs, metric);
        const double bad = goodness_of_fit(mean, 4.0 * cov, obs, metric);
        CHECK(good < bad);
        CHECK(good >= 0);
        if (metric == Distance::Hellinger) CHECK(bad <= 1.0);
        // data moments themselves fit perfectly
        const Vector xbar = obs.counts.colwise().mean();
        const Matrix c = obs.counts.rowwise() - xbar.transpose();
        const Matrix p = c.transpose() * c / 9999.0;
        CHECK(goodness_of_fit(xbar, p, obs, metric) == doctest::Approx(0).epsilon(1e-9));
        Vector moved = xbar;
        moved[1] += 1e-3;
        CHECK(goodness_of_fit(moved, p, obs, metric) > 0);
    }
    obs.counts.conservativeResize(1, 2);
    CHECK_THROWS_AS(goodness_of_fit(mean, cov, obs, Distance::KL), InputError);
}

TEST_CASE("variance decomposition on the toy network") {
    const PathSet ps = fixtures::toy_paths();
    const RouteChoice rc = make_route_choice(ps, Vector::Constant(2, 0.5));
    const VarianceDecomposition vd =
        variance_decomposition(ps, rc, Vector::Constant(1, 100), Matrix::Constant(1, 1, 300));
    CHECK(vd.total[0] == doctest::Approx(100));
    CHECK(vd.demand_share[0] == doctest::Approx(0.75));
    CHECK(vd.route_share[0] == doctest::Approx(0.25));
    CHECK(vd.error_share[0] == 0.0);

    const VarianceDecomposition none = variance_decomposition(ps, rc, Vector::Constant(1, 100), Matrix::Zero(1, 1));
    CHECK(none.route_share[0] == doctest::Approx(1.0));
    CHECK(none.route_trace_share == doctest::Approx(1.0));
}

TEST_CASE("variance decomposition shares sum to one") {
    std::mt19937_64 rng(13);
    const Network net = fixtures::five_od();
    const PathSet ps = generate_paths(net, 2, net.free_flow_times());
    for (int trial = 0; trial < 10; ++trial) {
        const RouteChoice rc = fixtures::random_route_choice(ps, rng);
        Vector q = Vector::Constant(5, 200.0 + trial);
        q[trial % 5] = 0.0;
        const Matrix sq = fixtures::random_spd(5, rng) * 10.0;
        const Matrix se = trial % 2 ? fixtures::random_spd(net.num_links(), rng) : Matrix();
        const VarianceDecomposition vd = variance_decomposition(ps, rc, q, sq, se);
        for (int a = 0; a < net.num_links(); ++a) {
            if (!vd.defined[static_cast<std::size_t>(a)]) continue;
            CHECK(std::abs(vd.demand_share[a] + vd.route_share[a] + vd.error_share[a] - 1.0) <= 1e-10);
            for (double s : {vd.demand_share[a], vd.route_share[a], vd.error_share[a]}) {
                CHECK(s >= 0);
                CHECK(s <= 1 + 1e-12);
            }
        }
        CHECK(vd.demand_trace_share + vd.route_trace_share + vd.error_trace_share == doctest::Approx(1.0));
        for (const Matrix* part : {&vd.demand_part, &vd.route_part})
            CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(*part).eigenvalues().minCoeff() >= -1e-8 * (1 + part->trace()));
    }
    // a link nobody uses has no variance and no defined share
    const Network extra({{"1", "a", "b", 1, 10, 0.15, 4}, {"2", "b", "a", 1, 10, 0.15, 4}}, {{"a", "b"}});
    const PathSet eps = build_incidence(extra, {{{0}}});
    const VarianceDecomposition vd = variance_decomposition(eps, make_route_choice(eps, Vector::Ones(1)),
                                                            Vector::Constant(1, 5), Matrix::Constant(1, 1, 2));
    CHECK(vd.defined[0]);
    CHECK_FALSE(vd.defined[1]);
}

}
