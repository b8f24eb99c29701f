#include "fixtures.hpp"

#include "pode/error.hpp"
#include "pode/sampler.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace pode;

TEST_SUITE("sampler") {

TEST_CASE("sample demand") {
    Vector q(2);
    q << 100.4, 7.6;
    const CountMatrix fixed = sample_demand({q, Matrix::Zero(2, 2)}, 5, 1);
    for (int i = 0; i < 5; ++i) {
        CHECK(fixed(i, 0) == 100);
        CHECK(fixed(i, 1) == 8);
    }

    const int n = 10000;
    const CountMatrix draws = sample_demand({Vector::Constant(1, 100), Matrix::Constant(1, 1, 300)}, n, 3);
    const double mean = static_cast<double>(draws.sum()) / n;
    CHECK(std::abs(mean - 100) <= 3 * std::sqrt(300.0 / n));

    const CountMatrix clipped = sample_demand({Vector::Constant(1, 1), Matrix::Constant(1, 1, 1e4)}, 1000, 3);
    CHECK(clipped.minCoeff() == 0);
    CHECK((sample_demand({Vector::Constant(1, 100), Matrix::Constant(1, 1, 300)}, 50, 3) - draws.topRows(50))
              .cwiseAbs()
              .maxCoeff() == 0);
}

TEST_CASE("sample day conserves demand") {
    const Network net = fixtures::three_link();
    const PathSet ps = generate_paths(net, 3, net.free_flow_times());
    Vector p(3);
    p << 0.7, 0.3, 1.0;
    const RouteChoice rc = make_route_choice(ps, p);
    CountVector q(2);
    q << 700, 500;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const DaySample day = sample_day(ps, q, rc, seed);
        CHECK(day.path_counts[0] + day.path_counts[1] == 700);
        CHECK(day.path_counts[2] == 500);
        CHECK(day.link_counts[2] == doctest::Approx(static_cast<double>(day.path_counts[1] + 500)));
    }
    Vector degenerate(3);
    degenerate << 1, 0, 1;
    const DaySample all = sample_day(ps, q, make_route_choice(ps, degenerate), 4);
    CHECK(all.path_counts[0] == 700);
    CHECK(all.path_counts[1] == 0);
    CountVector negative(2);
    negative << -1, 5;
    CHECK_THROWS_AS(sample_day(ps, negative, rc, 1), InputError);
}

TEST_CASE("multinomial covariance by monte carlo") {
    const PathSet ps = fixtures::toy_paths();
    const RouteChoice rc = make_route_choice(ps, Vector::Constant(2, 0.5));
    const int n = 10000;
    CountVector q(1);
    q << 100;
    Matrix f(n, 2);
    for (int i = 0; i < n; ++i) f.row(i) = sample_day(ps, q, rc, static_cast<std::uint64_t>(i)).path_counts.cast<double>().transpose();
    const Vector mean = f.colwise().mean();
    const Matrix c = f.rowwise() - mean.transpose();
    const Matrix cov = c.transpose() * c / n;
    // variance of a sample variance of a near-normal variable: 2 sigma^4 / n
    const double se = std::sqrt(2.0 * 25.0 * 25.0 / n);
    CHECK(std::abs(cov(0, 0) - 25) <= 3 * se);
    CHECK(std::abs(cov(0, 1) + 25) <= 3 * se);
    CHECK(std::abs(cov(1, 1) - 25) <= 3 * se);
}

TEST_CASE("perturbation") {
    Vector x(3);
    x << 100, 0, 50;
    CHECK((perturb(x, 0.0, 9) - x).norm() == 0.0);
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const Vector y = perturb(x, 0.1, seed);
        CHECK_FALSE((y[0] < 90.0 || y[0] > 110.0));
        CHECK_FALSE(y[1] != 0.0);
    }
    CHECK_THROWS_AS(perturb(x, -0.1, 1), InputError);
}

TEST_CASE("synthesize") {
    const Network net = fixtures::three_link();
    const PathSet ps = generate_paths(net, 3, net.free_flow_times(), ObservedLinks{{0, 2}});
    Vector p(3);
    p << 1, 0, 1;
    SynthesisConfig cfg;
    Vector q(2);
    q << 700, 500;
    cfg.truth = {q, Matrix::Zero(2, 2)};
    cfg.route_choice = make_route_choice(ps, p);
    cfg.n_days = 1;
    const ObservationSet one = synthesize(net, ps, cfg);
    CHECK(one.counts.cols() == 2);
    CHECK(one.counts(0, 0) == 700);
    CHECK(one.counts(0, 1) == 500);

    p << 0.6, 0.4, 1;
    cfg.route_choice = make_route_choice(ps, p);
    Matrix s(2, 2);
    s << 175, 0.5 * std::sqrt(175.0 * 125.0), 0.5 * std::sqrt(175.0 * 125.0), 125;
    cfg.truth.cov = s;
    cfg.n_days = 500;
    cfg.epsilon = 0.05;
    cfg.seed = 17;
    const ObservationSet a = synthesize(net, ps, cfg);
    const ObservationSet b = synthesize(net, ps, cfg);
    CHECK(a.days() == 500);
    CHECK((a.counts - b.counts).norm() == 0.0);
    CHECK(a.counts.minCoeff() >= 0.0);

    cfg.epsilon = 0;
    const ObservationSet c = synthesize(net, ps, cfg);
    const auto fd = flow_distribution(ps, cfg.route_choice, cfg.truth);
    const Vector mean = c.counts.colwise().mean();
    CHECK(std::abs(mean[0] - fd.x[0]) <= 3 * std::sqrt(fd.sigma_x(0, 0) / 500));
    CHECK(std::abs(mean[1] - fd.x[2]) <= 3 * std::sqrt(fd.sigma_x(2, 2) / 500));

    cfg.n_days = 0;
    CHECK_THROWS_AS(synthesize(net, ps, cfg), InputError);
}

TEST_CASE("observations csv round trip") {
    const Network net = fixtures::three_link();
    ObservationSet obs;
    obs.observed.indices = {0, 2};
    obs.counts.resize(2, 2);
    obs.counts << 700, 500.25, 698, 503;
    const auto dir = std::filesystem::temp_directory_path() / "pode_sampler_test";
    std::filesystem::create_directories(dir);
    write_observations_csv(dir / "obs.csv", obs, net);
    {
        std::ifstream in(dir / "obs.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "day,link_1,link_3");
    }
    const ObservationSet back = read_observations_csv(dir / "obs.csv", net);
    CHECK(back.observed.indices == obs.observed.indices);
    CHECK((back.counts - obs.counts).norm() == 0.0);

    std::ofstream(dir / "ragged.csv") << "day,link_1,link_3\n1,700\n";
    CHECK_THROWS_AS(read_observations_csv(dir / "ragged.csv", net), InputError);
    std::ofstream(dir / "unknown.csv") << "day,link_9\n1,700\n";
    CHECK_THROWS_AS(read_observations_csv(dir / "unknown.csv", net), InputError);
    std::ofstream(dir / "negative.csv") << "day,link_1\n1,-4\n";
    CHECK_THROWS_AS(read_observations_csv(dir / "negative.csv", net), InputError);
}

}
