#include "fixtures.hpp"

#include "pode/cov_estimator.hpp"
#include "pode/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

using namespace pode;

namespace {

double min_eig(const Matrix& a) { return Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().minCoeff(); }

CovProblem toy_problem(double s_x, std::vector<int> observed = {0}) {
    const PathSet ps = fixtures::toy_paths(observed);
    const RouteChoice rc = make_route_choice(ps, Vector::Constant(2, 0.5));
    const int m = static_cast<int>(observed.size());
    Matrix s(m, m);
    if (m == 1) s << s_x;
    else s << s_x, s_x - 50, s_x - 50, s_x;
    return make_cov_problem(s, ps, rc, Vector::Constant(1, 100));
}

// Random problem on the 5-O-D network with a fully observed identifiable map.
CovProblem random_problem(std::mt19937_64& rng, int ods) {
    std::vector<Link> links;
    std::vector<OdPair> pairs;
    for (int r = 0; r < ods; ++r) {
        const std::string o = "o" + std::to_string(r), d = "d" + std::to_string(r);
        links.push_back({"a" + std::to_string(r), o, d, 10, 500, 0.15, 4});
        links.push_back({"b" + std::to_string(r), o, d, 12, 500, 0.15, 4});
        pairs.push_back({o, d});
    }
    const Network net(links, pairs);
    const PathSet ps = generate_paths(net, 2, net.free_flow_times(), ObservedLinks::all(net.num_links()));
    const RouteChoice rc = fixtures::random_route_choice(ps, rng);
    std::uniform_real_distribution<double> u(50.0, 500.0);
    Vector q(ods);
    for (int r = 0; r < ods; ++r) q[r] = u(rng);
    const Matrix sq = fixtures::random_spd(ods, rng) * 20.0;
    const auto fd = flow_distribution(ps, rc, {q, sq});
    Matrix noise = fixtures::random_spd(net.num_links(), rng) * 2.0;
    return make_cov_problem(fd.sigma_x + noise, ps, rc, q);
}

} // namespace

TEST_SUITE("cov_estimator") {

TEST_CASE("empirical covariance") {
    ObservationSet obs;
    obs.observed.indices = {0};
    obs.counts.resize(2, 1);
    obs.counts << 0, 2;
    const EmpiricalCov e = empirical_cov(obs);
    CHECK(e.s_x(0, 0) == doctest::Approx(1));
    CHECK(e.p_x(0, 0) == doctest::Approx(2));

    obs.counts.resize(3, 1);
    obs.counts << 5, 5, 5;
    CHECK(empirical_cov(obs).s_x(0, 0) == 0.0);

    obs.counts.resize(1, 1);
    obs.counts << 5;
    const EmpiricalCov single = empirical_cov(obs);
    CHECK_FALSE(single.has_p_x());
    CHECK(single.s_x(0, 0) == 0.0);
}

TEST_CASE("wishart negative log likelihood") {
    const CovProblem exact = toy_problem(100.0);
    const Matrix sq = Matrix::Constant(1, 1, 300);
    CHECK(wishart_nll(sq, exact) == doctest::Approx(std::log(100.0) + 1.0));
    // m (log t + 1/t) + log det S, minimized at t = 1
    double prev = wishart_nll(sq, exact);
    for (double t : {1.5, 2.0, 4.0}) {
        const double v = wishart_nll(Matrix::Constant(1, 1, (100.0 * t - 25.0) / 0.25), exact);
        CHECK(v == doctest::Approx(std::log(100.0 * t) + 1.0 / t));
        CHECK(v > prev);
        prev = v;
    }

    // S = implied = I
    CovProblem unit = toy_problem(1.0);
    unit.s_x = Matrix::Identity(1, 1);
    unit.route = Matrix::Identity(1, 1);
    CHECK(wishart_nll(Matrix::Zero(1, 1), unit) == doctest::Approx(1.0));
    unit.route = Matrix::Constant(1, 1, -1.0);
    CHECK_THROWS_AS(wishart_nll(Matrix::Zero(1, 1), unit), NumericalError);
}

TEST_CASE("lasso objective") {
    const CovProblem p = toy_problem(100.0);
    CHECK(smooth_objective(Matrix::Constant(1, 1, 300), p) == doctest::Approx(0).epsilon(1e-12));
    CHECK(lasso_objective(Matrix::Constant(1, 1, 300), p, 0.5) == doctest::Approx(150));
    CovProblem bare = p;
    bare.route.setZero();
    CHECK(lasso_objective(Matrix::Zero(1, 1), bare, 3.0) == doctest::Approx(100.0 * 100.0));
}

TEST_CASE("soft threshold branches") {
    Matrix b(1, 3);
    b << 2, 0.5, -2;
    const Matrix s = soft_threshold(b, 1.0);
    CHECK(s(0, 0) == 1);
    CHECK(s(0, 1) == 0);
    CHECK(s(0, 2) == -1);
    CHECK(soft_threshold(b, 0.0) == b);
}

TEST_CASE("smooth gradient against finite differences") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const CovProblem p = random_problem(rng, 1 + trial % 3);
        const int d = p.dim();
        const Matrix sq = fixtures::random_spd(d, rng) * 10.0;
        const Matrix g = smooth_gradient(sq, p);
        CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + g.cwiseAbs().maxCoeff()));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                // derivative along the single entry (i, j)
                const double h = 1e-3 * (1.0 + std::abs(sq(i, j)));
                Matrix plus = sq, minus = sq;
                plus(i, j) += h;
                minus(i, j) -= h;
                const double fd = (smooth_objective(plus, p) - smooth_objective(minus, p)) / (2 * h);
                CHECK(std::abs(fd - g(i, j)) <= 1e-5 * (std::abs(g(i, j)) + 1e-3 * g.cwiseAbs().maxCoeff()));
            }
    }
    // zero at the exact fit
    const CovProblem toy = toy_problem(100.0);
    CHECK(smooth_gradient(Matrix::Constant(1, 1, 300), toy).norm() == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("toy covariance recovers 300") {
    for (auto algo : {LassoAlgorithm::ISTA, LassoAlgorithm::FISTA}) {
        LassoConfig cfg;
        cfg.algorithm = algo;
        const CovEstimate one = solve_sigma_q(toy_problem(100.0), cfg);
        CHECK(one.sigma_q_hat(0, 0) == doctest::Approx(300).epsilon(1e-6));
        const CovEstimate two = solve_sigma_q(toy_problem(100.0, {0, 1}), cfg);
        CHECK(two.sigma_q_hat(0, 0) == doctest::Approx(300).epsilon(1e-6));
    }
}

TEST_CASE("blockwise psd projection matches the dense one") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
        // indefinite blocks of random sizes, scattered by a random permutation
        const int n = 12;
        Matrix a = Matrix::Zero(n, n);
        int at = 0;
        while (at < n) {
            const int size = std::min(n - at, 1 + static_cast<int>(rng() % 4));
            for (int i = at; i < at + size; ++i)
                for (int j = at; j <= i; ++j) a(i, j) = a(j, i) = normal(rng);
            at += size;
        }
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        Matrix p(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) p(i, j) = a(order[i], order[j]);
        const Matrix blocks = project_psd_blockwise(p);
        CHECK((blocks - project_psd(p)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(blocks == blocks.transpose());
    }
    Matrix psd = Matrix::Identity(3, 3);
    psd(0, 2) = psd(2, 0) = 0.5;
    CHECK(project_psd_blockwise(psd) == psd);
}

TEST_CASE("lambda above lambda max gives zero") {
    std::mt19937_64 rng(3);
    const CovProblem p = random_problem(rng, 3);
    const double lmax = lambda_max(p);
    CHECK(lmax == doctest::Approx(smooth_gradient(Matrix::Zero(3, 3), p).cwiseAbs().maxCoeff()));
    LassoConfig cfg;
    cfg.lambda = lmax * 1.0001;
    CHECK(solve_sigma_q(p, cfg).nnz == 0);
    cfg.lambda = lmax * 0.5;
    CHECK(solve_sigma_q(p, cfg).nnz > 0);
}

TEST_CASE("solutions are symmetric PSD and ISTA is monotone") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const CovProblem p = random_problem(rng, 2 + trial % 4);
        for (auto algo : {LassoAlgorithm::ISTA, LassoAlgorithm::FISTA}) {
            LassoConfig cfg;
            cfg.algorithm = algo;
            cfg.lambda = 0.05 * trial * lambda_max(p);
            const CovEstimate e = solve_sigma_q(p, cfg);
            CHECK((e.sigma_q_hat - e.sigma_q_hat.transpose()).norm() == 0.0);
            CHECK(min_eig(e.sigma_q_hat) >= -1e-10);
            if (algo == LassoAlgorithm::ISTA)
                for (std::size_t i = 1; i < e.objective_trace.size(); ++i)
                    CHECK(e.objective_trace[i] <= e.objective_trace[i - 1]);
        }
    }
}

TEST_CASE("lambda zero matches a long reference solve") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 5; ++trial) {
        const CovProblem p = random_problem(rng, 3);
        LassoConfig cfg;
        const CovEstimate e = solve_sigma_q(p, cfg);
        // reference: plain projected gradient with a fixed 1/L step, many iterations
        const Matrix g = Matrix(p.g);
        const double l = 2.0 * std::pow(Eigen::SelfAdjointEigenSolver<Matrix>(g.transpose() * g).eigenvalues().maxCoeff(), 2);
        Matrix s = Matrix::Zero(3, 3);
        for (int it = 0; it < 200000; ++it) {
            const Matrix next = project_psd(s - smooth_gradient(s, p) / l);
            if ((next - s).norm() <= 1e-13 * (1.0 + s.norm())) {
                s = next;
                break;
            }
            s = next;
        }
        CHECK((e.sigma_q_hat - s).norm() <= 1e-4 * (1.0 + s.norm()));
    }
}

TEST_CASE("lasso path") {
    std::mt19937_64 rng(47);
    const CovProblem p = random_problem(rng, 4);
    const double lmax = lambda_max(p);
    std::vector<double> grid;
    for (int i = 0; i < 12; ++i) grid.push_back(lmax * 2.0 * std::pow(1e-3, 1.0 - i / 11.0));
    LassoConfig cfg;
    const auto warm = lasso_path(p, grid, cfg, false);
    const auto cold = lasso_path(p, grid, cfg, true);
    REQUIRE(warm.size() == grid.size());
    CHECK(warm.back().estimate.nnz == 0);
    int violations = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double ow = lasso_objective(warm[i].estimate.sigma_q_hat, p, grid[i]);
        const double oc = lasso_objective(cold[i].estimate.sigma_q_hat, p, grid[i]);
        CHECK(std::abs(ow - oc) <= 1e-6 * std::max(1.0, std::abs(oc)));
        if (i > 0 && warm[i].estimate.nnz > warm[i - 1].estimate.nnz) ++violations;
        if (i > 0)
            CHECK(warm[i].estimate.sigma_q_hat.trace() <=
                  warm[i - 1].estimate.sigma_q_hat.trace() * (1 + 1e-6) + 1e-9);
    }
    CHECK(violations <= 1);

    std::vector<double> descending{1.0, 0.5};
    CHECK_THROWS_AS(lasso_path(p, descending, cfg), InputError);

    const auto file = std::filesystem::temp_directory_path() / "pode_lasso_path.csv";
    write_lasso_path_csv(file, warm);
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    CHECK(line == "lambda,entry_row,entry_col,value");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == static_cast<int>(grid.size()) * 4 * 5 / 2);
}

TEST_CASE("config validation") {
    LassoConfig cfg;
    cfg.lambda = -1;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg.lambda = 0;
    cfg.backtrack = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}

}
