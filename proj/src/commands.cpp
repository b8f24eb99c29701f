#include "pode/commands.hpp"

#include "pode/cov_estimator.hpp"
#include "pode/error.hpp"
#include "pode/igls.hpp"
#include "pode/io.hpp"
#include "pode/metrics.hpp"
#include "pode/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

namespace pode {

namespace fs = std::filesystem;

RunConfig resolve_config(const CommandOptions& opts) {
    RunConfig cfg = load_config(opts.config);
    if (opts.out) cfg.out_dir = *opts.out;
    if (opts.distance) cfg.igls.distance = *opts.distance;
    if (opts.jobs < 1) throw InputError("--jobs must be >= 1");
    return cfg;
}

namespace {

struct Setup {
    Network net;
    PathSet ps;
};

Setup load_network(const RunConfig& cfg, std::optional<ObservedLinks> observed = std::nullopt) {
    Setup s;
    s.net = read_network_csv(cfg.links_file, cfg.od_file);
    if (cfg.observed_file) {
        ObservedLinks from_file = read_observed_links(*cfg.observed_file, s.net);
        if (observed && observed->indices != from_file.indices)
            throw InputError("observation columns do not match " + cfg.observed_file->string());
        observed = std::move(from_file);
    }
    s.ps = generate_paths(s.net, cfg.paths_per_od, s.net.free_flow_times(), observed);
    return s;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
}

fs::path observations_path(const RunConfig& cfg) {
    return cfg.observations_file ? *cfg.observations_file : cfg.out_dir / "observations.csv";
}

std::optional<Truth> load_truth(const RunConfig& cfg, bool required) {
    if (cfg.truth) return Truth{*cfg.truth, {}};
    const fs::path file = cfg.truth_file ? *cfg.truth_file : cfg.out_dir / "truth.json";
    if (cfg.truth_file || fs::exists(file)) return read_truth_json(file);
    if (required) throw InputError("no truth given: add a [truth] section or data.truth");
    return std::nullopt;
}

Json raw_config_json(const RunConfig& cfg) {
    Json j = Json::object();
    for (const auto& [section, keys] : cfg.raw)
        for (const auto& [key, value] : keys) j[section][key] = value;
    return j;
}

Json estimate_json(const Setup& s, const ObservationSet& obs, const IGLSResult& res, const RunConfig& cfg,
                   const std::optional<Truth>& truth) {
    Json j;
    j["converged"] = res.converged;
    j["outer_iterations"] = res.outer_iterations;
    j["final_tau"] = res.final_tau;
    j["distance"] = to_string(cfg.igls.distance);
    j["tau_trace"] = res.tau_trace;
    j["mean_residuals"] = res.mean_residuals;
    j["lasso_objectives"] = res.lasso_objectives;

    Json ods = Json::array();
    for (const auto& od : s.net.od_pairs()) ods.push_back({{"origin", od.origin}, {"destination", od.destination}});
    j["od_pairs"] = std::move(ods);
    j["demand"] = {{"q_hat", to_json(res.demand.mean)}, {"sigma_q_hat", to_json(res.demand.cov)}};
    j["route_choice"] = {{"p", to_json(res.route_choice.p)}};
    j["paths"] = paths_json(s.net, s.ps);

    Json link_ids = Json::array();
    for (const auto& l : s.net.links()) link_ids.push_back(l.id);
    Json observed_ids = Json::array();
    for (int a : s.ps.observed.indices) observed_ids.push_back(s.net.links()[a].id);
    j["flows"] = {{"links", std::move(link_ids)}, {"x", to_json(res.flows.x)}, {"sigma_x", to_json(res.flows.sigma_x)}};
    j["observed_links"] = std::move(observed_ids);
    j["sigma_e_obs"] = to_json(res.sigma_e_obs);

    Matrix sigma_e = Matrix::Zero(s.net.num_links(), s.net.num_links());
    const auto& idx = s.ps.observed.indices;
    if (res.sigma_e_obs.size() != 0)
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = 0; b < idx.size(); ++b)
                sigma_e(idx[a], idx[b]) = res.sigma_e_obs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    const auto vd = variance_decomposition(s.ps, res.route_choice, res.demand.mean, res.demand.cov, sigma_e);
    j["variance_decomposition"] = decomposition_json(s.net, vd);

    if (obs.days() >= 2) {
        Vector x_obs(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) x_obs[static_cast<Eigen::Index>(a)] = res.flows.x[idx[a]];
        const Matrix sx = principal_submatrix(res.flows.sigma_x, idx);
        j["goodness_of_fit"] = {{"kl", goodness_of_fit(x_obs, sx, obs, Distance::KL)},
                                {"hellinger", goodness_of_fit(x_obs, sx, obs, Distance::Hellinger)}};
    }
    if (truth) {
        if (truth->demand.mean.size() != res.demand.mean.size())
            throw InputError("truth dimension does not match the network's O-D pairs");
        j["metrics"] = {{"prmse", prmse(res.demand.mean, truth->demand.mean)},
                        {"kl_od", kl_od(res.demand.mean, res.demand.cov, truth->demand.mean, truth->demand.cov)}};
    }
    j["config"] = raw_config_json(cfg);
    return j;
}

std::vector<double> lambda_grid(const RunConfig& cfg, const CovProblem& problem) {
    if (!cfg.lambda_grid.empty()) {
        std::vector<double> g = cfg.lambda_grid;
        std::sort(g.begin(), g.end());
        g.erase(std::unique(g.begin(), g.end()), g.end());
        return g;
    }
    const double hi = cfg.grid_max ? *cfg.grid_max : 2.0 * lambda_max(problem);
    const double lo = cfg.grid_min;
    if (!(hi > lo)) throw InputError("lasso grid: grid_max must exceed grid_min");
    std::vector<double> g(static_cast<std::size_t>(cfg.grid_points));
    for (int i = 0; i < cfg.grid_points; ++i)
        g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (cfg.grid_points - 1));
    g.back() = hi;
    return g;
}

} // namespace

std::vector<fs::path> cmd_synthesize(const CommandOptions& opts) {
    RunConfig cfg = resolve_config(opts);
    if (opts.seed) cfg.seed = *opts.seed;
    const Setup s = load_network(cfg);
    const Truth truth = *load_truth(cfg, true);
    if (truth.demand.mean.size() != s.net.num_ods())
        throw InputError("truth mean has " + std::to_string(truth.demand.mean.size()) + " entries but the network has " +
                         std::to_string(s.net.num_ods()) + " O-D pairs");

    SynthesisConfig syn;
    syn.seed = cfg.seed;
    syn.n_days = cfg.days;
    syn.epsilon = cfg.epsilon;
    syn.truth = truth.demand;
    EquilibriumConfig eq = cfg.equilibrium;
    eq.path_covariance = false;
    syn.route_choice = solve_statistical_equilibrium(s.net, s.ps, truth.demand, eq).route_choice;
    const ObservationSet obs = synthesize(s.net, s.ps, syn);

    ensure_dir(cfg.out_dir);
    const fs::path obs_file = cfg.out_dir / "observations.csv";
    const fs::path truth_file = cfg.out_dir / "truth.json";
    write_observations_csv(obs_file, obs, s.net);
    write_truth_json(truth_file, s.net, s.ps, truth.demand, syn.route_choice);
    return {obs_file, truth_file};
}

std::vector<fs::path> cmd_estimate(const CommandOptions& opts) {
    RunConfig cfg = resolve_config(opts);
    if (opts.seed) cfg.igls.equilibrium.seed = *opts.seed;
    const Network probe = read_network_csv(cfg.links_file, cfg.od_file);
    const ObservationSet obs = read_observations_csv(observations_path(cfg), probe);
    const Setup s = load_network(cfg, obs.observed);
    const IGLSResult res = run_igls(s.net, s.ps, obs, cfg.igls);
    const auto truth = load_truth(cfg, false);

    ensure_dir(cfg.out_dir);
    const fs::path result_file = cfg.out_dir / "result.json";
    const fs::path conv_file = cfg.out_dir / "convergence.csv";
    write_json(result_file, estimate_json(s, obs, res, cfg, truth));
    write_convergence_csv(conv_file, res);
    return {result_file, conv_file};
}

std::vector<fs::path> cmd_lasso_path(const CommandOptions& opts) {
    RunConfig cfg = resolve_config(opts);
    if (opts.seed) cfg.igls.equilibrium.seed = *opts.seed;
    const Network probe = read_network_csv(cfg.links_file, cfg.od_file);
    const ObservationSet obs = read_observations_csv(observations_path(cfg), probe);
    const Setup s = load_network(cfg, obs.observed);

    // (q_hat, p_hat) from the estimation loop at the configured lambda.
    const IGLSResult res = run_igls(s.net, s.ps, obs, cfg.igls);
    const CovProblem problem = make_cov_problem(empirical_cov(obs).s_x, s.ps, res.route_choice, res.demand.mean);
    const std::vector<double> grid = lambda_grid(cfg, problem);

    std::vector<LassoPathPoint> path;
    if (cfg.cold_start && opts.jobs > 1) {
        path.resize(grid.size());
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(grid.size());
        auto worker = [&] {
            for (std::size_t i = next++; i < grid.size(); i = next++) {
                try {
                    LassoConfig c = cfg.igls.lasso;
                    c.lambda = grid[i];
                    path[i] = {grid[i], solve_sigma_q(problem, c)};
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> threads;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(opts.jobs), grid.size());
        for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    } else {
        path = lasso_path(problem, grid, cfg.igls.lasso, cfg.cold_start);
    }

    ensure_dir(cfg.out_dir);
    const fs::path path_file = cfg.out_dir / "lasso_path.csv";
    const fs::path summary_file = cfg.out_dir / "lasso_summary.csv";
    write_lasso_path_csv(path_file, path);
    std::ofstream out(summary_file);
    if (!out) throw InputError("cannot write " + summary_file.string());
    out << "lambda,objective,nnz,iterations,converged\n" << std::setprecision(12);
    for (const auto& p : path)
        out << p.lambda << ',' << p.estimate.objective << ',' << p.estimate.nnz << ',' << p.estimate.iterations << ','
            << (p.estimate.converged ? 1 : 0) << '\n';
    return {path_file, summary_file};
}

std::vector<fs::path> cmd_evaluate(const CommandOptions& opts) {
    const RunConfig cfg = resolve_config(opts);
    const fs::path result_file = cfg.result_file ? *cfg.result_file : cfg.out_dir / "result.json";
    const Json result = read_json(result_file);
    const Truth truth = *load_truth(cfg, true);
    if (!result.contains("demand")) throw InputError(result_file.string() + ": missing demand");
    const Vector q = vector_from_json(result.at("demand").at("q_hat"), "demand.q_hat");
    const Matrix sigma = matrix_from_json(result.at("demand").at("sigma_q_hat"), "demand.sigma_q_hat");
    if (q.size() != truth.demand.mean.size()) throw InputError("result and truth have different O-D dimensions");

    Json j;
    j["prmse"] = prmse(q, truth.demand.mean);
    j["kl_od"] = kl_od(q, sigma, truth.demand.mean, truth.demand.cov);
    j["hellinger_od"] = hellinger(q, sigma, truth.demand.mean, truth.demand.cov);
    j["q_hat"] = to_json(q);
    j["q_true"] = to_json(truth.demand.mean);
    ensure_dir(cfg.out_dir);
    const fs::path out = cfg.out_dir / "evaluation.json";
    write_json(out, j);
    return {out};
}

} // namespace pode
