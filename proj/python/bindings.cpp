#include "pode/commands.hpp"
#include "pode/cov_estimator.hpp"
#include "pode/error.hpp"
#include "pode/gesta.hpp"
#include "pode/igls.hpp"
#include "pode/mean_estimator.hpp"
#include "pode/metrics.hpp"
#include "pode/network.hpp"
#include "pode/sampler.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pode;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Probabilistic O-D demand estimation";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    py::class_<Link>(m, "Link")
        .def(py::init([](std::string id, std::string from, std::string to, double t0, double cap, double alpha,
                         double beta) { return Link{id, from, to, t0, cap, alpha, beta}; }),
             py::arg("id"), py::arg("from_node"), py::arg("to_node"), py::arg("free_flow_time"),
             py::arg("capacity"), py::arg("alpha") = 0.15, py::arg("beta") = 4.0)
        .def_readwrite("id", &Link::id)
        .def_readwrite("from_node", &Link::from)
        .def_readwrite("to_node", &Link::to)
        .def_readwrite("free_flow_time", &Link::free_flow_time)
        .def_readwrite("capacity", &Link::capacity)
        .def_readwrite("alpha", &Link::alpha)
        .def_readwrite("beta", &Link::beta);

    m.def("bpr_cost", &bpr_cost, py::arg("link"), py::arg("flow"));

    py::class_<Network>(m, "Network")
        .def(py::init([](std::vector<Link> links, std::vector<std::pair<std::string, std::string>> ods) {
                 std::vector<OdPair> pairs;
                 for (auto& [o, d] : ods) pairs.push_back({o, d});
                 return Network(std::move(links), std::move(pairs));
             }),
             py::arg("links"), py::arg("od_pairs"))
        .def_property_readonly("num_links", &Network::num_links)
        .def_property_readonly("num_nodes", &Network::num_nodes)
        .def_property_readonly("num_ods", &Network::num_ods)
        .def("free_flow_times", &Network::free_flow_times)
        .def("link_costs", &Network::link_costs)
        .def("link_index", &Network::link_index);

    m.def("read_network_csv", &read_network_csv, py::arg("links_file"), py::arg("od_file"));

    py::class_<PathSet>(m, "PathSet")
        .def_readonly("paths", &PathSet::paths)
        .def_readonly("path_od", &PathSet::path_od)
        .def_property_readonly("observed", [](const PathSet& ps) { return ps.observed.indices; })
        .def_property_readonly("num_paths", &PathSet::num_paths)
        .def_property_readonly("num_ods", &PathSet::num_ods)
        .def_property_readonly("delta", [](const PathSet& ps) { return Matrix(ps.delta); })
        .def_property_readonly("delta_obs", [](const PathSet& ps) { return Matrix(ps.delta_obs); })
        .def_property_readonly("od_incidence", [](const PathSet& ps) { return Matrix(ps.od_incidence); });

    auto observed_arg = [](const std::optional<std::vector<int>>& idx) -> std::optional<ObservedLinks> {
        if (!idx) return std::nullopt;
        return ObservedLinks{*idx};
    };
    m.def(
        "generate_paths",
        [observed_arg](const Network& net, int k, std::optional<Vector> costs, std::optional<std::vector<int>> observed) {
            return generate_paths(net, k, costs ? *costs : net.free_flow_times(), observed_arg(observed));
        },
        py::arg("net"), py::arg("k"), py::arg("link_costs") = py::none(), py::arg("observed") = py::none());
    m.def(
        "build_incidence",
        [observed_arg](const Network& net, const GroupedPaths& paths, std::optional<std::vector<int>> observed) {
            return build_incidence(net, paths, observed_arg(observed));
        },
        py::arg("net"), py::arg("paths"), py::arg("observed") = py::none());

    py::class_<DemandDistribution>(m, "DemandDistribution")
        .def(py::init([](Vector mean, Matrix cov) { return DemandDistribution{std::move(mean), std::move(cov)}; }),
             py::arg("mean"), py::arg("cov"))
        .def_readwrite("mean", &DemandDistribution::mean)
        .def_readwrite("cov", &DemandDistribution::cov);

    py::class_<RouteChoice>(m, "RouteChoice")
        .def_readonly("p", &RouteChoice::p)
        .def_property_readonly("p_tilde", [](const RouteChoice& rc) { return Matrix(rc.p_tilde); });
    m.def("make_route_choice", &make_route_choice, py::arg("ps"), py::arg("p"));

    py::class_<FlowDistribution>(m, "FlowDistribution")
        .def_readonly("f", &FlowDistribution::f)
        .def_readonly("sigma_f", &FlowDistribution::sigma_f)
        .def_readonly("x", &FlowDistribution::x)
        .def_readonly("sigma_x", &FlowDistribution::sigma_x);
    m.def("flow_distribution", &flow_distribution, py::arg("ps"), py::arg("route_choice"), py::arg("demand"),
          py::arg("path_covariance") = true, py::arg("sigma_e") = Matrix());

    py::enum_<ChoiceModel>(m, "ChoiceModel").value("Logit", ChoiceModel::Logit).value("Probit", ChoiceModel::Probit);

    py::class_<EquilibriumConfig>(m, "EquilibriumConfig")
        .def(py::init<>())
        .def_readwrite("model", &EquilibriumConfig::model)
        .def_readwrite("theta", &EquilibriumConfig::theta)
        .def_readwrite("mc_samples", &EquilibriumConfig::mc_samples)
        .def_readwrite("seed", &EquilibriumConfig::seed)
        .def_readwrite("max_iters", &EquilibriumConfig::max_iters)
        .def_readwrite("tol", &EquilibriumConfig::tol)
        .def_readwrite("msa_offset", &EquilibriumConfig::msa_offset);

    py::class_<EquilibriumResult>(m, "EquilibriumResult")
        .def_readonly("route_choice", &EquilibriumResult::route_choice)
        .def_readonly("flows", &EquilibriumResult::flows)
        .def_readonly("iterations", &EquilibriumResult::iterations)
        .def_readonly("residual", &EquilibriumResult::residual)
        .def_readonly("residual_trace", &EquilibriumResult::residual_trace)
        .def_readonly("converged", &EquilibriumResult::converged);
    m.def(
        "solve_statistical_equilibrium",
        [](const Network& net, const PathSet& ps, const DemandDistribution& d, const EquilibriumConfig& cfg) {
            return solve_statistical_equilibrium(net, ps, d, cfg);
        },
        py::arg("net"), py::arg("ps"), py::arg("demand"), py::arg("cfg") = EquilibriumConfig{});

    py::class_<ObservationSet>(m, "ObservationSet")
        .def_readonly("counts", &ObservationSet::counts)
        .def_property_readonly("observed", [](const ObservationSet& o) { return o.observed.indices; })
        .def_property_readonly("days", &ObservationSet::days);
    m.def(
        "synthesize",
        [](const Network& net, const PathSet& ps, const DemandDistribution& truth, const RouteChoice& rc, int days,
           double epsilon, std::uint64_t seed) {
            SynthesisConfig cfg;
            cfg.truth = truth;
            cfg.route_choice = rc;
            cfg.n_days = days;
            cfg.epsilon = epsilon;
            cfg.seed = seed;
            return synthesize(net, ps, cfg);
        },
        py::arg("net"), py::arg("ps"), py::arg("truth"), py::arg("route_choice"), py::arg("days"),
        py::arg("epsilon") = 0.0, py::arg("seed") = 1);

    py::class_<HistoricalPrior>(m, "HistoricalPrior")
        .def(py::init([](Vector q_h, std::optional<Matrix> sigma) {
                 return HistoricalPrior{std::move(q_h), sigma ? *sigma : Matrix()};
             }),
             py::arg("q_h"), py::arg("sigma_q_h") = py::none());

    py::class_<MeanEstimate>(m, "MeanEstimate")
        .def_readonly("q_hat", &MeanEstimate::q_hat)
        .def_readonly("f_hat", &MeanEstimate::f_hat)
        .def_readonly("objective_trace", &MeanEstimate::objective_trace)
        .def_readonly("kkt_residual", &MeanEstimate::kkt_residual)
        .def_readonly("non_unique", &MeanEstimate::non_unique);
    m.def("observed_mean", &observed_mean, py::arg("obs"));
    m.def(
        "estimate_q_gls",
        [](const PathSet& ps, const RouteChoice& rc, const Vector& x, const Matrix& sigma, int n,
           std::optional<HistoricalPrior> prior) { return estimate_q_gls(ps, rc, x, sigma, n, prior); },
        py::arg("ps"), py::arg("route_choice"), py::arg("x_hat_obs"), py::arg("sigma_x_obs"), py::arg("n"),
        py::arg("prior") = py::none());
    m.def("estimate_q_pinv", &estimate_q_pinv, py::arg("ps"), py::arg("route_choice"), py::arg("x_hat_obs"),
          py::arg("sigma_x_obs"));

    py::enum_<LassoAlgorithm>(m, "LassoAlgorithm")
        .value("ISTA", LassoAlgorithm::ISTA)
        .value("FISTA", LassoAlgorithm::FISTA);
    py::class_<LassoConfig>(m, "LassoConfig")
        .def(py::init<>())
        .def_readwrite("lambda_", &LassoConfig::lambda)
        .def_readwrite("algorithm", &LassoConfig::algorithm)
        .def_readwrite("max_iters", &LassoConfig::max_iters)
        .def_readwrite("tol", &LassoConfig::tol);
    py::class_<CovProblem>(m, "CovProblem").def_readonly("s_x", &CovProblem::s_x).def_readonly("route", &CovProblem::route);
    m.def("make_cov_problem", &make_cov_problem, py::arg("s_x_obs"), py::arg("ps"), py::arg("route_choice"),
          py::arg("q_hat"));
    py::class_<CovEstimate>(m, "CovEstimate")
        .def_readonly("sigma_q_hat", &CovEstimate::sigma_q_hat)
        .def_readonly("objective_trace", &CovEstimate::objective_trace)
        .def_readonly("nnz", &CovEstimate::nnz);
    m.def(
        "solve_sigma_q",
        [](const CovProblem& pr, const LassoConfig& cfg) { return solve_sigma_q(pr, cfg); }, py::arg("problem"),
        py::arg("cfg") = LassoConfig{});
    m.def("lambda_max", &lambda_max, py::arg("problem"));
    m.def("soft_threshold", &soft_threshold, py::arg("beta"), py::arg("lambda_"));
    m.def("empirical_s_x", [](const ObservationSet& obs) { return empirical_cov(obs).s_x; }, py::arg("obs"));

    py::enum_<Distance>(m, "Distance").value("KL", Distance::KL).value("Hellinger", Distance::Hellinger);
    m.def("kl", &kl);
    m.def("hellinger", &hellinger);

    py::class_<IGLSConfig>(m, "IGLSConfig")
        .def(py::init<>())
        .def_readwrite("outer_iters", &IGLSConfig::outer_iters)
        .def_readwrite("inner_iters", &IGLSConfig::inner_iters)
        .def_readwrite("distance", &IGLSConfig::distance)
        .def_readwrite("tau_tol", &IGLSConfig::tau_tol)
        .def_readwrite("equilibrium", &IGLSConfig::equilibrium)
        .def_readwrite("lasso", &IGLSConfig::lasso);
    py::class_<IGLSResult>(m, "IGLSResult")
        .def_property_readonly("q_hat", [](const IGLSResult& r) { return r.demand.mean; })
        .def_property_readonly("sigma_q_hat", [](const IGLSResult& r) { return r.demand.cov; })
        .def_readonly("route_choice", &IGLSResult::route_choice)
        .def_readonly("flows", &IGLSResult::flows)
        .def_readonly("tau_trace", &IGLSResult::tau_trace)
        .def_readonly("converged", &IGLSResult::converged)
        .def_readonly("outer_iterations", &IGLSResult::outer_iterations);
    m.def("run_igls", &run_igls, py::arg("net"), py::arg("ps"), py::arg("obs"), py::arg("cfg") = IGLSConfig{});

    m.def("prmse", &prmse, py::arg("q_hat"), py::arg("q_true"));
    m.def("kl_od", &kl_od, py::arg("q_hat"), py::arg("sigma_hat"), py::arg("q_true"), py::arg("sigma_true"));
    py::class_<VarianceDecomposition>(m, "VarianceDecomposition")
        .def_readonly("demand_share", &VarianceDecomposition::demand_share)
        .def_readonly("route_share", &VarianceDecomposition::route_share)
        .def_readonly("error_share", &VarianceDecomposition::error_share);
    m.def("variance_decomposition", &variance_decomposition, py::arg("ps"), py::arg("route_choice"),
          py::arg("q_hat"), py::arg("sigma_q"), py::arg("sigma_e") = Matrix());

    auto options = [](const std::string& config, std::optional<std::string> out, std::optional<std::uint64_t> seed) {
        CommandOptions o;
        o.config = config;
        if (out) o.out = *out;
        o.seed = seed;
        return o;
    };
    m.def(
        "cmd_synthesize", [options](const std::string& c, std::optional<std::string> out, std::optional<std::uint64_t> seed) {
            return cmd_synthesize(options(c, out, seed));
        },
        py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none());
    m.def(
        "cmd_estimate", [options](const std::string& c, std::optional<std::string> out, std::optional<std::uint64_t> seed) {
            return cmd_estimate(options(c, out, seed));
        },
        py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none());
}
