#include "pode/config.hpp"

#include "csv.hpp"
#include "pode/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace pode {

std::vector<double> parse_number_list(const std::string& text, const std::string& field) {
    std::vector<double> out;
    for (const auto& item : csv::split(text)) {
        const std::string t = csv::trim(item);
        if (t.empty()) continue;
        out.push_back(csv::to_double(t, field));
    }
    return out;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

Distance parse_distance(const std::string& text) {
    const std::string t = lower(csv::trim(text));
    if (t == "kl") return Distance::KL;
    if (t == "hellinger") return Distance::Hellinger;
    throw InputError("distance must be 'kl' or 'hellinger', got '" + text + "'");
}

ChoiceModel parse_choice_model(const std::string& text) {
    const std::string t = lower(csv::trim(text));
    if (t == "logit") return ChoiceModel::Logit;
    if (t == "probit") return ChoiceModel::Probit;
    throw InputError("equilibrium.model must be 'logit' or 'probit', got '" + text + "'");
}

LassoAlgorithm parse_lasso_algorithm(const std::string& text) {
    const std::string t = lower(csv::trim(text));
    if (t == "ista") return LassoAlgorithm::ISTA;
    if (t == "fista") return LassoAlgorithm::FISTA;
    throw InputError("lasso.algorithm must be 'ista' or 'fista', got '" + text + "'");
}

std::string to_string(Distance d) { return d == Distance::KL ? "kl" : "hellinger"; }
std::string to_string(ChoiceModel m) { return m == ChoiceModel::Logit ? "logit" : "probit"; }
std::string to_string(LassoAlgorithm a) { return a == LassoAlgorithm::ISTA ? "ista" : "fista"; }

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"network", {"links", "od", "observed", "paths_per_od"}},
        {"truth", {"mean", "cov", "variance", "correlation"}},
        {"synthesis", {"days", "epsilon", "seed"}},
        {"equilibrium", {"model", "theta", "mc_samples", "seed", "max_iters", "tol", "msa_offset", "path_covariance"}},
        {"igls",
         {"outer_iters", "inner_iters", "distance", "tau_tol", "init_sigma_scale", "init_sigma_seed", "mean_tol"}},
        {"lasso",
         {"lambda", "algorithm", "max_iters", "step_init", "backtrack", "tol", "grid", "grid_min", "grid_max",
          "grid_points", "cold_start"}},
        {"prior", {"mean", "cov"}},
        {"data", {"observations", "truth", "result"}},
        {"output", {"dir"}},
    };
    return keys;
}

class Sections {
public:
    explicit Sections(std::map<std::string, std::map<std::string, std::string>> raw) : raw_(std::move(raw)) {}

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        auto s = raw_.find(section);
        if (s == raw_.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        return k->second;
    }
    bool has_section(const std::string& section) const { return raw_.count(section) != 0; }

    double number(const std::string& section, const std::string& key, double fallback) const {
        auto v = get(section, key);
        return v ? csv::to_double(*v, section + "." + key) : fallback;
    }
    int integer(const std::string& section, const std::string& key, int fallback) const {
        auto v = get(section, key);
        if (!v) return fallback;
        const double d = csv::to_double(*v, section + "." + key);
        if (d != std::floor(d) || std::abs(d) > 2e9) throw InputError(section + "." + key + " must be an integer");
        return static_cast<int>(d);
    }
    std::uint64_t seed(const std::string& section, const std::string& key, std::uint64_t fallback) const {
        auto v = get(section, key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            const auto s = csv::trim(*v);
            const unsigned long long out = std::stoull(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return out;
        } catch (const std::exception&) {
            throw InputError(section + "." + key + " must be a nonnegative integer, got '" + *v + "'");
        }
    }
    bool flag(const std::string& section, const std::string& key, bool fallback) const {
        auto v = get(section, key);
        if (!v) return fallback;
        const std::string t = lower(csv::trim(*v));
        if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
        if (t == "false" || t == "0" || t == "no" || t == "off") return false;
        throw InputError(section + "." + key + " must be a boolean, got '" + *v + "'");
    }

private:
    std::map<std::string, std::map<std::string, std::string>> raw_;
};

Matrix square_from_list(const std::vector<double>& v, Eigen::Index k, const std::string& field) {
    if (static_cast<Eigen::Index>(v.size()) != k * k)
        throw InputError(field + " must list " + std::to_string(k * k) + " values (row-major)");
    Matrix m(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) = v[static_cast<std::size_t>(i * k + j)];
    return m;
}

} // namespace

RunConfig load_config(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) throw InputError("config file not found: " + file.string());
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(file.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw InputError("cannot parse config " + file.string() + ": " + e.what());
    }

    RunConfig cfg;
    cfg.source = file;
    for (const auto& [section, body] : tree) {
        auto known = known_keys().find(section);
        if (known == known_keys().end()) throw InputError("config: unknown section [" + section + "]");
        if (body.empty() && !body.data().empty()) throw InputError("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            if (!known->second.count(key)) throw InputError("config: unknown key " + section + "." + key);
            cfg.raw[section][key] = csv::trim(value.data());
        }
    }
    const Sections s(cfg.raw);
    const std::filesystem::path base = std::filesystem::absolute(file).parent_path();
    auto path_of = [&](const std::string& section, const std::string& key) -> std::optional<std::filesystem::path> {
        auto v = s.get(section, key);
        if (!v || v->empty()) return std::nullopt;
        std::filesystem::path p(*v);
        return p.is_absolute() ? p : base / p;
    };

    // [network]
    auto links = path_of("network", "links");
    auto od = path_of("network", "od");
    if (!links) throw InputError("config: network.links is required");
    if (!od) throw InputError("config: network.od is required");
    cfg.links_file = *links;
    cfg.od_file = *od;
    cfg.observed_file = path_of("network", "observed");
    cfg.paths_per_od = s.integer("network", "paths_per_od", cfg.paths_per_od);
    if (cfg.paths_per_od < 1) throw InputError("config: network.paths_per_od must be >= 1");

    // [truth]
    if (s.has_section("truth")) {
        auto mean = s.get("truth", "mean");
        if (!mean) throw InputError("config: truth.mean is required in [truth]");
        DemandDistribution d;
        const auto mv = parse_number_list(*mean, "truth.mean");
        d.mean = Eigen::Map<const Vector>(mv.data(), static_cast<Eigen::Index>(mv.size()));
        const auto k = d.mean.size();
        if (auto cov = s.get("truth", "cov")) {
            d.cov = square_from_list(parse_number_list(*cov, "truth.cov"), k, "truth.cov");
        } else if (auto var = s.get("truth", "variance")) {
            const auto vv = parse_number_list(*var, "truth.variance");
            if (static_cast<Eigen::Index>(vv.size()) != k)
                throw InputError("truth.variance must list one value per O-D pair");
            const double rho = s.number("truth", "correlation", 0.0);
            if (!(rho >= -1.0 && rho <= 1.0)) throw InputError("truth.correlation must lie in [-1, 1]");
            d.cov.resize(k, k);
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = 0; j < k; ++j)
                    d.cov(i, j) = (i == j ? 1.0 : rho) * std::sqrt(vv[static_cast<std::size_t>(i)] *
                                                                    vv[static_cast<std::size_t>(j)]);
        } else {
            throw InputError("config: [truth] needs cov or variance");
        }
        d.validate();
        cfg.truth = d;
    }

    // [synthesis]
    cfg.days = s.integer("synthesis", "days", cfg.days);
    cfg.epsilon = s.number("synthesis", "epsilon", cfg.epsilon);
    cfg.seed = s.seed("synthesis", "seed", cfg.seed);
    if (cfg.days < 1) throw InputError("config: synthesis.days must be >= 1");
    if (!(cfg.epsilon >= 0.0)) throw InputError("config: synthesis.epsilon must be >= 0");

    // [equilibrium]
    auto& eq = cfg.equilibrium;
    if (auto m = s.get("equilibrium", "model")) eq.model = parse_choice_model(*m);
    eq.theta = s.number("equilibrium", "theta", eq.theta);
    eq.mc_samples = s.integer("equilibrium", "mc_samples", eq.mc_samples);
    eq.seed = s.seed("equilibrium", "seed", eq.seed);
    eq.max_iters = s.integer("equilibrium", "max_iters", eq.max_iters);
    eq.tol = s.number("equilibrium", "tol", eq.tol);
    eq.msa_offset = s.integer("equilibrium", "msa_offset", eq.msa_offset);
    eq.path_covariance = s.flag("equilibrium", "path_covariance", eq.path_covariance);
    eq.validate();

    // [igls]
    auto& ig = cfg.igls;
    ig.equilibrium = eq;
    ig.outer_iters = s.integer("igls", "outer_iters", ig.outer_iters);
    ig.inner_iters = s.integer("igls", "inner_iters", ig.inner_iters);
    if (auto d = s.get("igls", "distance")) ig.distance = parse_distance(*d);
    ig.tau_tol = s.number("igls", "tau_tol", ig.tau_tol);
    ig.init_sigma_scale = s.number("igls", "init_sigma_scale", ig.init_sigma_scale);
    if (s.get("igls", "init_sigma_seed")) ig.init_sigma_seed = s.seed("igls", "init_sigma_seed", 0);
    ig.mean_tol = s.number("igls", "mean_tol", ig.mean_tol);

    // [lasso]
    auto& la = ig.lasso;
    la.lambda = s.number("lasso", "lambda", la.lambda);
    if (auto a = s.get("lasso", "algorithm")) la.algorithm = parse_lasso_algorithm(*a);
    la.max_iters = s.integer("lasso", "max_iters", la.max_iters);
    la.step_init = s.number("lasso", "step_init", la.step_init);
    la.backtrack = s.number("lasso", "backtrack", la.backtrack);
    la.tol = s.number("lasso", "tol", la.tol);
    if (auto g = s.get("lasso", "grid")) cfg.lambda_grid = parse_number_list(*g, "lasso.grid");
    cfg.grid_min = s.number("lasso", "grid_min", cfg.grid_min);
    if (auto g = s.get("lasso", "grid_max"); g && lower(*g) != "auto")
        cfg.grid_max = csv::to_double(*g, "lasso.grid_max");
    cfg.grid_points = s.integer("lasso", "grid_points", cfg.grid_points);
    cfg.cold_start = s.flag("lasso", "cold_start", cfg.cold_start);
    if (!(cfg.grid_min > 0.0)) throw InputError("config: lasso.grid_min must be > 0");
    if (cfg.grid_points < 2) throw InputError("config: lasso.grid_points must be >= 2");

    // [prior]
    if (s.has_section("prior")) {
        auto mean = s.get("prior", "mean");
        if (!mean) throw InputError("config: prior.mean is required in [prior]");
        HistoricalPrior prior;
        const auto mv = parse_number_list(*mean, "prior.mean");
        prior.q_h = Eigen::Map<const Vector>(mv.data(), static_cast<Eigen::Index>(mv.size()));
        if (auto cov = s.get("prior", "cov"))
            prior.sigma_q_h = square_from_list(parse_number_list(*cov, "prior.cov"), prior.q_h.size(), "prior.cov");
        ig.prior = prior;
    }
    ig.validate();

    // [data], [output]
    cfg.observations_file = path_of("data", "observations");
    cfg.truth_file = path_of("data", "truth");
    cfg.result_file = path_of("data", "result");
    if (auto out = path_of("output", "dir")) cfg.out_dir = *out;
    else cfg.out_dir = base;
    return cfg;
}

} // namespace pode
