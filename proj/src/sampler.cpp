#include "pode/sampler.hpp"

#include "csv.hpp"
#include "pode/error.hpp"
#include "rng.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace pode {

void ObservationSet::validate() const {
    if (counts.rows() < 1) throw InputError("observation set has no days");
    if (counts.cols() != static_cast<Eigen::Index>(observed.indices.size()))
        throw InputError("observation columns do not match the observed links");
    if ((counts.array() < 0.0).any()) throw InputError("observation counts must be nonnegative");
}

namespace {

CountVector draw_demand(const Vector& mean, const Matrix& factor, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Vector z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    const Vector v = mean + factor * z;
    CountVector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::max<std::int64_t>(0, std::llround(v[i]));
    return out;
}

DaySample draw_day(const PathSet& ps, const CountVector& demand, const RouteChoice& rc, std::mt19937_64& rng) {
    DaySample day;
    day.path_counts = CountVector::Zero(ps.num_paths());
    for (int od = 0; od < ps.num_ods(); ++od) {
        const int b = ps.od_first_path[od];
        const int n = ps.od_path_count(od);
        std::int64_t remaining = demand[od];
        double mass = 1.0;
        for (int i = 0; i < n - 1 && remaining > 0; ++i) {
            const double pi = rc.p[b + i];
            const double prob = mass > 0.0 ? std::clamp(pi / mass, 0.0, 1.0) : 0.0;
            std::binomial_distribution<std::int64_t> binom(remaining, prob);
            const std::int64_t k = binom(rng);
            day.path_counts[b + i] = k;
            remaining -= k;
            mass -= pi;
        }
        day.path_counts[b + n - 1] += remaining;
    }
    day.link_counts = ps.delta * day.path_counts.cast<double>();
    return day;
}

Vector apply_perturbation(const Vector& x, double epsilon, std::mt19937_64& rng) {
    if (epsilon == 0.0) return x;
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    Vector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = std::max(0.0, x[i] * (1.0 + uniform(rng) * epsilon));
    return out;
}

} // namespace

CountMatrix sample_demand(const DemandDistribution& d, int n, std::uint64_t seed) {
    d.validate();
    if (n < 1) throw InputError("sample_demand: n must be >= 1");
    const Matrix factor = psd_factor(d.cov);
    CountMatrix out(n, d.mean.size());
    for (int i = 0; i < n; ++i) {
        auto rng = detail::substream(seed, detail::kDemandStream, static_cast<std::uint64_t>(i));
        out.row(i) = draw_demand(d.mean, factor, rng).transpose();
    }
    return out;
}

DaySample sample_day(const PathSet& ps, const CountVector& demand, const RouteChoice& rc, std::uint64_t seed) {
    if (demand.size() != ps.num_ods()) throw InputError("sample_day: demand dimension mismatch");
    if ((demand.array() < 0).any()) throw InputError("sample_day: demand must be nonnegative");
    auto rng = detail::substream(seed, detail::kDayStream, 0);
    return draw_day(ps, demand, rc, rng);
}

Vector perturb(const Vector& x, double epsilon, std::uint64_t seed) {
    if (!(epsilon >= 0.0)) throw InputError("perturb: epsilon must be >= 0");
    auto rng = detail::substream(seed, detail::kDayStream, 1);
    return apply_perturbation(x, epsilon, rng);
}

ObservationSet synthesize(const Network& net, const PathSet& ps, const SynthesisConfig& cfg) {
    if (cfg.n_days < 1) throw InputError("synthesize: n_days must be >= 1");
    if (!(cfg.epsilon >= 0.0)) throw InputError("synthesize: epsilon must be >= 0");
    if (ps.num_links() != net.num_links() || ps.num_ods() != net.num_ods())
        throw InputError("synthesize: path set does not belong to the network");
    cfg.truth.validate();
    if (cfg.truth.mean.size() != ps.num_ods()) throw InputError("synthesize: truth dimension mismatch");
    if (cfg.route_choice.p.size() != ps.num_paths()) throw InputError("synthesize: route choice dimension mismatch");

    const Matrix factor = psd_factor(cfg.truth.cov);
    ObservationSet obs;
    obs.observed = ps.observed;
    obs.counts.resize(cfg.n_days, ps.num_observed());
    for (int day = 0; day < cfg.n_days; ++day) {
        auto rng = detail::substream(cfg.seed, detail::kDayStream, static_cast<std::uint64_t>(day) + 2);
        const CountVector demand = draw_demand(cfg.truth.mean, factor, rng);
        const DaySample sample = draw_day(ps, demand, cfg.route_choice, rng);
        const Vector x = apply_perturbation(sample.link_counts, cfg.epsilon, rng);
        for (int j = 0; j < ps.num_observed(); ++j) obs.counts(day, j) = x[ps.observed.indices[j]];
    }
    return obs;
}

void write_observations_csv(const std::filesystem::path& file, const ObservationSet& obs, const Network& net) {
    std::ofstream out(file);
    if (!out) throw InputError("cannot write " + file.string());
    out << "day";
    for (int a : obs.observed.indices) out << ",link_" << net.links()[a].id;
    out << '\n' << std::setprecision(12);
    for (int i = 0; i < obs.days(); ++i) {
        out << i + 1;
        for (Eigen::Index j = 0; j < obs.counts.cols(); ++j) out << ',' << obs.counts(i, j);
        out << '\n';
    }
}

ObservationSet read_observations_csv(const std::filesystem::path& file, const Network& net) {
    const auto rows = csv::read_rows(file);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "day")
        throw InputError(file.string() + ": missing header day,link_<id>,...");
    ObservationSet obs;
    for (std::size_t j = 1; j < rows[0].size(); ++j) {
        const std::string& h = rows[0][j];
        if (h.rfind("link_", 0) != 0) throw InputError(file.string() + ": bad column '" + h + "'");
        obs.observed.indices.push_back(net.link_index(h.substr(5)));
    }
    obs.observed.validate(net.num_links());
    const auto cols = static_cast<Eigen::Index>(obs.observed.indices.size());
    obs.counts.resize(static_cast<Eigen::Index>(rows.size()) - 1, cols);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::string ctx = file.string() + " row " + std::to_string(i + 1);
        if (static_cast<Eigen::Index>(rows[i].size()) != cols + 1)
            throw InputError(ctx + ": expected " + std::to_string(cols + 1) + " fields");
        for (Eigen::Index j = 0; j < cols; ++j) obs.counts(i - 1, j) = csv::to_double(rows[i][j + 1], ctx);
    }
    obs.validate();
    return obs;
}

} // namespace pode
