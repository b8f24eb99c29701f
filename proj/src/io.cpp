#include "pode/io.hpp"

#include "pode/error.hpp"

#include <fstream>
#include <iomanip>

namespace pode {

Json to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json to_json(const Matrix& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Vector vector_from_json(const Json& j, const std::string& field) {
    if (!j.is_array()) throw InputError(field + ": expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InputError(field + ": expected an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Matrix matrix_from_json(const Json& j, const std::string& field) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        throw InputError(field + ": expected {rows, cols, data}");
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const Vector flat = vector_from_json(j.at("data"), field + ".data");
    if (r < 0 || c < 0 || flat.size() != r * c) throw InputError(field + ": data length does not match rows*cols");
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = flat[i * c + k];
    return m;
}

Json paths_json(const Network& net, const PathSet& ps) {
    Json out = Json::array();
    for (int od = 0; od < ps.num_ods(); ++od) {
        Json group = Json::array();
        for (int k = ps.od_first_path[od]; k < ps.od_first_path[od + 1]; ++k) {
            Json path = Json::array();
            for (int a : ps.paths[k]) path.push_back(net.links()[a].id);
            group.push_back(std::move(path));
        }
        const auto& pair = net.od_pairs()[od];
        out.push_back(Json{{"origin", pair.origin}, {"destination", pair.destination}, {"paths", std::move(group)}});
    }
    return out;
}

void write_truth_json(const std::filesystem::path& file, const Network& net, const PathSet& ps,
                      const DemandDistribution& demand, const RouteChoice& rc) {
    Json j;
    j["q"] = to_json(demand.mean);
    j["sigma_q"] = to_json(demand.cov);
    j["p"] = to_json(rc.p);
    j["paths"] = paths_json(net, ps);
    write_json(file, j);
}

Truth read_truth_json(const std::filesystem::path& file) {
    const Json j = read_json(file);
    if (!j.contains("q") || !j.contains("sigma_q")) throw InputError(file.string() + ": truth needs q and sigma_q");
    Truth t;
    t.demand.mean = vector_from_json(j.at("q"), file.string() + ": q");
    t.demand.cov = matrix_from_json(j.at("sigma_q"), file.string() + ": sigma_q");
    if (j.contains("p")) t.p = vector_from_json(j.at("p"), file.string() + ": p");
    t.demand.validate();
    return t;
}

Json decomposition_json(const Network& net, const VarianceDecomposition& vd) {
    Json links = Json::array();
    for (int a = 0; a < net.num_links(); ++a) {
        const auto i = static_cast<Eigen::Index>(a);
        links.push_back(Json{{"link", net.links()[a].id},
                             {"total_variance", vd.total[i]},
                             {"defined", static_cast<bool>(vd.defined[static_cast<std::size_t>(a)])},
                             {"demand_share", vd.demand_share[i]},
                             {"route_share", vd.route_share[i]},
                             {"error_share", vd.error_share[i]}});
    }
    return Json{{"links", std::move(links)},
                {"trace_shares",
                 {{"demand", vd.demand_trace_share}, {"route", vd.route_trace_share}, {"error", vd.error_trace_share}}}};
}

void write_convergence_csv(const std::filesystem::path& file, const IGLSResult& res) {
    std::ofstream out(file);
    if (!out) throw InputError("cannot write " + file.string());
    out << "outer,tau,mean_residual,mean_passes,lasso_objective\n" << std::setprecision(12);
    for (std::size_t i = 0; i < res.tau_trace.size(); ++i)
        out << i + 1 << ',' << res.tau_trace[i] << ',' << res.mean_residuals[i] << ',' << res.mean_passes[i] << ','
            << res.lasso_objectives[i] << '\n';
}

Json read_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open file: " + file.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw InputError(file.string() + ": invalid JSON: " + e.what());
    }
}

void write_json(const std::filesystem::path& file, const Json& j) {
    std::ofstream out(file);
    if (!out) throw InputError("cannot write " + file.string());
    out << j.dump(2) << '\n';
}

} // namespace pode
