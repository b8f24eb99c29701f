#include "pode/network.hpp"

#include "csv.hpp"
#include "pode/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>

namespace pode {

double bpr_cost(const Link& link, double flow) {
    if (!(flow >= 0.0)) throw std::domain_error("bpr_cost: negative flow on link " + link.id);
    return link.free_flow_time * (1.0 + link.alpha * std::pow(flow / link.capacity, link.beta));
}

double bpr_derivative(const Link& link, double flow) {
    if (!(flow >= 0.0)) throw std::domain_error("bpr_derivative: negative flow on link " + link.id);
    return link.free_flow_time * link.alpha * link.beta *
           std::pow(flow / link.capacity, link.beta - 1.0) / link.capacity;
}

Network::Network(std::vector<Link> links, std::vector<OdPair> od_pairs)
    : links_(std::move(links)), od_pairs_(std::move(od_pairs)) {
    auto intern = [this](const std::string& id) {
        auto [it, inserted] = node_lookup_.emplace(id, static_cast<int>(nodes_.size()));
        if (inserted) {
            nodes_.push_back(id);
            out_links_.emplace_back();
        }
        return it->second;
    };
    for (std::size_t a = 0; a < links_.size(); ++a) {
        const Link& l = links_[a];
        if (!link_lookup_.emplace(l.id, static_cast<int>(a)).second)
            throw InputError("duplicate link id: " + l.id);
        if (!(l.free_flow_time > 0.0)) throw InputError("link " + l.id + ": free_flow_time must be > 0");
        if (!(l.capacity > 0.0)) throw InputError("link " + l.id + ": capacity must be > 0");
        if (!(l.beta >= 1.0)) throw InputError("link " + l.id + ": beta must be >= 1");
        if (!(l.alpha >= 0.0)) throw InputError("link " + l.id + ": alpha must be >= 0");
        if (l.from == l.to) throw InputError("link " + l.id + ": self loop");
        const int u = intern(l.from);
        const int v = intern(l.to);
        link_from_.push_back(u);
        link_to_.push_back(v);
        out_links_[u].push_back(static_cast<int>(a));
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const OdPair& od : od_pairs_) {
        if (!seen.emplace(od.origin, od.destination).second)
            throw InputError("duplicate O-D pair " + od.origin + "->" + od.destination);
        if (od.origin == od.destination)
            throw InputError("O-D pair " + od.origin + "->" + od.destination + " has identical ends");
        auto o = node_lookup_.find(od.origin);
        auto d = node_lookup_.find(od.destination);
        if (o == node_lookup_.end() || d == node_lookup_.end())
            throw InputError("O-D pair " + od.origin + "->" + od.destination +
                             " references an unknown node");
        od_origin_.push_back(o->second);
        od_destination_.push_back(d->second);
    }
}

int Network::node_index(const std::string& id) const {
    auto it = node_lookup_.find(id);
    if (it == node_lookup_.end()) throw InputError("unknown node: " + id);
    return it->second;
}

int Network::link_index(const std::string& id) const {
    auto it = link_lookup_.find(id);
    if (it == link_lookup_.end()) throw InputError("unknown link: " + id);
    return it->second;
}

Vector Network::free_flow_times() const {
    Vector t(num_links());
    for (int a = 0; a < num_links(); ++a) t[a] = links_[a].free_flow_time;
    return t;
}

Vector Network::link_costs(const Vector& flows) const {
    if (flows.size() != num_links()) throw InputError("link_costs: dimension mismatch");
    Vector t(num_links());
    for (int a = 0; a < num_links(); ++a) t[a] = bpr_cost(links_[a], flows[a]);
    return t;
}

Vector Network::link_cost_derivatives(const Vector& flows) const {
    if (flows.size() != num_links()) throw InputError("link_cost_derivatives: dimension mismatch");
    Vector t(num_links());
    for (int a = 0; a < num_links(); ++a) t[a] = bpr_derivative(links_[a], flows[a]);
    return t;
}

ObservedLinks ObservedLinks::all(int num_links) {
    ObservedLinks o;
    o.indices.resize(num_links);
    for (int a = 0; a < num_links; ++a) o.indices[a] = a;
    return o;
}

void ObservedLinks::validate(int num_links) const {
    std::vector<char> seen(num_links, 0);
    for (int a : indices) {
        if (a < 0 || a >= num_links) throw InputError("observed link index out of range");
        if (seen[a]) throw InputError("observed link listed twice");
        seen[a] = 1;
    }
}

namespace {

void check_path(const Network& net, int od, const std::vector<int>& path) {
    const auto& pair = net.od_pairs()[od];
    const std::string name = pair.origin + "->" + pair.destination;
    if (path.empty()) throw InputError("empty path for O-D " + name);
    std::vector<char> visited(net.num_nodes(), 0);
    int node = net.od_origin(od);
    visited[node] = 1;
    for (int a : path) {
        if (a < 0 || a >= net.num_links()) throw InputError("path for O-D " + name + " references an invalid link");
        if (net.link_from(a) != node)
            throw InputError("path for O-D " + name + " is not connected at link " + net.links()[a].id);
        node = net.link_to(a);
        if (visited[node]) throw InputError("path for O-D " + name + " revisits node " + net.nodes()[node]);
        visited[node] = 1;
    }
    if (node != net.od_destination(od))
        throw InputError("path for O-D " + name + " does not end at the destination");
}

} // namespace

PathSet build_incidence(const Network& net, const GroupedPaths& grouped,
                        std::optional<ObservedLinks> observed) {
    if (static_cast<int>(grouped.size()) != net.num_ods())
        throw InputError("build_incidence: one path group per O-D pair required");
    PathSet ps;
    ps.observed = observed ? std::move(*observed) : ObservedLinks::all(net.num_links());
    ps.observed.validate(net.num_links());
    ps.od_first_path.push_back(0);
    for (int od = 0; od < net.num_ods(); ++od) {
        if (grouped[od].empty())
            throw InputError("O-D pair " + net.od_pairs()[od].origin + "->" +
                             net.od_pairs()[od].destination + " has no path");
        for (const auto& path : grouped[od]) {
            check_path(net, od, path);
            ps.paths.push_back(path);
            ps.path_od.push_back(od);
        }
        ps.od_first_path.push_back(static_cast<int>(ps.paths.size()));
    }

    const int na = net.num_links();
    const int nk = ps.num_paths();
    const int nq = net.num_ods();
    std::vector<Eigen::Triplet<double>> d, m;
    for (int k = 0; k < nk; ++k) {
        for (int a : ps.paths[k]) d.emplace_back(a, k, 1.0);
        m.emplace_back(ps.path_od[k], k, 1.0);
    }
    ps.delta.resize(na, nk);
    ps.delta.setFromTriplets(d.begin(), d.end());
    ps.od_incidence.resize(nq, nk);
    ps.od_incidence.setFromTriplets(m.begin(), m.end());
    ps.transition = SparseMatrix(ps.od_incidence.transpose());

    std::vector<int> row_of(na, -1);
    for (std::size_t i = 0; i < ps.observed.indices.size(); ++i) row_of[ps.observed.indices[i]] = static_cast<int>(i);
    std::vector<Eigen::Triplet<double>> dobs;
    for (int k = 0; k < nk; ++k)
        for (int a : ps.paths[k])
            if (row_of[a] >= 0) dobs.emplace_back(row_of[a], k, 1.0);
    ps.delta_obs.resize(ps.num_observed(), nk);
    ps.delta_obs.setFromTriplets(dobs.begin(), dobs.end());
    return ps;
}

namespace {

struct ShortestPathSolver {
    const Network& net;
    const Vector& cost;
    std::vector<double> dist;
    std::vector<int> pred;
    std::vector<char> settled;

    ShortestPathSolver(const Network& n, const Vector& c)
        : net(n), cost(c), dist(n.num_nodes()), pred(n.num_nodes()), settled(n.num_nodes()) {}

    // Dijkstra from src to dst avoiding banned links/nodes; returns link list.
    std::optional<std::vector<int>> run(int src, int dst, const std::vector<char>& banned_link,
                                        const std::vector<char>& banned_node) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        std::fill(pred.begin(), pred.end(), -1);
        std::fill(settled.begin(), settled.end(), 0);
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        dist[src] = 0.0;
        heap.emplace(0.0, src);
        while (!heap.empty()) {
            auto [du, u] = heap.top();
            heap.pop();
            if (settled[u]) continue;
            settled[u] = 1;
            if (u == dst) break;
            for (int a : net.out_links(u)) {
                if (banned_link[a]) continue;
                const int v = net.link_to(a);
                if (banned_node[v] || settled[v]) continue;
                const double nd = du + cost[a];
                if (nd < dist[v]) {
                    dist[v] = nd;
                    pred[v] = a;
                    heap.emplace(nd, v);
                }
            }
        }
        if (!settled[dst]) return std::nullopt;
        std::vector<int> links;
        for (int v = dst; v != src; v = net.link_from(pred[v])) links.push_back(pred[v]);
        std::reverse(links.begin(), links.end());
        return links;
    }
};

struct Candidate {
    double cost;
    std::vector<int> links;
};

bool same_cost(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

bool candidate_less(const Candidate& a, const Candidate& b) {
    if (!same_cost(a.cost, b.cost)) return a.cost < b.cost;
    return a.links < b.links;
}

double sum_cost(const std::vector<int>& links, const Vector& cost) {
    double s = 0.0;
    for (int a : links) s += cost[a];
    return s;
}

std::vector<std::vector<int>> yen_k_shortest(const Network& net, ShortestPathSolver& sp, int od, int k) {
    const int src = net.od_origin(od);
    const int dst = net.od_destination(od);
    std::vector<char> banned_link(net.num_links(), 0);
    std::vector<char> banned_node(net.num_nodes(), 0);

    auto first = sp.run(src, dst, banned_link, banned_node);
    if (!first) {
        const auto& p = net.od_pairs()[od];
        throw InputError("O-D pair " + p.origin + "->" + p.destination + " is disconnected");
    }
    std::vector<Candidate> accepted{{sum_cost(*first, sp.cost), *first}};
    std::vector<Candidate> pool;
    std::set<std::vector<int>> known{*first};

    while (static_cast<int>(accepted.size()) < k) {
        const std::vector<int> prev = accepted.back().links;
        int spur_node = src;
        for (std::size_t i = 0; i < prev.size(); ++i) {
            std::fill(banned_link.begin(), banned_link.end(), 0);
            std::fill(banned_node.begin(), banned_node.end(), 0);
            for (const Candidate& c : accepted) {
                if (c.links.size() > i && std::equal(prev.begin(), prev.begin() + i, c.links.begin()))
                    banned_link[c.links[i]] = 1;
            }
            int node = src;
            for (std::size_t j = 0; j < i; ++j) {
                banned_node[node] = 1;
                node = net.link_to(prev[j]);
            }
            if (auto spur = sp.run(spur_node, dst, banned_link, banned_node)) {
                std::vector<int> total(prev.begin(), prev.begin() + i);
                total.insert(total.end(), spur->begin(), spur->end());
                if (known.insert(total).second) pool.push_back({sum_cost(total, sp.cost), std::move(total)});
            }
            spur_node = net.link_to(prev[i]);
        }
        if (pool.empty()) break;
        auto best = std::min_element(pool.begin(), pool.end(), candidate_less);
        accepted.push_back(std::move(*best));
        pool.erase(best);
    }
    std::stable_sort(accepted.begin(), accepted.end(), candidate_less);
    std::vector<std::vector<int>> out;
    out.reserve(accepted.size());
    for (auto& c : accepted) out.push_back(std::move(c.links));
    return out;
}

} // namespace

PathSet generate_paths(const Network& net, int k, const Vector& link_costs,
                       std::optional<ObservedLinks> observed) {
    if (k < 1) throw InputError("generate_paths: k must be >= 1");
    if (link_costs.size() != net.num_links()) throw InputError("generate_paths: cost vector size mismatch");
    if ((link_costs.array() <= 0.0).any()) throw InputError("generate_paths: link costs must be positive");
    ShortestPathSolver sp(net, link_costs);
    GroupedPaths grouped(net.num_ods());
    for (int od = 0; od < net.num_ods(); ++od) grouped[od] = yen_k_shortest(net, sp, od, k);
    return build_incidence(net, grouped, std::move(observed));
}

Vector path_costs(const PathSet& ps, const Vector& link_costs) {
    return ps.delta.transpose() * link_costs;
}

Network read_network_csv(const std::filesystem::path& links_file, const std::filesystem::path& od_file) {
    std::vector<Link> links;
    const auto rows = csv::read_rows(links_file);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (i == 0 && !r.empty() && r[0] == "link_id") continue;
        const std::string ctx = links_file.string() + " row " + std::to_string(i + 1);
        if (r.size() != 7) throw InputError(ctx + ": expected 7 fields (link_id,from_node,to_node,free_flow_time,capacity,alpha,beta)");
        Link l;
        l.id = r[0];
        l.from = r[1];
        l.to = r[2];
        l.free_flow_time = csv::to_double(r[3], ctx + " free_flow_time");
        l.capacity = csv::to_double(r[4], ctx + " capacity");
        l.alpha = csv::to_double(r[5], ctx + " alpha");
        l.beta = csv::to_double(r[6], ctx + " beta");
        links.push_back(std::move(l));
    }
    std::vector<OdPair> ods;
    const auto od_rows = csv::read_rows(od_file);
    for (std::size_t i = 0; i < od_rows.size(); ++i) {
        const auto& r = od_rows[i];
        if (i == 0 && !r.empty() && r[0] == "origin") continue;
        if (r.size() != 2)
            throw InputError(od_file.string() + " row " + std::to_string(i + 1) + ": expected origin,destination");
        ods.push_back({r[0], r[1]});
    }
    if (links.empty()) throw InputError(links_file.string() + ": no links");
    if (ods.empty()) throw InputError(od_file.string() + ": no O-D pairs");
    return Network(std::move(links), std::move(ods));
}

ObservedLinks read_observed_links(const std::filesystem::path& file, const Network& net) {
    ObservedLinks obs;
    const auto rows = csv::read_rows(file);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 && rows[i][0] == "link_id") continue;
        obs.indices.push_back(net.link_index(rows[i][0]));
    }
    obs.validate(net.num_links());
    return obs;
}

} // namespace pode
