#pragma once

#include "pode/linalg.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pode {

/// A directed road link with a BPR volume-delay function.
struct Link {
    std::string id;
    std::string from;
    std::string to;
    double free_flow_time = 1.0;
    double capacity = 1.0;
    double alpha = 0.15;
    double beta = 4.0;
};

struct OdPair {
    std::string origin;
    std::string destination;
};

/// Travel time t0 * (1 + alpha * (flow / cap)^beta). Throws std::domain_error
/// for negative flow.
double bpr_cost(const Link& link, double flow);

/// d/dflow of bpr_cost.
double bpr_derivative(const Link& link, double flow);

/// Directed graph plus the ordered O-D pairs of interest. Link order defines
/// the row order of every link-indexed matrix; node order is first appearance.
class Network {
public:
    Network() = default;
    Network(std::vector<Link> links, std::vector<OdPair> od_pairs);

    const std::vector<Link>& links() const { return links_; }
    const std::vector<OdPair>& od_pairs() const { return od_pairs_; }
    const std::vector<std::string>& nodes() const { return nodes_; }

    int num_links() const { return static_cast<int>(links_.size()); }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int num_ods() const { return static_cast<int>(od_pairs_.size()); }

    int node_index(const std::string& id) const;
    int link_index(const std::string& id) const;
    int link_from(int link) const { return link_from_[link]; }
    int link_to(int link) const { return link_to_[link]; }
    int od_origin(int od) const { return od_origin_[od]; }
    int od_destination(int od) const { return od_destination_[od]; }
    const std::vector<int>& out_links(int node) const { return out_links_[node]; }

    Vector free_flow_times() const;
    /// BPR travel time of every link at the given link flows.
    Vector link_costs(const Vector& flows) const;
    Vector link_cost_derivatives(const Vector& flows) const;

private:
    std::vector<Link> links_;
    std::vector<OdPair> od_pairs_;
    std::vector<std::string> nodes_;
    std::unordered_map<std::string, int> node_lookup_;
    std::unordered_map<std::string, int> link_lookup_;
    std::vector<int> link_from_, link_to_;
    std::vector<int> od_origin_, od_destination_;
    std::vector<std::vector<int>> out_links_;
};

/// Ordered subset of link indices carrying counts.
struct ObservedLinks {
    std::vector<int> indices;

    static ObservedLinks all(int num_links);
    void validate(int num_links) const;
};

/// Fixed path set and the incidence structures built from it.
///   delta        |A| x |K|    link-path incidence
///   delta_obs    |A^o| x |K|  rows of delta for the observed links
///   od_incidence |K_q| x |K|  path-to-O-D incidence M
///   transition   |K| x |K_q|  O-D-to-path map B = M^T
struct PathSet {
    std::vector<std::vector<int>> paths;   // link indices, grouped O-D major
    std::vector<int> path_od;              // O-D index of each path
    std::vector<int> od_first_path;        // paths of O-D r are [first[r], first[r+1])
    ObservedLinks observed;
    SparseMatrix delta;
    SparseMatrix delta_obs;
    SparseMatrix od_incidence;
    SparseMatrix transition;

    int num_paths() const { return static_cast<int>(paths.size()); }
    int num_ods() const { return static_cast<int>(od_first_path.size()) - 1; }
    int num_links() const { return static_cast<int>(delta.rows()); }
    int num_observed() const { return static_cast<int>(observed.indices.size()); }
    int od_path_count(int od) const { return od_first_path[od + 1] - od_first_path[od]; }
};

using GroupedPaths = std::vector<std::vector<std::vector<int>>>;

/// Validates the grouped paths (one group per O-D, each a connected simple
/// link sequence from origin to destination) and assembles the incidences.
PathSet build_incidence(const Network& net, const GroupedPaths& paths,
                        std::optional<ObservedLinks> observed = std::nullopt);

/// Up to k loopless shortest paths per O-D pair under fixed link costs
/// (Yen's algorithm). Paths are ordered by cost, ties by link index sequence.
PathSet generate_paths(const Network& net, int k, const Vector& link_costs,
                       std::optional<ObservedLinks> observed = std::nullopt);

/// Sum of link costs along each path (Delta^T t).
Vector path_costs(const PathSet& ps, const Vector& link_costs);

// CSV readers. Header rows are optional.
Network read_network_csv(const std::filesystem::path& links_file,
                         const std::filesystem::path& od_file);
ObservedLinks read_observed_links(const std::filesystem::path& file, const Network& net);

} // namespace pode
