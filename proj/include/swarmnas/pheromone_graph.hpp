#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmnas/search_space.hpp"
#include "swarmnas/tour.hpp"

namespace swarmnas {

struct AttributeTable {
    std::string name;
    std::vector<double> pheromone;  // one entry per option, catalog order
    std::vector<double> heuristic;
};

struct GraphNode {
    LayerKind kind = LayerKind::Input;
    std::size_t depth = 0;
    std::vector<AttributeTable> attributes;
    std::vector<EdgeId> out_edges;
};

struct PheromoneEdge {
    NodeId from = 0;
    NodeId to = 0;
    double pheromone = 0.0;
    double heuristic = 1.0;
};

/// Lookup key for expert heuristics. Edge lookups leave `attribute` empty and
/// `option` unset; attribute lookups use the node's kind for both ends.
struct HeuristicKey {
    LayerKind from = LayerKind::Input;
    LayerKind to = LayerKind::Input;
    std::string_view attribute;
    std::optional<std::size_t> option;
};

/// Must return a strictly positive value.
using HeuristicProvider = std::function<double(const HeuristicKey&)>;

double uniform_heuristic(const HeuristicKey&);

struct Neighbour {
    EdgeId edge = 0;
    NodeId node = 0;
};

/// Layered pheromone graph that grows one depth level per search round.
/// At most one node exists per (kind, depth); nothing is ever removed.
class PheromoneGraph {
public:
    /// Throws std::invalid_argument if tau0 <= 0. `space` must outlive the graph.
    PheromoneGraph(const SearchSpace& space, double tau0, HeuristicProvider heuristic = uniform_heuristic);

    const SearchSpace& space() const { return *space_; }
    double tau0() const { return tau0_; }
    NodeId input_node() const { return 0; }
    std::size_t current_max_depth() const { return current_max_depth_; }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const GraphNode& node(NodeId id) const { return nodes_.at(id); }
    const PheromoneEdge& edge(EdgeId id) const { return edges_.at(id); }
    std::span<const GraphNode> nodes() const { return nodes_; }
    std::span<const PheromoneEdge> edges() const { return edges_; }

    std::optional<NodeId> find_node(LayerKind kind, std::size_t depth) const;
    std::optional<EdgeId> find_edge(NodeId from, NodeId to) const;

    /// Ensures a node and edge exist for every kind selectable after `from`
    /// (given the walking ant's flatten state) and returns them in catalog
    /// order. Existing nodes and edges are reused untouched.
    /// Throws std::out_of_range if `from` sits at or beyond the current max depth.
    std::vector<Neighbour> expand_neighbours(NodeId from, bool flattened);

    void increase_depth() { ++current_max_depth_; }

    /// tau <- (1 - rho) * tau + rho * tau0 on every edge and chosen attribute
    /// option of `tour`, once each. Throws std::invalid_argument if rho is not
    /// in (0, 1), tau0 <= 0, or the tour does not belong to this graph.
    void local_update(const Tour& tour, double rho, double tau0);

    /// tau <- (1 - alpha) * tau everywhere, plus alpha * C on the best tour's
    /// edges and chosen options, where C is the tour's accuracy.
    void global_update(const Tour& best, double alpha);

    // Direct pheromone access, used by replay tooling and tests.
    void set_edge_pheromone(EdgeId id, double tau);
    void set_option_pheromone(NodeId id, std::size_t attribute, std::size_t option, double tau);

    double total_pheromone() const;

    nlohmann::json to_json() const;
    static PheromoneGraph from_json(const nlohmann::json& j, const SearchSpace& space,
                                    HeuristicProvider heuristic = uniform_heuristic);

private:
    NodeId add_node(LayerKind kind, std::size_t depth);
    void check_tour(const Tour& tour) const;
    double heuristic_for(const HeuristicKey& key) const;

    const SearchSpace* space_;
    double tau0_;
    HeuristicProvider heuristic_;
    std::size_t current_max_depth_ = 1;
    std::vector<GraphNode> nodes_;
    std::vector<PheromoneEdge> edges_;
    std::map<std::pair<std::size_t, LayerKind>, NodeId> by_position_;
    std::map<std::pair<NodeId, NodeId>, EdgeId> by_endpoints_;
};

}  // namespace swarmnas
