#include "swarmnas/pheromone_graph.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace swarmnas {

namespace {

using nlohmann::json;

void check_open_unit(double value, const char* name) {
    if (!(value > 0.0 && value < 1.0)) {
        throw std::invalid_argument(std::string(name) + " must be in (0, 1), got " + std::to_string(value));
    }
}

void check_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument(std::string(name) + " must be positive, got " + std::to_string(value));
    }
}

}  // namespace

double uniform_heuristic(const HeuristicKey&) { return 1.0; }

PheromoneGraph::PheromoneGraph(const SearchSpace& space, double tau0, HeuristicProvider heuristic)
    : space_(&space), tau0_(tau0), heuristic_(heuristic ? std::move(heuristic) : uniform_heuristic) {
    check_positive(tau0, "tau0");
    add_node(LayerKind::Input, 0);
}

double PheromoneGraph::heuristic_for(const HeuristicKey& key) const {
    const double eta = heuristic_(key);
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw std::invalid_argument("heuristic provider returned a non-positive value");
    }
    return eta;
}

NodeId PheromoneGraph::add_node(LayerKind kind, std::size_t depth) {
    GraphNode node;
    node.kind = kind;
    node.depth = depth;
    for (const auto& spec : space_->node_template(kind).attributes) {
        AttributeTable table;
        table.name = spec.name;
        table.pheromone.assign(spec.options.size(), tau0_);
        for (std::size_t i = 0; i < spec.options.size(); ++i) {
            table.heuristic.push_back(heuristic_for({kind, kind, spec.name, i}));
        }
        node.attributes.push_back(std::move(table));
    }
    const NodeId id = nodes_.size();
    nodes_.push_back(std::move(node));
    by_position_.emplace(std::pair{depth, kind}, id);
    return id;
}

std::optional<NodeId> PheromoneGraph::find_node(LayerKind kind, std::size_t depth) const {
    const auto it = by_position_.find({depth, kind});
    if (it == by_position_.end()) return std::nullopt;
    return it->second;
}

std::optional<EdgeId> PheromoneGraph::find_edge(NodeId from, NodeId to) const {
    const auto it = by_endpoints_.find({from, to});
    if (it == by_endpoints_.end()) return std::nullopt;
    return it->second;
}

std::vector<Neighbour> PheromoneGraph::expand_neighbours(NodeId from, bool flattened) {
    const GraphNode& origin = nodes_.at(from);
    if (origin.depth >= current_max_depth_) {
        throw std::out_of_range("node at depth " + std::to_string(origin.depth) +
                                " cannot expand past max depth " + std::to_string(current_max_depth_));
    }
    const LayerKind from_kind = origin.kind;
    const std::size_t depth = origin.depth + 1;

    std::vector<Neighbour> out;
    for (LayerKind kind : space_->selectable_successors(from_kind, flattened)) {
        NodeId target = 0;
        if (auto existing = find_node(kind, depth)) {
            target = *existing;
        } else {
            target = add_node(kind, depth);
        }
        EdgeId edge = 0;
        if (auto existing = find_edge(from, target)) {
            edge = *existing;
        } else {
            edge = edges_.size();
            edges_.push_back({from, target, tau0_, heuristic_for({from_kind, kind, {}, std::nullopt})});
            nodes_[from].out_edges.push_back(edge);
            by_endpoints_.emplace(std::pair{from, target}, edge);
        }
        out.push_back({edge, target});
    }
    return out;
}

void PheromoneGraph::check_tour(const Tour& tour) const {
    if (tour.nodes.empty() || tour.nodes.front() != input_node()) {
        throw std::invalid_argument("tour must start at the input node");
    }
    if (tour.edges.size() + 1 != tour.nodes.size() || tour.choices.size() != tour.nodes.size()) {
        throw std::invalid_argument("tour nodes, edges and choices disagree in length");
    }
    for (std::size_t i = 0; i < tour.edges.size(); ++i) {
        if (tour.edges[i] >= edges_.size()) throw std::invalid_argument("tour edge not in graph");
        const auto& e = edges_[tour.edges[i]];
        if (e.from != tour.nodes[i] || e.to != tour.nodes[i + 1]) {
            throw std::invalid_argument("tour edge does not join its nodes");
        }
    }
    for (std::size_t i = 0; i < tour.nodes.size(); ++i) {
        if (tour.nodes[i] >= nodes_.size()) throw std::invalid_argument("tour node not in graph");
        const auto& tables = nodes_[tour.nodes[i]].attributes;
        if (tour.choices[i].size() != tables.size()) {
            throw std::invalid_argument("tour attribute choices do not match node");
        }
        for (std::size_t a = 0; a < tables.size(); ++a) {
            if (tour.choices[i][a] >= tables[a].pheromone.size()) {
                throw std::invalid_argument("tour attribute choice out of range");
            }
        }
    }
}

void PheromoneGraph::local_update(const Tour& tour, double rho, double tau0) {
    check_open_unit(rho, "rho");
    check_positive(tau0, "tau0");
    check_tour(tour);
    const auto decay = [&](double& tau) { tau = (1.0 - rho) * tau + rho * tau0; };
    for (EdgeId e : tour.edges) decay(edges_[e].pheromone);
    for (std::size_t i = 0; i < tour.nodes.size(); ++i) {
        auto& tables = nodes_[tour.nodes[i]].attributes;
        for (std::size_t a = 0; a < tables.size(); ++a) decay(tables[a].pheromone[tour.choices[i][a]]);
    }
}

void PheromoneGraph::global_update(const Tour& best, double alpha) {
    check_open_unit(alpha, "alpha");
    check_tour(best);
    if (!best.evaluated()) throw std::invalid_argument("global update needs an evaluated tour");
    const double cost = best.score();
    if (!(cost >= 0.0 && cost <= 1.0)) throw std::invalid_argument("best tour accuracy outside [0, 1]");

    const std::set<EdgeId> on_edges(best.edges.begin(), best.edges.end());
    std::set<std::tuple<NodeId, std::size_t, std::size_t>> on_options;
    for (std::size_t i = 0; i < best.nodes.size(); ++i) {
        for (std::size_t a = 0; a < best.choices[i].size(); ++a) {
            on_options.emplace(best.nodes[i], a, best.choices[i][a]);
        }
    }

    const auto update = [&](double& tau, bool on_tour) {
        tau = (1.0 - alpha) * tau + (on_tour ? alpha * cost : 0.0);
    };
    for (EdgeId e = 0; e < edges_.size(); ++e) update(edges_[e].pheromone, on_edges.contains(e));
    for (NodeId n = 0; n < nodes_.size(); ++n) {
        auto& tables = nodes_[n].attributes;
        for (std::size_t a = 0; a < tables.size(); ++a) {
            for (std::size_t o = 0; o < tables[a].pheromone.size(); ++o) {
                update(tables[a].pheromone[o], on_options.contains({n, a, o}));
            }
        }
    }
}

void PheromoneGraph::set_edge_pheromone(EdgeId id, double tau) {
    check_positive(tau, "pheromone");
    edges_.at(id).pheromone = tau;
}

void PheromoneGraph::set_option_pheromone(NodeId id, std::size_t attribute, std::size_t option, double tau) {
    check_positive(tau, "pheromone");
    nodes_.at(id).attributes.at(attribute).pheromone.at(option) = tau;
}

double PheromoneGraph::total_pheromone() const {
    double sum = 0.0;
    for (const auto& e : edges_) sum += e.pheromone;
    for (const auto& n : nodes_) {
        for (const auto& t : n.attributes) {
            for (double tau : t.pheromone) sum += tau;
        }
    }
    return sum;
}

json PheromoneGraph::to_json() const {
    json nodes = json::array();
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        const auto& n = nodes_[id];
        json attrs = json::array();
        for (const auto& t : n.attributes) {
            attrs.push_back({{"name", t.name}, {"pheromone", t.pheromone}, {"heuristic", t.heuristic}});
        }
        nodes.push_back({{"id", id}, {"kind", std::string(to_string(n.kind))}, {"depth", n.depth}, {"attributes", attrs}});
    }
    json edges = json::array();
    for (const auto& e : edges_) {
        edges.push_back({{"from", e.from}, {"to", e.to}, {"pheromone", e.pheromone}, {"heuristic", e.heuristic}});
    }
    return {{"tau0", tau0_},
            {"current_max_depth", current_max_depth_},
            {"input_node", input_node()},
            {"nodes", std::move(nodes)},
            {"edges", std::move(edges)}};
}

PheromoneGraph PheromoneGraph::from_json(const json& j, const SearchSpace& space, HeuristicProvider heuristic) {
    PheromoneGraph g(space, j.at("tau0").get<double>(), std::move(heuristic));
    g.nodes_.clear();
    g.by_position_.clear();
    g.current_max_depth_ = j.at("current_max_depth").get<std::size_t>();
    if (g.current_max_depth_ < 1) throw std::invalid_argument("current_max_depth must be >= 1");

    for (const auto& jn : j.at("nodes")) {
        if (jn.at("id").get<std::size_t>() != g.nodes_.size()) throw std::invalid_argument("node ids must be dense");
        GraphNode node;
        node.kind = layer_kind_from_string(jn.at("kind").get<std::string>());
        node.depth = jn.at("depth").get<std::size_t>();
        const auto& specs = space.node_template(node.kind).attributes;
        const auto& jattrs = jn.at("attributes");
        if (jattrs.size() != specs.size()) throw std::invalid_argument("attribute tables do not match catalog");
        for (std::size_t a = 0; a < specs.size(); ++a) {
            AttributeTable t;
            t.name = jattrs[a].at("name").get<std::string>();
            t.pheromone = jattrs[a].at("pheromone").get<std::vector<double>>();
            t.heuristic = jattrs[a].at("heuristic").get<std::vector<double>>();
            if (t.name != specs[a].name || t.pheromone.size() != specs[a].options.size() ||
                t.heuristic.size() != specs[a].options.size()) {
                throw std::invalid_argument("attribute table does not match catalog");
            }
            for (double v : t.pheromone) check_positive(v, "pheromone");
            for (double v : t.heuristic) check_positive(v, "heuristic");
            node.attributes.push_back(std::move(t));
        }
        if (!g.by_position_.emplace(std::pair{node.depth, node.kind}, g.nodes_.size()).second) {
            throw std::invalid_argument("duplicate (kind, depth) node");
        }
        g.nodes_.push_back(std::move(node));
    }
    if (g.nodes_.empty() || g.nodes_.front().kind != LayerKind::Input || g.nodes_.front().depth != 0) {
        throw std::invalid_argument("node 0 must be the input node");
    }
    for (const auto& je : j.at("edges")) {
        PheromoneEdge e{je.at("from").get<NodeId>(), je.at("to").get<NodeId>(), je.at("pheromone").get<double>(),
                        je.at("heuristic").get<double>()};
        if (e.from >= g.nodes_.size() || e.to >= g.nodes_.size() ||
            g.nodes_[e.from].depth + 1 != g.nodes_[e.to].depth) {
            throw std::invalid_argument("edge endpoints invalid");
        }
        check_positive(e.pheromone, "pheromone");
        check_positive(e.heuristic, "heuristic");
        const EdgeId id = g.edges_.size();
        if (!g.by_endpoints_.emplace(std::pair{e.from, e.to}, id).second) throw std::invalid_argument("duplicate edge");
        g.nodes_[e.from].out_edges.push_back(id);
        g.edges_.push_back(e);
    }
    return g;
}

}  // namespace swarmnas
