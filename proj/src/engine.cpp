#include "swarmnas/engine.hpp"

#include <chrono>
#include <stdexcept>
#include <string>

#include "swarmnas/completion.hpp"
#include "swarmnas/descriptor_json.hpp"

namespace swarmnas {

namespace {

using nlohmann::json;

}  // namespace

Tour generate_path(PheromoneGraph& graph, const SelectionParams& params, RandomSource& rng, const InputShape& shape) {
    Tour tour;
    tour.rng_trace = rng.draws();
    tour.nodes.push_back(graph.input_node());
    tour.choices.emplace_back();
    tour.descriptor.input_shape = shape;
    tour.descriptor.layers.push_back(Layer{LayerKind::Input, {}});

    const SearchSpace& space = graph.space();
    NodeId current = graph.input_node();
    bool flattened = false;
    std::vector<Candidate> candidates;
    for (std::size_t step = 0; step < graph.current_max_depth(); ++step) {
        const auto neighbours = graph.expand_neighbours(current, flattened);
        if (neighbours.empty()) break;

        candidates.clear();
        for (const auto& n : neighbours) {
            const auto& e = graph.edge(n.edge);
            candidates.push_back({e.pheromone, e.heuristic});
        }
        const auto& pick = neighbours[aco_select(candidates, params, rng)];
        current = pick.node;
        tour.edges.push_back(pick.edge);
        tour.nodes.push_back(current);

        const GraphNode& node = graph.node(current);
        const auto& specs = space.node_template(node.kind).attributes;
        Layer layer{node.kind, {}};
        std::vector<std::size_t> choice;
        for (std::size_t a = 0; a < node.attributes.size(); ++a) {
            const auto& table = node.attributes[a];
            candidates.clear();
            for (std::size_t o = 0; o < table.pheromone.size(); ++o) {
                candidates.push_back({table.pheromone[o], table.heuristic[o]});
            }
            const std::size_t option = aco_select(candidates, params, rng);
            choice.push_back(option);
            layer.attribute_values.emplace(specs[a].name, specs[a].options[option]);
        }
        tour.choices.push_back(std::move(choice));
        tour.descriptor.layers.push_back(std::move(layer));
        flattened = flattened || node.kind == LayerKind::Flatten;
    }
    return complete_path(std::move(tour), space);
}

std::size_t find_best(std::span<const Tour> tours) {
    if (tours.empty()) throw std::invalid_argument("find_best needs at least one tour");
    std::size_t best = 0;
    for (std::size_t i = 1; i < tours.size(); ++i) {
        if (tours[i].score() > tours[best].score()) best = i;
    }
    return best;
}

std::vector<Tour> generate_ants(PheromoneGraph& graph, const RunConfig& config, RandomSource& rng,
                                Evaluator& evaluator, WeightCache& cache, std::size_t round, const AntCallback& on_ant) {
    std::vector<Tour> ants;
    ants.reserve(config.ant_count);
    for (std::size_t i = 0; i < config.ant_count; ++i) {
        Tour tour = generate_path(graph, config.selection, rng, config.input_shape);
        tour.round = round;
        tour.ant_index = i;

        const ReuseHint hint = reuse_hint(cache, tour.descriptor);
        const auto start = std::chrono::steady_clock::now();
        Metrics metrics;
        try {
            metrics = evaluator.evaluate(tour.descriptor, hint);
            if (!(metrics.accuracy >= 0.0 && metrics.accuracy <= 1.0)) {
                tour.failure = "accuracy " + std::to_string(metrics.accuracy) + " outside [0, 1]";
            }
        } catch (const EvaluationError& e) {
            tour.failure = e.code() + ": " + e.what();
        } catch (const std::exception& e) {
            tour.failure = e.what();
        }
        const double elapsed =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (tour.failure) {
            metrics = Metrics{};
        } else {
            metrics.reused_prefix_len = std::min(metrics.reused_prefix_len, hint.prefix_len);
            cache.record(tour.descriptor, metrics.accuracy, metrics.stored_handle);
        }
        if (!(metrics.wall_ms > 0.0)) metrics.wall_ms = elapsed;
        tour.metrics = metrics;

        graph.local_update(tour, config.pheromone.rho, config.pheromone.tau0);
        if (on_ant) on_ant(tour);
        ants.push_back(std::move(tour));
    }
    return ants;
}

json tour_to_json(const Tour& tour) {
    json j = {{"nodes", tour.nodes},
              {"edges", tour.edges},
              {"choices", tour.choices},
              {"descriptor", descriptor_to_json(tour.descriptor)},
              {"rng_trace", tour.rng_trace},
              {"round", tour.round},
              {"ant_index", tour.ant_index}};
    j["failure"] = tour.failure ? json(*tour.failure) : json(nullptr);
    if (tour.metrics) {
        // wall time is left out so checkpoints of equal runs are byte-identical
        const auto& m = *tour.metrics;
        json jm = {{"accuracy", m.accuracy}, {"reused_prefix_len", m.reused_prefix_len}};
        jm["loss"] = m.loss ? json(*m.loss) : json(nullptr);
        jm["stored_handle"] = m.stored_handle ? json(*m.stored_handle) : json(nullptr);
        j["metrics"] = std::move(jm);
    } else {
        j["metrics"] = nullptr;
    }
    return j;
}

Tour tour_from_json(const json& j) {
    Tour t;
    t.nodes = j.at("nodes").get<std::vector<NodeId>>();
    t.edges = j.at("edges").get<std::vector<EdgeId>>();
    t.choices = j.at("choices").get<std::vector<std::vector<std::size_t>>>();
    t.descriptor = descriptor_from_json(j.at("descriptor"));
    t.rng_trace = j.at("rng_trace").get<std::uint64_t>();
    t.round = j.at("round").get<std::size_t>();
    t.ant_index = j.at("ant_index").get<std::size_t>();
    if (!j.at("failure").is_null()) t.failure = j.at("failure").get<std::string>();
    if (const auto& jm = j.at("metrics"); !jm.is_null()) {
        Metrics m;
        m.accuracy = jm.at("accuracy").get<double>();
        m.reused_prefix_len = jm.at("reused_prefix_len").get<std::size_t>();
        if (!jm.at("loss").is_null()) m.loss = jm.at("loss").get<double>();
        if (!jm.at("stored_handle").is_null()) m.stored_handle = jm.at("stored_handle").get<std::string>();
        t.metrics = m;
    }
    return t;
}

SearchEngine::SearchEngine(RunConfig config, Evaluator& evaluator, const SearchSpace& space,
                           HeuristicProvider heuristic)
    : config_((config.validate(), std::move(config))),
      evaluator_(&evaluator),
      graph_(space, config_.pheromone.tau0, std::move(heuristic)),
      rng_(config_.seed) {}

void SearchEngine::run_round() {
    if (finished()) return;
    auto ants = generate_ants(graph_, config_, rng_, *evaluator_, cache_, completed_rounds_ + 1, observer_.on_ant);
    evaluations_ += ants.size();
    const std::size_t best = find_best(ants);
    if (!incumbent_ || ants[best].score() > incumbent_->score()) incumbent_ = std::move(ants[best]);
    graph_.global_update(*incumbent_, config_.pheromone.alpha);
    graph_.increase_depth();
    ++completed_rounds_;
    best_by_round_.push_back(incumbent_->score());
    if (observer_.on_round_end) observer_.on_round_end(*this);
}

SearchResult SearchEngine::run() {
    while (!finished()) run_round();
    return result();
}

SearchResult SearchEngine::result() const {
    if (!incumbent_) throw std::logic_error("search has not run any round");
    return SearchResult{*incumbent_, graph_, completed_rounds_, evaluations_, best_by_round_};
}

json SearchEngine::checkpoint() const {
    return {{"schema_version", kCheckpointSchemaVersion},
            {"config", config_.to_json()},
            {"graph", graph_.to_json()},
            {"incumbent", incumbent_ ? tour_to_json(*incumbent_) : json(nullptr)},
            {"round", completed_rounds_},
            {"rng", {{"state", rng_.state()}, {"draws", rng_.draws()}}},
            {"evaluations", evaluations_},
            {"best_by_round", best_by_round_},
            {"weight_cache", cache_.to_json()}};
}

RunConfig SearchEngine::checkpoint_config(const json& checkpoint) {
    if (!checkpoint.is_object() || !checkpoint.contains("schema_version")) {
        throw std::invalid_argument("not a checkpoint: schema_version missing");
    }
    const auto& version = checkpoint.at("schema_version");
    if (!version.is_number_integer() || version.get<int>() != kCheckpointSchemaVersion) {
        throw std::invalid_argument("checkpoint schema_version " + version.dump() + " is not supported (expected " +
                                    std::to_string(kCheckpointSchemaVersion) +
                                    "); re-run the search from its config with this build, or resume it with the "
                                    "release that wrote the checkpoint");
    }
    return RunConfig::from_json(checkpoint.at("config"));
}

SearchEngine SearchEngine::resume(const json& checkpoint, Evaluator& evaluator, const SearchSpace& space,
                                  HeuristicProvider heuristic) {
    try {
        SearchEngine engine(checkpoint_config(checkpoint), evaluator, space, heuristic);
        engine.graph_ = PheromoneGraph::from_json(checkpoint.at("graph"), space, heuristic);
        engine.rng_.restore(checkpoint.at("rng").at("state").get<std::string>(),
                            checkpoint.at("rng").at("draws").get<std::uint64_t>());
        engine.cache_ = WeightCache::from_json(checkpoint.at("weight_cache"));
        engine.completed_rounds_ = checkpoint.at("round").get<std::size_t>();
        engine.evaluations_ = checkpoint.at("evaluations").get<std::size_t>();
        engine.best_by_round_ = checkpoint.at("best_by_round").get<std::vector<double>>();
        if (const auto& inc = checkpoint.at("incumbent"); !inc.is_null()) engine.incumbent_ = tour_from_json(inc);

        if (engine.completed_rounds_ > engine.config_.max_depth ||
            engine.best_by_round_.size() != engine.completed_rounds_ ||
            engine.incumbent_.has_value() != (engine.completed_rounds_ > 0) ||
            engine.graph_.current_max_depth() != engine.completed_rounds_ + 1) {
            throw std::invalid_argument("checkpoint state is inconsistent");
        }
        if (engine.incumbent_) {
            for (NodeId n : engine.incumbent_->nodes) {
                if (n >= engine.graph_.node_count()) throw std::invalid_argument("incumbent references missing node");
            }
            for (EdgeId e : engine.incumbent_->edges) {
                if (e >= engine.graph_.edge_count()) throw std::invalid_argument("incumbent references missing edge");
            }
        }
        return engine;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed checkpoint: ") + e.what());
    }
}

SearchResult search(const RunConfig& config, Evaluator& evaluator, const SearchSpace& space,
                    HeuristicProvider heuristic) {
    SearchEngine engine(config, evaluator, space, std::move(heuristic));
    return engine.run();
}

}  // namespace swarmnas
