#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmnas/config.hpp"
#include "swarmnas/evaluation.hpp"
#include "swarmnas/pheromone_graph.hpp"
#include "swarmnas/random.hpp"
#include "swarmnas/selection.hpp"
#include "swarmnas/tour.hpp"

namespace swarmnas {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Walks from the input node for up to current_max_depth steps. Each step
/// expands the current node, picks the next node with aco_select, then picks
/// each of its attributes in catalog order; the walk is then completed.
/// Draw order per step: node branch, node wheel (if exploring), then branch
/// and wheel per attribute.
Tour generate_path(PheromoneGraph& graph, const SelectionParams& params, RandomSource& rng,
                   const InputShape& shape = {});

/// Index of the highest-accuracy tour; earliest wins ties.
/// Throws std::invalid_argument on an empty list.
std::size_t find_best(std::span<const Tour> tours);

using AntCallback = std::function<void(const Tour&)>;

/// Generates `config.ant_count` ants one after another: walk, evaluate with a
/// reuse hint, record weights, local update. An evaluator error or an
/// out-of-range accuracy marks the tour failed with score 0.
std::vector<Tour> generate_ants(PheromoneGraph& graph, const RunConfig& config, RandomSource& rng,
                                Evaluator& evaluator, WeightCache& cache, std::size_t round = 0,
                                const AntCallback& on_ant = {});

nlohmann::json tour_to_json(const Tour& tour);
Tour tour_from_json(const nlohmann::json& j);

struct SearchResult {
    Tour best;
    PheromoneGraph graph;
    std::size_t rounds = 0;
    std::size_t evaluations = 0;
    std::vector<double> best_by_round;
};

class SearchEngine;

struct SearchObserver {
    AntCallback on_ant;
    std::function<void(const SearchEngine&)> on_round_end;
};

/// Progressive search: one round of ants per depth level, a global update
/// with the best tour seen so far, then one more level of depth, until
/// `max_depth` rounds have run. The evaluator must outlive the engine.
class SearchEngine {
public:
    SearchEngine(RunConfig config, Evaluator& evaluator, const SearchSpace& space = default_space(),
                 HeuristicProvider heuristic = uniform_heuristic);

    /// Restores a checkpoint written by checkpoint(). Throws
    /// std::invalid_argument on schema mismatch or malformed content.
    static SearchEngine resume(const nlohmann::json& checkpoint, Evaluator& evaluator,
                               const SearchSpace& space = default_space(),
                               HeuristicProvider heuristic = uniform_heuristic);

    /// Config stored in a checkpoint, after the schema check.
    static RunConfig checkpoint_config(const nlohmann::json& checkpoint);

    void set_observer(SearchObserver observer) { observer_ = std::move(observer); }

    bool finished() const { return completed_rounds_ >= config_.max_depth; }
    void run_round();
    SearchResult run();
    SearchResult result() const;

    nlohmann::json checkpoint() const;

    const RunConfig& config() const { return config_; }
    const PheromoneGraph& graph() const { return graph_; }
    const std::optional<Tour>& incumbent() const { return incumbent_; }
    const WeightCache& weight_cache() const { return cache_; }
    std::size_t completed_rounds() const { return completed_rounds_; }
    std::size_t evaluations() const { return evaluations_; }
    const std::vector<double>& best_by_round() const { return best_by_round_; }

private:
    RunConfig config_;
    Evaluator* evaluator_;
    PheromoneGraph graph_;
    RandomSource rng_;
    WeightCache cache_;
    std::optional<Tour> incumbent_;
    std::size_t completed_rounds_ = 0;
    std::size_t evaluations_ = 0;
    std::vector<double> best_by_round_;
    SearchObserver observer_;
};

SearchResult search(const RunConfig& config, Evaluator& evaluator, const SearchSpace& space = default_space(),
                    HeuristicProvider heuristic = uniform_heuristic);

}  // namespace swarmnas
