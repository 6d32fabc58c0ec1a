#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swarmnas/search_space.hpp"

namespace swarmnas {

using NodeId = std::size_t;
using EdgeId = std::size_t;

/// Opaque weight reference produced by an evaluator (a storage key for the
/// external trainer); the engine never interprets it.
using WeightHandle = std::string;

struct Metrics {
    double accuracy = 0.0;
    std::optional<double> loss;
    double wall_ms = 0.0;
    std::size_t reused_prefix_len = 0;
    std::optional<WeightHandle> stored_handle;
};

/// One ant's walk. `nodes[0]` is the input node and `edges[i]` joins
/// `nodes[i]` to `nodes[i + 1]`. `choices[i]` holds one option index per
/// attribute of `nodes[i]`, in catalog order. `descriptor` is the completed
/// architecture, which may carry layers appended by completion that have no
/// graph node.
struct Tour {
    std::vector<NodeId> nodes;
    std::vector<EdgeId> edges;
    std::vector<std::vector<std::size_t>> choices;
    ArchitectureDescriptor descriptor;

    std::optional<Metrics> metrics;
    std::optional<std::string> failure;

    std::uint64_t rng_trace = 0;  // draws consumed before the walk began
    std::size_t round = 0;
    std::size_t ant_index = 0;

    bool evaluated() const { return metrics.has_value(); }
    double score() const { return metrics ? metrics->accuracy : 0.0; }
    /// Number of layers the ant selected (excludes Input and completion).
    std::size_t walk_length() const { return edges.size(); }
};

}  // namespace swarmnas
