#include "swarmnas/completion.hpp"

#include <deque>
#include <map>
#include <stdexcept>

namespace swarmnas {

Layer default_layer(LayerKind kind, const SearchSpace& space) {
    Layer layer{kind, {}};
    for (const auto& spec : space.node_template(kind).attributes) {
        layer.attribute_values.emplace(spec.name, spec.options.front());
    }
    return layer;
}

ArchitectureDescriptor complete_path(ArchitectureDescriptor partial, const SearchSpace& space) {
    auto& layers = partial.layers;
    if (layers.empty() || layers.front().kind != LayerKind::Input) {
        throw std::invalid_argument("partial path must start with Input");
    }
    if (layers.back().kind == LayerKind::Output) return partial;

    bool flattened = false;
    for (const auto& layer : layers) flattened = flattened || layer.kind == LayerKind::Flatten;

    // Breadth-first over (kind, flattened); successor order breaks ties.
    using State = std::pair<LayerKind, bool>;
    const State start{layers.back().kind, flattened};
    std::map<State, State> parent;
    std::deque<State> queue{start};
    parent.emplace(start, start);
    std::optional<State> goal;
    while (!queue.empty() && !goal) {
        const State s = queue.front();
        queue.pop_front();
        for (LayerKind next : space.successors(s.first, s.second)) {
            const State n{next, s.second || next == LayerKind::Flatten};
            if (parent.contains(n)) continue;
            parent.emplace(n, s);
            if (next == LayerKind::Output) {
                goal = n;
                break;
            }
            queue.push_back(n);
        }
    }
    if (!goal) throw std::invalid_argument("no legal completion for this prefix");

    std::vector<LayerKind> suffix;
    for (State s = *goal; s != start; s = parent.at(s)) suffix.push_back(s.first);
    for (auto it = suffix.rbegin(); it != suffix.rend(); ++it) layers.push_back(default_layer(*it, space));
    return partial;
}

Tour complete_path(Tour partial, const SearchSpace& space) {
    partial.descriptor = complete_path(std::move(partial.descriptor), space);
    return partial;
}

}  // namespace swarmnas
