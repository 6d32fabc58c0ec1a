#include "swarmnas/search_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>
#include <utility>

namespace swarmnas {

namespace {

constexpr std::array<std::string_view, kAllLayerKinds.size()> kKindNames = {
    "Input", "Conv2D", "Pooling", "BatchNorm", "Dropout", "Flatten", "Dense", "Output",
};

std::size_t slot(LayerKind kind) { return static_cast<std::size_t>(kind); }

bool valid_token(std::string_view token) {
    if (token.empty()) return false;
    const auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
    const auto digit = [](char c) { return c >= '0' && c <= '9'; };
    if (!alpha(token.front())) return false;
    return std::all_of(token.begin(), token.end(),
                       [&](char c) { return alpha(c) || digit(c) || c == '_'; });
}

bool state_after(LayerKind kind, bool flattened) { return flattened || kind == LayerKind::Flatten; }

}  // namespace

std::string_view to_string(LayerKind kind) { return kKindNames.at(slot(kind)); }

LayerKind layer_kind_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == name) return kAllLayerKinds[i];
    }
    throw std::invalid_argument("unknown layer kind '" + std::string(name) + "'");
}

std::string format_value(const AttributeValue& value) {
    if (const auto* i = std::get_if<std::int64_t>(&value)) return std::to_string(*i);
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), std::get<double>(value));
    if (ec != std::errc{}) throw std::runtime_error("cannot format attribute value");
    return std::string(buf.data(), end);
}

std::optional<std::size_t> AttributeSpec::index_of(const AttributeValue& value) const {
    const auto it = std::find(options.begin(), options.end(), value);
    if (it == options.end()) return std::nullopt;
    return static_cast<std::size_t>(it - options.begin());
}

std::string_view to_string(RuleId rule) {
    switch (rule) {
        case RuleId::Empty: return "empty";
        case RuleId::InputNotFirst: return "input_not_first";
        case RuleId::DuplicateInput: return "duplicate_input";
        case RuleId::OutputNotLast: return "output_not_last";
        case RuleId::MissingOutput: return "missing_output";
        case RuleId::DuplicateFlatten: return "duplicate_flatten";
        case RuleId::DenseBeforeFlatten: return "dense_before_flatten";
        case RuleId::IllegalTransition: return "illegal_transition";
        case RuleId::UnknownAttribute: return "unknown_attribute";
        case RuleId::MissingAttribute: return "missing_attribute";
        case RuleId::InvalidAttributeValue: return "invalid_attribute_value";
        case RuleId::InvalidInputShape: return "invalid_input_shape";
        case RuleId::UnknownKind: return "unknown_kind";
    }
    return "unknown";
}

SearchSpace::SearchSpace(std::vector<NodeTemplate> templates) : templates_(std::move(templates)) {
    for (std::size_t i = 0; i < templates_.size(); ++i) {
        auto& entry = index_[slot(templates_[i].kind)];
        if (entry) throw std::invalid_argument("duplicate template for " + std::string(to_string(templates_[i].kind)));
        entry = i;
    }
    if (!contains(LayerKind::Input) || !contains(LayerKind::Output)) {
        throw std::invalid_argument("search space needs Input and Output templates");
    }
    if (contains(LayerKind::Flatten) &&
        node_template(LayerKind::Flatten).placement != Placement::BeforeFlatten) {
        throw std::invalid_argument("Flatten must be placed before flattening");
    }

    for (const auto& t : templates_) {
        std::set<std::string> names;
        for (const auto& spec : t.attributes) {
            if (!valid_token(spec.name)) throw std::invalid_argument("bad attribute name '" + spec.name + "'");
            if (!names.insert(spec.name).second) throw std::invalid_argument("duplicate attribute " + spec.name);
            if (spec.options.empty()) throw std::invalid_argument("attribute " + spec.name + " has no options");
            std::set<std::string> rendered;
            for (const auto& option : spec.options) {
                if (const auto* s = std::get_if<std::string>(&option); s && !valid_token(*s)) {
                    throw std::invalid_argument("bad token '" + *s + "' in " + spec.name);
                }
                if (const auto* d = std::get_if<double>(&option); d && !std::isfinite(*d)) {
                    throw std::invalid_argument("non-finite option in " + spec.name);
                }
                // Distinct text forms keep canonical strings injective.
                if (!rendered.insert(format_value(option)).second) {
                    throw std::invalid_argument("duplicate option in " + spec.name);
                }
            }
        }
        for (LayerKind succ : t.allowed_successors) {
            if (!contains(succ)) throw std::invalid_argument("successor without template: " + std::string(to_string(succ)));
            if (succ == LayerKind::Input) throw std::invalid_argument("Input cannot be a successor");
        }
        if (t.kind == LayerKind::Output && !t.allowed_successors.empty()) {
            throw std::invalid_argument("Output must be terminal");
        }
        if (t.kind != LayerKind::Output && t.allowed_successors.empty()) {
            throw std::invalid_argument(std::string(to_string(t.kind)) + " has no successors");
        }
    }

    // Every reachable (kind, flattened) state must be able to reach Output.
    using State = std::pair<LayerKind, bool>;
    std::set<State> seen{{LayerKind::Input, false}};
    std::deque<State> frontier{{LayerKind::Input, false}};
    while (!frontier.empty()) {
        const auto [kind, flat] = frontier.front();
        frontier.pop_front();
        for (LayerKind next : successors(kind, flat)) {
            const State s{next, state_after(next, flat)};
            if (seen.insert(s).second) frontier.push_back(s);
        }
    }
    for (const auto& [kind, flat] : seen) {
        if (kind == LayerKind::Output) continue;
        std::set<State> visited{{kind, flat}};
        std::deque<State> queue{{kind, flat}};
        bool reached = false;
        while (!queue.empty() && !reached) {
            const auto [k, f] = queue.front();
            queue.pop_front();
            for (LayerKind next : successors(k, f)) {
                if (next == LayerKind::Output) {
                    reached = true;
                    break;
                }
                const State s{next, state_after(next, f)};
                if (visited.insert(s).second) queue.push_back(s);
            }
        }
        if (!reached) throw std::invalid_argument("Output unreachable from " + std::string(to_string(kind)));
    }
}

bool SearchSpace::contains(LayerKind kind) const { return index_[slot(kind)].has_value(); }

const NodeTemplate& SearchSpace::node_template(LayerKind kind) const {
    const auto& entry = index_[slot(kind)];
    if (!entry) throw std::invalid_argument("no template for " + std::string(to_string(kind)));
    return templates_[*entry];
}

const std::vector<LayerKind>& SearchSpace::allowed_successors(LayerKind kind) const {
    return node_template(kind).allowed_successors;
}

bool SearchSpace::placeable(LayerKind kind, bool flattened) const {
    if (kind == LayerKind::Input || !contains(kind)) return false;
    switch (node_template(kind).placement) {
        case Placement::BeforeFlatten: return !flattened;
        case Placement::AfterFlatten: return flattened;
        case Placement::Either: return true;
    }
    return false;
}

std::vector<LayerKind> SearchSpace::successors(LayerKind kind, bool flattened) const {
    std::vector<LayerKind> out;
    for (LayerKind next : allowed_successors(kind)) {
        if (placeable(next, flattened)) out.push_back(next);
    }
    return out;
}

std::vector<LayerKind> SearchSpace::selectable_successors(LayerKind kind, bool flattened) const {
    auto out = successors(kind, flattened);
    std::erase(out, LayerKind::Output);
    return out;
}

const SearchSpace& default_space() {
    static const SearchSpace space = [] {
        using K = LayerKind;
        const std::vector<K> feature = {K::Conv2D, K::Pooling, K::BatchNorm, K::Dropout, K::Flatten};
        const std::vector<K> head = {K::Dense, K::Dropout, K::Output};
        auto ints = [](std::initializer_list<std::int64_t> xs) {
            std::vector<AttributeValue> out;
            for (auto x : xs) out.emplace_back(x);
            return out;
        };
        std::vector<NodeTemplate> t;
        t.push_back({K::Input, {}, feature, Placement::BeforeFlatten});
        t.push_back({K::Conv2D,
                     {{"filter_count", ints({16, 32, 64})}, {"kernel_size", ints({1, 3, 5})}},
                     feature,
                     Placement::BeforeFlatten});
        t.push_back({K::Pooling,
                     {{"pool_type", {std::string("max"), std::string("average")}},
                      {"pool_size", ints({2})},
                      {"stride", ints({2})}},
                     feature,
                     Placement::BeforeFlatten});
        t.push_back({K::BatchNorm, {}, feature, Placement::BeforeFlatten});
        // Ordered so both flatten states filter down to the Input/Flatten orders.
        t.push_back({K::Dropout,
                     {{"rate", {0.1, 0.3, 0.5}}},
                     {K::Conv2D, K::Pooling, K::BatchNorm, K::Dense, K::Dropout, K::Flatten, K::Output},
                     Placement::Either});
        t.push_back({K::Flatten, {}, head, Placement::BeforeFlatten});
        t.push_back({K::Dense, {{"output_size", ints({64, 128})}}, head, Placement::AfterFlatten});
        t.push_back({K::Output, {}, {}, Placement::AfterFlatten});
        return SearchSpace(std::move(t));
    }();
    return space;
}

Verdict validate(const ArchitectureDescriptor& d, const SearchSpace& space) {
    auto reject = [](std::size_t pos, RuleId rule, std::string detail) {
        return Verdict{Rejection{pos, rule, std::move(detail)}};
    };
    const auto& layers = d.layers;
    if (layers.empty()) return reject(0, RuleId::Empty, "descriptor has no layers");
    const auto& shape = d.input_shape;
    if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
        return reject(0, RuleId::InvalidInputShape, "input shape must be positive");
    }

    bool flattened = false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerKind kind = layers[i].kind;
        const std::string name(to_string(kind));
        if (!space.contains(kind)) return reject(i, RuleId::UnknownKind, name + " not in search space");
        if (i == 0) {
            if (kind != LayerKind::Input) return reject(0, RuleId::InputNotFirst, "first layer is " + name);
        } else {
            if (kind == LayerKind::Input) return reject(i, RuleId::DuplicateInput, "Input repeated");
            if (kind == LayerKind::Flatten && flattened) return reject(i, RuleId::DuplicateFlatten, "second Flatten");
            if (kind == LayerKind::Dense && !flattened) {
                return reject(i, RuleId::DenseBeforeFlatten, "Dense requires a prior Flatten");
            }
        }
        if (kind == LayerKind::Output && i + 1 != layers.size()) {
            return reject(i, RuleId::OutputNotLast, "Output must be the last layer");
        }
        if (i > 0) {
            const auto allowed = space.successors(layers[i - 1].kind, flattened);
            if (std::find(allowed.begin(), allowed.end(), kind) == allowed.end()) {
                return reject(i, RuleId::IllegalTransition,
                              std::string(to_string(layers[i - 1].kind)) + " -> " + name + " not allowed");
            }
        }

        const auto& specs = space.node_template(kind).attributes;
        for (const auto& [key, value] : layers[i].attribute_values) {
            const auto spec = std::find_if(specs.begin(), specs.end(), [&](const AttributeSpec& s) { return s.name == key; });
            if (spec == specs.end()) return reject(i, RuleId::UnknownAttribute, name + " has no attribute " + key);
            if (!spec->index_of(value)) {
                return reject(i, RuleId::InvalidAttributeValue, key + "=" + format_value(value) + " not an option");
            }
        }
        for (const auto& spec : specs) {
            if (!layers[i].attribute_values.contains(spec.name)) {
                return reject(i, RuleId::MissingAttribute, name + " missing " + spec.name);
            }
        }
        flattened = state_after(kind, flattened);
    }
    if (layers.back().kind != LayerKind::Output) {
        return reject(layers.size() - 1, RuleId::MissingOutput, "last layer is not Output");
    }
    return Verdict{};
}

std::string canonical_layer(const Layer& layer, const InputShape& shape) {
    std::string out(to_string(layer.kind));
    if (layer.kind == LayerKind::Input) {
        out += "(" + std::to_string(shape.height) + "," + std::to_string(shape.width) + "," +
               std::to_string(shape.channels) + ")";
        return out;
    }
    if (layer.attribute_values.empty()) return out;
    // std::map iterates keys in lexicographic order.
    out += '(';
    bool first = true;
    for (const auto& [key, value] : layer.attribute_values) {
        if (!first) out += ',';
        first = false;
        out += key;
        out += '=';
        out += format_value(value);
    }
    out += ')';
    return out;
}

std::string canonical_prefix(const ArchitectureDescriptor& d, std::size_t length) {
    length = std::min(length, d.layers.size());
    std::string out;
    for (std::size_t i = 0; i < length; ++i) {
        if (i > 0) out += '|';
        out += canonical_layer(d.layers[i], d.input_shape);
    }
    return out;
}

std::string canonical_string(const ArchitectureDescriptor& d, const SearchSpace& space) {
    if (const auto verdict = validate(d, space); !verdict) {
        const auto& r = *verdict.rejection;
        throw std::invalid_argument("invalid descriptor at layer " + std::to_string(r.position) + " (" +
                                    std::string(to_string(r.rule)) + "): " + r.detail);
    }
    return canonical_prefix(d, d.layers.size());
}

std::size_t body_length(const ArchitectureDescriptor& d) {
    std::size_t n = 0;
    for (const auto& layer : d.layers) {
        if (layer.kind != LayerKind::Input && layer.kind != LayerKind::Output) ++n;
    }
    return n;
}

}  // namespace swarmnas
