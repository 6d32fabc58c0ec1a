#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace swarmnas {

enum class LayerKind : std::uint8_t {
    Input,
    Conv2D,
    Pooling,
    BatchNorm,
    Dropout,
    Flatten,
    Dense,
    Output,
};

inline constexpr std::array<LayerKind, 8> kAllLayerKinds = {
    LayerKind::Input,   LayerKind::Conv2D,  LayerKind::Pooling, LayerKind::BatchNorm,
    LayerKind::Dropout, LayerKind::Flatten, LayerKind::Dense,   LayerKind::Output,
};

std::string_view to_string(LayerKind kind);
/// Throws std::invalid_argument on unknown names.
LayerKind layer_kind_from_string(std::string_view name);

/// A discrete attribute option: integer, real, or symbolic token.
using AttributeValue = std::variant<std::int64_t, double, std::string>;

/// Shortest round-trip text form; tokens are printed verbatim.
std::string format_value(const AttributeValue& value);

struct AttributeSpec {
    std::string name;
    std::vector<AttributeValue> options;

    /// Index of `value` in options, or nullopt.
    std::optional<std::size_t> index_of(const AttributeValue& value) const;
};

/// Where a layer may be placed relative to the (single) Flatten layer.
enum class Placement : std::uint8_t { BeforeFlatten, AfterFlatten, Either };

struct NodeTemplate {
    LayerKind kind = LayerKind::Input;
    std::vector<AttributeSpec> attributes;
    /// Ordered; the order is the candidate order seen by ants.
    std::vector<LayerKind> allowed_successors;
    Placement placement = Placement::Either;
};

struct InputShape {
    std::int64_t height = 28;
    std::int64_t width = 28;
    std::int64_t channels = 1;

    friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct Layer {
    LayerKind kind = LayerKind::Input;
    std::map<std::string, AttributeValue> attribute_values;

    friend bool operator==(const Layer&, const Layer&) = default;
};

struct ArchitectureDescriptor {
    InputShape input_shape;
    std::vector<Layer> layers;

    friend bool operator==(const ArchitectureDescriptor&, const ArchitectureDescriptor&) = default;
};

enum class RuleId : std::uint8_t {
    Empty,
    InputNotFirst,
    DuplicateInput,
    OutputNotLast,
    MissingOutput,
    DuplicateFlatten,
    DenseBeforeFlatten,
    IllegalTransition,
    UnknownAttribute,
    MissingAttribute,
    InvalidAttributeValue,
    InvalidInputShape,
    UnknownKind,
};

std::string_view to_string(RuleId rule);

/// First violated rule of a descriptor; `position` is the layer index.
struct Rejection {
    std::size_t position = 0;
    RuleId rule = RuleId::Empty;
    std::string detail;
};

struct Verdict {
    std::optional<Rejection> rejection;

    bool valid() const { return !rejection.has_value(); }
    explicit operator bool() const { return valid(); }
};

/// Immutable catalog of layer templates and their legal transitions.
class SearchSpace {
public:
    /// Throws std::invalid_argument if the catalog is malformed (duplicate
    /// options, bad tokens, Output unreachable, missing Input/Output).
    explicit SearchSpace(std::vector<NodeTemplate> templates);

    const NodeTemplate& node_template(LayerKind kind) const;
    bool contains(LayerKind kind) const;
    const std::vector<NodeTemplate>& templates() const { return templates_; }

    const std::vector<LayerKind>& allowed_successors(LayerKind kind) const;

    /// Successors of `kind` that may be placed next, given whether a Flatten
    /// has already occurred on the path (including `kind` itself).
    std::vector<LayerKind> successors(LayerKind kind, bool flattened) const;

    /// Same as successors() but without Output, which ants never select.
    std::vector<LayerKind> selectable_successors(LayerKind kind, bool flattened) const;

    bool placeable(LayerKind kind, bool flattened) const;

private:
    std::vector<NodeTemplate> templates_;
    std::array<std::optional<std::size_t>, kAllLayerKinds.size()> index_{};
};

/// The default CNN catalog: Conv2D, Pooling, BatchNorm, Dropout, Flatten, Dense.
const SearchSpace& default_space();

Verdict validate(const ArchitectureDescriptor& d, const SearchSpace& space);

/// Layer entry as text, attribute names sorted, e.g. "Conv2D(filter_count=32,kernel_size=3)".
std::string canonical_layer(const Layer& layer, const InputShape& shape);

/// Canonical text of the first `length` layers (no validation; prefixes of
/// valid descriptors are generally not valid themselves).
std::string canonical_prefix(const ArchitectureDescriptor& d, std::size_t length);

/// Canonical text of a full descriptor. Throws std::invalid_argument if the
/// descriptor is not valid in `space`.
std::string canonical_string(const ArchitectureDescriptor& d,
                             const SearchSpace& space = default_space());

/// Number of layers after Input and before Output.
std::size_t body_length(const ArchitectureDescriptor& d);

}  // namespace swarmnas
