#pragma once

#include "swarmnas/search_space.hpp"
#include "swarmnas/tour.hpp"

namespace swarmnas {

/// A layer of `kind` with every attribute at its first catalog option.
Layer default_layer(LayerKind kind, const SearchSpace& space);

/// Appends the shortest legal suffix ending in Output (Flatten first when the
/// prefix has none). Appended layers use default attribute values. A prefix
/// that already ends in Output is returned unchanged.
/// Throws std::invalid_argument if the prefix does not start with Input.
ArchitectureDescriptor complete_path(ArchitectureDescriptor partial, const SearchSpace& space);

/// Completes the tour's descriptor; graph nodes and choices are untouched.
Tour complete_path(Tour partial, const SearchSpace& space);

}  // namespace swarmnas
