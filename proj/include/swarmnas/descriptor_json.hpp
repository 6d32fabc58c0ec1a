#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "swarmnas/search_space.hpp"

namespace swarmnas {

// {"input_shape":[h,w,c],"layers":[{"kind":"Conv2D","attributes":{...}},...]}
nlohmann::json descriptor_to_json(const ArchitectureDescriptor& d);

/// Schema check only (field names, types, no unknown fields); use validate()
/// for catalog rules. Throws std::invalid_argument.
ArchitectureDescriptor descriptor_from_json(const nlohmann::json& j);

std::string serialize(const ArchitectureDescriptor& d);
ArchitectureDescriptor deserialize(std::string_view text);

nlohmann::json input_shape_to_json(const InputShape& shape);
InputShape input_shape_from_json(const nlohmann::json& j);

}  // namespace swarmnas
