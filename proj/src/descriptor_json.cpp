#include "swarmnas/descriptor_json.hpp"

#include <stdexcept>

namespace swarmnas {

namespace {

using nlohmann::json;

json value_to_json(const AttributeValue& value) {
    return std::visit([](const auto& v) { return json(v); }, value);
}

AttributeValue value_from_json(const json& j, const std::string& key) {
    if (j.is_number_integer()) return AttributeValue{j.get<std::int64_t>()};
    if (j.is_number_float()) return AttributeValue{j.get<double>()};
    if (j.is_string()) return AttributeValue{j.get<std::string>()};
    throw std::invalid_argument("attribute '" + key + "' must be a number or string");
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, std::string_view where) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto k : known) ok = ok || key == k;
        if (!ok) throw std::invalid_argument("unknown field '" + key + "' in " + std::string(where));
    }
}

}  // namespace

json input_shape_to_json(const InputShape& shape) {
    return json::array({shape.height, shape.width, shape.channels});
}

InputShape input_shape_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("input_shape must be [h,w,c]");
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw std::invalid_argument("input_shape entries must be integers");
    }
    return InputShape{j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

json descriptor_to_json(const ArchitectureDescriptor& d) {
    json layers = json::array();
    for (const auto& layer : d.layers) {
        json attrs = json::object();
        for (const auto& [key, value] : layer.attribute_values) attrs[key] = value_to_json(value);
        layers.push_back({{"kind", std::string(to_string(layer.kind))}, {"attributes", std::move(attrs)}});
    }
    return {{"input_shape", input_shape_to_json(d.input_shape)}, {"layers", std::move(layers)}};
}

ArchitectureDescriptor descriptor_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("descriptor must be a JSON object");
    reject_unknown(j, {"input_shape", "layers"}, "descriptor");
    if (!j.contains("input_shape") || !j.contains("layers")) {
        throw std::invalid_argument("descriptor needs input_shape and layers");
    }
    ArchitectureDescriptor d;
    d.input_shape = input_shape_from_json(j.at("input_shape"));
    const auto& layers = j.at("layers");
    if (!layers.is_array()) throw std::invalid_argument("layers must be an array");
    for (const auto& entry : layers) {
        if (!entry.is_object()) throw std::invalid_argument("layer must be an object");
        reject_unknown(entry, {"kind", "attributes"}, "layer");
        if (!entry.contains("kind") || !entry.at("kind").is_string()) {
            throw std::invalid_argument("layer needs a string kind");
        }
        Layer layer;
        layer.kind = layer_kind_from_string(entry.at("kind").get<std::string>());
        if (entry.contains("attributes")) {
            const auto& attrs = entry.at("attributes");
            if (!attrs.is_object()) throw std::invalid_argument("attributes must be an object");
            for (const auto& [key, value] : attrs.items()) {
                layer.attribute_values.emplace(key, value_from_json(value, key));
            }
        }
        d.layers.push_back(std::move(layer));
    }
    return d;
}

std::string serialize(const ArchitectureDescriptor& d) { return descriptor_to_json(d).dump(); }

ArchitectureDescriptor deserialize(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("descriptor is not JSON: ") + e.what());
    }
    return descriptor_from_json(j);
}

}  // namespace swarmnas
