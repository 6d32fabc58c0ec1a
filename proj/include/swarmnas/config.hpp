#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "swarmnas/landscape.hpp"
#include "swarmnas/search_space.hpp"
#include "swarmnas/selection.hpp"

namespace swarmnas {

/// Invalid configuration value; `field()` names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct PheromoneParams {
    double rho = 0.1;    // local decay, (0, 1)
    double alpha = 0.1;  // global evaporation, (0, 1)
    double tau0 = 0.1;   // initial pheromone, > 0

    void validate() const;
};

/// Partial landscape settings; a missing target is generated from `seed`.
struct LandscapeConfig {
    std::optional<ArchitectureDescriptor> target;
    double discount = 0.5;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct RunConfig {
    std::size_t ant_count = 8;
    std::size_t max_depth = 3;  // selectable layers, excluding Input and Output
    SelectionParams selection;
    PheromoneParams pheromone;
    std::uint64_t seed = 0;
    /// "synthetic", "exec:<command>" or "tcp:<host>:<port>".
    std::string evaluator = "synthetic";
    InputShape input_shape;
    LandscapeConfig landscape;
    std::string out_dir = "swarmnas-out";
    double handshake_timeout_s = 10.0;
    double request_timeout_s = 3600.0;

    /// Throws ConfigError naming the field and its bound.
    void validate() const;

    /// Landscape with its target generated if the config leaves it open.
    LandscapeSpec resolved_landscape(const SearchSpace& space = default_space()) const;

    nlohmann::json to_json() const;
    /// Unknown keys are rejected; missing keys keep their defaults.
    static RunConfig from_json(const nlohmann::json& j);
};

}  // namespace swarmnas
