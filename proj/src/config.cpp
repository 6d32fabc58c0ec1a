#include "swarmnas/config.hpp"

#include <cmath>
#include <sstream>

#include "swarmnas/descriptor_json.hpp"

namespace swarmnas {

namespace {

using nlohmann::json;

std::string show(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

void require_open_unit(double v, const char* field) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(field, std::string(field) + " = " + show(v) + " must be in (0, 1)");
}

template <typename T>
T read(const json& j, const char* field) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(field, std::string(field) + " has the wrong type");
    }
}

}  // namespace

void PheromoneParams::validate() const {
    require_open_unit(rho, "rho");
    require_open_unit(alpha, "alpha");
    if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw ConfigError("tau0", "tau0 = " + show(tau0) + " must be > 0");
}

void RunConfig::validate() const {
    if (ant_count < 1) throw ConfigError("ant_count", "ant_count = 0 must be >= 1");
    if (max_depth < 1) throw ConfigError("max_depth", "max_depth = 0 must be >= 1");
    if (!(selection.greediness >= 0.0 && selection.greediness <= 1.0)) {
        throw ConfigError("greediness", "greediness = " + show(selection.greediness) + " must be in [0, 1]");
    }
    if (!(selection.beta >= 0.0) || !std::isfinite(selection.beta)) {
        throw ConfigError("beta", "beta = " + show(selection.beta) + " must be >= 0");
    }
    pheromone.validate();
    if (input_shape.height <= 0 || input_shape.width <= 0 || input_shape.channels <= 0) {
        throw ConfigError("input_shape", "input_shape entries must be > 0");
    }
    const bool known = evaluator == "synthetic" || evaluator.starts_with("exec:") || evaluator.starts_with("tcp:");
    if (!known || evaluator == "exec:" || evaluator == "tcp:") {
        throw ConfigError("evaluator", "evaluator '" + evaluator + "' must be synthetic, exec:<command> or tcp:<host:port>");
    }
    if (!(landscape.discount > 0.0 && landscape.discount <= 1.0)) {
        throw ConfigError("landscape.discount", "landscape.discount = " + show(landscape.discount) + " must be in (0, 1]");
    }
    if (!(landscape.noise_sigma >= 0.0)) {
        throw ConfigError("landscape.noise_sigma", "landscape.noise_sigma must be >= 0");
    }
    if (!(handshake_timeout_s > 0.0)) throw ConfigError("handshake_timeout_s", "handshake_timeout_s must be > 0");
    if (!(request_timeout_s > 0.0)) throw ConfigError("request_timeout_s", "request_timeout_s must be > 0");
}

LandscapeSpec RunConfig::resolved_landscape(const SearchSpace& space) const {
    if (landscape.target) {
        LandscapeSpec spec{*landscape.target, landscape.discount, landscape.noise_sigma, landscape.seed};
        spec.validate(space);
        return spec;
    }
    return LandscapeSpec::generate(space, max_depth, landscape.seed, input_shape, landscape.discount,
                                   landscape.noise_sigma);
}

json RunConfig::to_json() const {
    json l = {{"discount", landscape.discount}, {"noise_sigma", landscape.noise_sigma}, {"seed", landscape.seed}};
    if (landscape.target) l["target"] = descriptor_to_json(*landscape.target);
    return {{"ant_count", ant_count},
            {"max_depth", max_depth},
            {"greediness", selection.greediness},
            {"beta", selection.beta},
            {"rho", pheromone.rho},
            {"alpha", pheromone.alpha},
            {"tau0", pheromone.tau0},
            {"seed", seed},
            {"evaluator", evaluator},
            {"input_shape", input_shape_to_json(input_shape)},
            {"landscape", std::move(l)},
            {"handshake_timeout_s", handshake_timeout_s},
            {"request_timeout_s", request_timeout_s}};
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config", "config must be a JSON object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        const char* k = key.c_str();
        if (key == "ant_count") {
            if (!value.is_number_integer() || value.get<std::int64_t>() < 1) {
                throw ConfigError(key, "ant_count = " + value.dump() + " must be an integer >= 1");
            }
            c.ant_count = value.get<std::size_t>();
        } else if (key == "max_depth") {
            if (!value.is_number_integer() || value.get<std::int64_t>() < 1) {
                throw ConfigError(key, "max_depth = " + value.dump() + " must be an integer >= 1");
            }
            c.max_depth = value.get<std::size_t>();
        } else if (key == "greediness") {
            c.selection.greediness = read<double>(value, k);
        } else if (key == "beta") {
            c.selection.beta = read<double>(value, k);
        } else if (key == "rho") {
            c.pheromone.rho = read<double>(value, k);
        } else if (key == "alpha") {
            c.pheromone.alpha = read<double>(value, k);
        } else if (key == "tau0") {
            c.pheromone.tau0 = read<double>(value, k);
        } else if (key == "seed") {
            c.seed = read<std::uint64_t>(value, k);
        } else if (key == "evaluator") {
            c.evaluator = read<std::string>(value, k);
        } else if (key == "input_shape") {
            try {
                c.input_shape = input_shape_from_json(value);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(key, e.what());
            }
        } else if (key == "landscape") {
            if (!value.is_object()) throw ConfigError(key, "landscape must be an object");
            for (const auto& [lk, lv] : value.items()) {
                const std::string field = "landscape." + lk;
                if (lk == "target") {
                    try {
                        c.landscape.target = descriptor_from_json(lv);
                    } catch (const std::invalid_argument& e) {
                        throw ConfigError(field, field + ": " + e.what());
                    }
                } else if (lk == "discount") {
                    c.landscape.discount = read<double>(lv, field.c_str());
                } else if (lk == "noise_sigma") {
                    c.landscape.noise_sigma = read<double>(lv, field.c_str());
                } else if (lk == "seed") {
                    c.landscape.seed = read<std::uint64_t>(lv, field.c_str());
                } else {
                    throw ConfigError(field, "unknown config key '" + field + "'");
                }
            }
        } else if (key == "out_dir") {
            c.out_dir = read<std::string>(value, k);
        } else if (key == "handshake_timeout_s") {
            c.handshake_timeout_s = read<double>(value, k);
        } else if (key == "request_timeout_s") {
            c.request_timeout_s = read<double>(value, k);
        } else {
            throw ConfigError(key, "unknown config key '" + key + "'");
        }
    }
    return c;
}

}  // namespace swarmnas
