#include "swarmnas/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace swarmnas {

double RandomSource::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string RandomSource::state() const {
    std::ostringstream out;
    out << engine_;
    return out.str();
}

void RandomSource::restore(const std::string& state, std::uint64_t draws) {
    std::istringstream in(state);
    std::mt19937_64 engine;
    in >> engine;
    if (in.fail()) throw std::invalid_argument("malformed generator state");
    engine_ = engine;
    draws_ = draws;
}

std::uint64_t hash_text(std::string_view text, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace swarmnas
