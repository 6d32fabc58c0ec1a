#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace swarmnas {

/// Single seeded stream shared by every stochastic decision of a run.
/// Uniforms are built from raw 64-bit words, so draws are identical across
/// standard libraries; the draw counter doubles as a replay trace.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() {
        ++draws_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Consumes one draw.
    std::size_t index(std::size_t n) {
        const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    /// Standard normal via Box-Muller; consumes two draws.
    double normal();

    std::uint64_t draws() const { return draws_; }

    std::string state() const;
    /// Throws std::invalid_argument on a malformed state string.
    void restore(const std::string& state, std::uint64_t draws);

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
};

/// FNV-1a over bytes, seeded; used to derive per-descriptor streams.
std::uint64_t hash_text(std::string_view text, std::uint64_t seed);

}  // namespace swarmnas
