#pragma once

#include <cstddef>
#include <span>

#include "swarmnas/random.hpp"

namespace swarmnas {

struct SelectionParams {
    double greediness = 0.5;  // q0 in [0, 1]
    double beta = 1.0;        // >= 0

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct Candidate {
    double pheromone = 0.0;
    double heuristic = 1.0;
};

/// tau * eta^beta
double desirability(const Candidate& c, double beta);

/// ACS pseudo-random proportional rule. Draws q; if q <= q0 returns the
/// argmax of tau * eta^beta (lowest index on ties), otherwise samples an
/// index with probability proportional to tau * eta^beta. Consumes one draw
/// for the branch and one more for the wheel.
/// Throws std::invalid_argument on an empty list or non-positive tau/eta.
std::size_t aco_select(std::span<const Candidate> candidates, const SelectionParams& params, RandomSource& rng);

}  // namespace swarmnas
