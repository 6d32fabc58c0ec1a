#include "swarmnas/selection.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmnas {

void SelectionParams::validate() const {
    if (!(greediness >= 0.0 && greediness <= 1.0)) {
        throw std::invalid_argument("greediness = " + std::to_string(greediness) + " must be in [0, 1]");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw std::invalid_argument("beta = " + std::to_string(beta) + " must be >= 0");
    }
}

double desirability(const Candidate& c, double beta) { return c.pheromone * std::pow(c.heuristic, beta); }

std::size_t aco_select(std::span<const Candidate> candidates, const SelectionParams& params, RandomSource& rng) {
    if (candidates.empty()) throw std::invalid_argument("aco_select needs at least one candidate");
    params.validate();

    std::vector<double> weights;
    weights.reserve(candidates.size());
    double total = 0.0;
    for (const auto& c : candidates) {
        if (!(c.pheromone > 0.0) || !(c.heuristic > 0.0)) {
            throw std::invalid_argument("candidate pheromone and heuristic must be positive");
        }
        weights.push_back(desirability(c, params.beta));
        total += weights.back();
    }

    if (rng.uniform() <= params.greediness) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < weights.size(); ++i) {
            if (weights[i] > weights[best]) best = i;
        }
        return best;
    }

    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        cumulative += weights[i];
        if (target < cumulative) return i;
    }
    return weights.size() - 1;
}

}  // namespace swarmnas
