#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmnas/evaluation.hpp"
#include "swarmnas/random.hpp"
#include "swarmnas/search_space.hpp"

namespace swarmnas {

/// Synthetic fitness landscape: similarity to a hidden target architecture.
///
/// With body(x) the layers strictly between Input and Output, t = body(target),
/// b = body(d), m = |t|, n = |b| and discount g:
///
///   s_i   = 0                             if kinds differ at position i
///           1                             if the kind has no attributes
///           0.5 + 0.5 * (matching attributes / attributes)
///   match = sum_{i < min(n,m)} g^i s_i / sum_{i < m} g^i
///   shape = 0.8 + 0.2 * 0.5^|n - m|        (depth-regularity bonus)
///   score = 0.1 + 0.9 * match * shape
///
/// so the target scores 1, anything sharing no body layer with it scores 0.1,
/// and a small g makes early layers dominate. With noise_sigma > 0 a Gaussian
/// offset seeded by (seed, canonical string) is added and the result clamped
/// to [0, 1]; scores stay deterministic per descriptor.
struct LandscapeSpec {
    ArchitectureDescriptor target;
    double discount = 0.5;     // (0, 1]
    double noise_sigma = 0.0;  // >= 0
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument.
    void validate(const SearchSpace& space = default_space()) const;

    /// Target drawn uniformly from enumerate_descriptors(space, depth, shape)
    /// while that set has at most 200000 walks behind it; past that the
    /// target is a random_descriptor sample.
    static LandscapeSpec generate(const SearchSpace& space, std::size_t depth, std::uint64_t seed,
                                  const InputShape& shape = {}, double discount = 0.5, double noise_sigma = 0.0);

    nlohmann::json to_json() const;
    static LandscapeSpec from_json(const nlohmann::json& j);
};

/// Noise-free score. Throws std::invalid_argument if `d` is invalid.
double landscape_score(const ArchitectureDescriptor& d, const LandscapeSpec& landscape,
                       const SearchSpace& space = default_space());

Metrics synthetic_evaluate(const ArchitectureDescriptor& d, const LandscapeSpec& landscape,
                           const SearchSpace& space = default_space());

class SyntheticEvaluator final : public Evaluator {
public:
    explicit SyntheticEvaluator(LandscapeSpec landscape, const SearchSpace& space = default_space());

    /// Reports reused_prefix_len equal to the hint's prefix length.
    Metrics evaluate(const ArchitectureDescriptor& d, const ReuseHint& hint) override;

    const LandscapeSpec& landscape() const { return landscape_; }
    std::size_t calls() const { return calls_; }

private:
    LandscapeSpec landscape_;
    const SearchSpace* space_;
    std::size_t calls_ = 0;
};

/// Number of selection sequences of length 1..depth an ant can make
/// (node kinds times attribute combinations), counted without enumerating.
std::uint64_t count_walks(const SearchSpace& space, std::size_t depth);

/// Every distinct completed descriptor reachable by walks of 1..depth
/// selections, in depth-first catalog order.
/// Throws std::length_error if count_walks exceeds `guard`.
std::vector<ArchitectureDescriptor> enumerate_descriptors(const SearchSpace& space, std::size_t depth,
                                                          const InputShape& shape = {},
                                                          std::uint64_t guard = 1'000'000);

struct BruteForceResult {
    ArchitectureDescriptor best;
    double score = 0.0;
    std::size_t enumerated = 0;
};

/// Exhaustive noise-free maximum; ties go to the lexicographically smallest
/// canonical string.
BruteForceResult brute_force_best(const SearchSpace& space, std::size_t depth, const LandscapeSpec& landscape,
                                  std::uint64_t guard = 1'000'000);

/// Uniform random walk of 1..max_depth selections (length uniform, kinds and
/// attribute options uniform), completed.
ArchitectureDescriptor random_descriptor(const SearchSpace& space, std::size_t max_depth, const InputShape& shape,
                                         RandomSource& rng);

struct RandomSearchResult {
    ArchitectureDescriptor best;
    double best_score = 0.0;
    std::size_t evaluations = 0;
};

/// Baseline: `budget` independent random_descriptor samples; failed
/// evaluations count as score 0.
RandomSearchResult random_search(Evaluator& evaluator, const SearchSpace& space, std::size_t budget,
                                 std::size_t max_depth, std::uint64_t seed, const InputShape& shape = {});

}  // namespace swarmnas
