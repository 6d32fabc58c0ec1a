#include "swarmnas/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include "swarmnas/completion.hpp"
#include "swarmnas/descriptor_json.hpp"

namespace swarmnas {

namespace {

constexpr double kBaseline = 0.1;
constexpr double kKindCredit = 0.5;
constexpr double kShapeWeight = 0.2;
constexpr double kShapeRatio = 0.5;
constexpr std::uint64_t kUniformTargetWalks = 200'000;

std::vector<const Layer*> body(const ArchitectureDescriptor& d) {
    std::vector<const Layer*> out;
    for (const auto& layer : d.layers) {
        if (layer.kind != LayerKind::Input && layer.kind != LayerKind::Output) out.push_back(&layer);
    }
    return out;
}

double layer_similarity(const Layer& candidate, const Layer& target) {
    if (candidate.kind != target.kind) return 0.0;
    if (target.attribute_values.empty()) return 1.0;
    std::size_t same = 0;
    for (const auto& [key, value] : target.attribute_values) {
        const auto it = candidate.attribute_values.find(key);
        if (it != candidate.attribute_values.end() && it->second == value) ++same;
    }
    return kKindCredit + (1.0 - kKindCredit) * static_cast<double>(same) /
                             static_cast<double>(target.attribute_values.size());
}

std::uint64_t attribute_combinations(const NodeTemplate& t) {
    std::uint64_t n = 1;
    for (const auto& spec : t.attributes) n *= spec.options.size();
    return n;
}

/// Every attribute assignment of `kind`, last attribute varying fastest.
std::vector<Layer> layer_variants(LayerKind kind, const SearchSpace& space) {
    const auto& specs = space.node_template(kind).attributes;
    std::vector<Layer> out;
    std::vector<std::size_t> odometer(specs.size(), 0);
    while (true) {
        Layer layer{kind, {}};
        for (std::size_t a = 0; a < specs.size(); ++a) {
            layer.attribute_values.emplace(specs[a].name, specs[a].options[odometer[a]]);
        }
        out.push_back(std::move(layer));
        std::size_t a = specs.size();
        while (a > 0) {
            --a;
            if (++odometer[a] < specs[a].options.size()) break;
            odometer[a] = 0;
            if (a == 0) return out;
        }
        if (specs.empty()) return out;
    }
}

}  // namespace

void LandscapeSpec::validate(const SearchSpace& space) const {
    if (const auto verdict = swarmnas::validate(target, space); !verdict) {
        throw std::invalid_argument("landscape target is invalid: " + verdict.rejection->detail);
    }
    if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("landscape discount must be in (0, 1]");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw std::invalid_argument("landscape noise_sigma must be >= 0");
    }
}

LandscapeSpec LandscapeSpec::generate(const SearchSpace& space, std::size_t depth, std::uint64_t seed,
                                      const InputShape& shape, double discount, double noise_sigma) {
    RandomSource rng(seed);
    LandscapeSpec spec{{}, discount, noise_sigma, seed};
    if (count_walks(space, depth) <= kUniformTargetWalks) {
        const auto all = enumerate_descriptors(space, depth, shape);
        spec.target = all.at(rng.index(all.size()));
    } else {
        spec.target = random_descriptor(space, depth, shape, rng);
    }
    spec.validate(space);
    return spec;
}

nlohmann::json LandscapeSpec::to_json() const {
    return {{"target", descriptor_to_json(target)},
            {"discount", discount},
            {"noise_sigma", noise_sigma},
            {"seed", seed}};
}

LandscapeSpec LandscapeSpec::from_json(const nlohmann::json& j) {
    for (const auto& [key, _] : j.items()) {
        if (key != "target" && key != "discount" && key != "noise_sigma" && key != "seed") {
            throw std::invalid_argument("unknown field '" + key + "' in landscape");
        }
    }
    LandscapeSpec spec;
    spec.target = descriptor_from_json(j.at("target"));
    spec.discount = j.value("discount", 0.5);
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    return spec;
}

double landscape_score(const ArchitectureDescriptor& d, const LandscapeSpec& landscape, const SearchSpace& space) {
    if (const auto verdict = validate(d, space); !verdict) {
        throw std::invalid_argument("cannot score invalid descriptor: " + verdict.rejection->detail);
    }
    const auto candidate = body(d);
    const auto target = body(landscape.target);
    const std::size_t n = candidate.size();
    const std::size_t m = target.size();

    double weight = 1.0;
    double numerator = 0.0;
    double denominator = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (i < n) numerator += weight * layer_similarity(*candidate[i], *target[i]);
        denominator += weight;
        weight *= landscape.discount;
    }
    const double match = denominator > 0.0 ? numerator / denominator : 0.0;
    const auto gap = static_cast<double>(n > m ? n - m : m - n);
    const double shape = (1.0 - kShapeWeight) + kShapeWeight * std::pow(kShapeRatio, gap);
    return kBaseline + (1.0 - kBaseline) * match * shape;
}

Metrics synthetic_evaluate(const ArchitectureDescriptor& d, const LandscapeSpec& landscape, const SearchSpace& space) {
    Metrics m;
    m.accuracy = landscape_score(d, landscape, space);
    if (landscape.noise_sigma > 0.0) {
        RandomSource noise(hash_text(canonical_prefix(d, d.layers.size()), landscape.seed));
        m.accuracy = std::clamp(m.accuracy + landscape.noise_sigma * noise.normal(), 0.0, 1.0);
    }
    return m;
}

SyntheticEvaluator::SyntheticEvaluator(LandscapeSpec landscape, const SearchSpace& space)
    : landscape_(std::move(landscape)), space_(&space) {
    landscape_.validate(space);
}

Metrics SyntheticEvaluator::evaluate(const ArchitectureDescriptor& d, const ReuseHint& hint) {
    ++calls_;
    Metrics m = synthetic_evaluate(d, landscape_, *space_);
    m.reused_prefix_len = hint.prefix_len;
    return m;
}

std::uint64_t count_walks(const SearchSpace& space, std::size_t depth) {
    using State = std::pair<LayerKind, bool>;
    std::map<State, std::uint64_t> ways{{{LayerKind::Input, false}, 1}};
    std::uint64_t total = 0;
    for (std::size_t step = 0; step < depth; ++step) {
        std::map<State, std::uint64_t> next;
        for (const auto& [state, count] : ways) {
            for (LayerKind kind : space.selectable_successors(state.first, state.second)) {
                const auto n = count * attribute_combinations(space.node_template(kind));
                next[{kind, state.second || kind == LayerKind::Flatten}] += n;
                total += n;
            }
        }
        ways = std::move(next);
    }
    return total;
}

std::vector<ArchitectureDescriptor> enumerate_descriptors(const SearchSpace& space, std::size_t depth,
                                                          const InputShape& shape, std::uint64_t guard) {
    const auto walks = count_walks(space, depth);
    if (walks > guard) {
        throw std::length_error("enumeration at depth " + std::to_string(depth) + " needs " + std::to_string(walks) +
                                " walks, above the guard of " + std::to_string(guard));
    }
    std::map<LayerKind, std::vector<Layer>> variants;
    for (const auto& t : space.templates()) variants.emplace(t.kind, layer_variants(t.kind, space));

    std::vector<ArchitectureDescriptor> out;
    std::unordered_set<std::string> seen;
    ArchitectureDescriptor partial{shape, {Layer{LayerKind::Input, {}}}};

    std::function<void(bool, std::size_t)> walk = [&](bool flattened, std::size_t used) {
        if (used > 0) {
            auto completed = complete_path(partial, space);
            if (seen.insert(canonical_prefix(completed, completed.layers.size())).second) {
                out.push_back(std::move(completed));
            }
        }
        if (used == depth) return;
        const LayerKind last = partial.layers.back().kind;
        for (LayerKind kind : space.selectable_successors(last, flattened)) {
            for (const auto& layer : variants.at(kind)) {
                partial.layers.push_back(layer);
                walk(flattened || kind == LayerKind::Flatten, used + 1);
                partial.layers.pop_back();
            }
        }
    };
    walk(false, 0);
    return out;
}

BruteForceResult brute_force_best(const SearchSpace& space, std::size_t depth, const LandscapeSpec& landscape,
                                  std::uint64_t guard) {
    const auto all = enumerate_descriptors(space, depth, landscape.target.input_shape, guard);
    BruteForceResult result;
    result.enumerated = all.size();
    std::string best_key;
    bool first = true;
    for (const auto& d : all) {
        const double s = landscape_score(d, landscape, space);
        const auto key = canonical_prefix(d, d.layers.size());
        if (first || s > result.score || (s == result.score && key < best_key)) {
            result.best = d;
            result.score = s;
            best_key = key;
            first = false;
        }
    }
    return result;
}

ArchitectureDescriptor random_descriptor(const SearchSpace& space, std::size_t max_depth, const InputShape& shape,
                                         RandomSource& rng) {
    if (max_depth == 0) throw std::invalid_argument("max_depth must be >= 1");
    ArchitectureDescriptor d{shape, {Layer{LayerKind::Input, {}}}};
    const std::size_t length = 1 + rng.index(max_depth);
    bool flattened = false;
    for (std::size_t i = 0; i < length; ++i) {
        const auto options = space.selectable_successors(d.layers.back().kind, flattened);
        if (options.empty()) break;
        const LayerKind kind = options[rng.index(options.size())];
        Layer layer{kind, {}};
        for (const auto& spec : space.node_template(kind).attributes) {
            layer.attribute_values.emplace(spec.name, spec.options[rng.index(spec.options.size())]);
        }
        d.layers.push_back(std::move(layer));
        flattened = flattened || kind == LayerKind::Flatten;
    }
    return complete_path(std::move(d), space);
}

RandomSearchResult random_search(Evaluator& evaluator, const SearchSpace& space, std::size_t budget,
                                 std::size_t max_depth, std::uint64_t seed, const InputShape& shape) {
    RandomSource rng(seed);
    RandomSearchResult result;
    bool have_best = false;
    for (std::size_t i = 0; i < budget; ++i) {
        auto d = random_descriptor(space, max_depth, shape, rng);
        double score = 0.0;
        try {
            const auto m = evaluator.evaluate(d, ReuseHint{});
            if (m.accuracy >= 0.0 && m.accuracy <= 1.0) score = m.accuracy;
        } catch (const std::exception&) {
            score = 0.0;
        }
        ++result.evaluations;
        if (!have_best || score > result.best_score) {
            result.best = std::move(d);
            result.best_score = score;
            have_best = true;
        }
    }
    return result;
}

}  // namespace swarmnas
