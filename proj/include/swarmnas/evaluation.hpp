#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "swarmnas/search_space.hpp"
#include "swarmnas/tour.hpp"

namespace swarmnas {

/// Raised by evaluators for a single failed evaluation. The search loop
/// records the tour as failed with score 0 and carries on.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct ReuseHint {
    std::size_t prefix_len = 0;
    std::optional<WeightHandle> handle;
};

/// Fitness boundary between the search and whatever trains networks.
/// Implementations must report accuracy in [0, 1].
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual Metrics evaluate(const ArchitectureDescriptor& descriptor, const ReuseHint& hint) = 0;
};

/// Number of leading layers the two descriptors share, compared by their
/// canonical per-layer text.
std::size_t longest_common_prefix(const ArchitectureDescriptor& a, const ArchitectureDescriptor& b);
std::size_t longest_common_prefix(const Tour& a, const Tour& b);

/// Best-scoring weights per canonical path prefix.
class WeightCache {
public:
    struct Entry {
        double score = 0.0;
        std::optional<WeightHandle> handle;
    };

    /// Offers `handle` for every prefix of `d`; a key keeps the entry with the
    /// strictly highest score (first one wins ties).
    void record(const ArchitectureDescriptor& d, double score, const std::optional<WeightHandle>& handle);
    void insert(const std::string& key, Entry entry);

    const std::map<std::string, Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    nlohmann::json to_json() const;
    static WeightCache from_json(const nlohmann::json& j);

private:
    std::map<std::string, Entry> entries_;
};

/// Longest cached prefix of `d` and its handle; (0, none) when nothing matches.
ReuseHint reuse_hint(const WeightCache& cache, const ArchitectureDescriptor& d);

}  // namespace swarmnas
