#include "swarmnas/evaluation.hpp"

#include <algorithm>

namespace swarmnas {

std::size_t longest_common_prefix(const ArchitectureDescriptor& a, const ArchitectureDescriptor& b) {
    const std::size_t n = std::min(a.layers.size(), b.layers.size());
    std::size_t k = 0;
    while (k < n && canonical_layer(a.layers[k], a.input_shape) == canonical_layer(b.layers[k], b.input_shape)) {
        ++k;
    }
    return k;
}

std::size_t longest_common_prefix(const Tour& a, const Tour& b) {
    return longest_common_prefix(a.descriptor, b.descriptor);
}

void WeightCache::record(const ArchitectureDescriptor& d, double score, const std::optional<WeightHandle>& handle) {
    for (std::size_t k = 1; k <= d.layers.size(); ++k) insert(canonical_prefix(d, k), Entry{score, handle});
}

void WeightCache::insert(const std::string& key, Entry entry) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        entries_.emplace(key, std::move(entry));
    } else if (entry.score > it->second.score) {
        it->second = std::move(entry);
    }
}

nlohmann::json WeightCache::to_json() const {
    auto out = nlohmann::json::array();
    for (const auto& [key, entry] : entries_) {
        nlohmann::json e = {{"key", key}, {"score", entry.score}};
        e["handle"] = entry.handle ? nlohmann::json(*entry.handle) : nlohmann::json(nullptr);
        out.push_back(std::move(e));
    }
    return out;
}

WeightCache WeightCache::from_json(const nlohmann::json& j) {
    WeightCache cache;
    for (const auto& e : j) {
        Entry entry{e.at("score").get<double>(), std::nullopt};
        if (!e.at("handle").is_null()) entry.handle = e.at("handle").get<std::string>();
        cache.entries_.emplace(e.at("key").get<std::string>(), std::move(entry));
    }
    return cache;
}

ReuseHint reuse_hint(const WeightCache& cache, const ArchitectureDescriptor& d) {
    for (std::size_t k = d.layers.size(); k > 0; --k) {
        const auto it = cache.entries().find(canonical_prefix(d, k));
        if (it != cache.entries().end()) return ReuseHint{k, it->second.handle};
    }
    return {};
}

}  // namespace swarmnas
