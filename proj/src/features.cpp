#include "biaslens/features.hpp"

#include <cmath>

#include "biaslens/hashing.hpp"

namespace biaslens {

void FeatureSpace::validate() const {
    if (hash_dimension < 2 || (hash_dimension & (hash_dimension - 1)) != 0) {
        throw Error("hash_dimension must be a power of two >= 2");
    }
}

std::map<std::string, double> fit_idf(std::span<const Instance> instances) {
    std::map<std::string, std::int64_t> df;
    for (const auto& inst : instances) {
        std::map<std::string, bool> seen;
        for (const auto& tok : inst.tokens) {
            if (!seen[tok]) {
                seen[tok] = true;
                ++df[tok];
            }
        }
    }
    std::map<std::string, double> idf;
    const double n = static_cast<double>(instances.size());
    for (const auto& [term, count] : df) {
        idf[term] = std::log(1.0 + n / static_cast<double>(count));
    }
    return idf;
}

SparseVector featurize(const Instance& instance, const FeatureSpace& space) {
    space.validate();
    const auto mask = static_cast<std::uint64_t>(space.hash_dimension - 1);
    std::map<std::int32_t, double> buckets;
    for (const auto& tok : instance.tokens) {
        const std::uint64_t h = fnv1a64(tok, space.hash_seed);
        const auto idx = static_cast<std::int32_t>(h & mask);
        const double sign = (remix(h) >> 63) ? -1.0 : 1.0;
        double weight = 1.0;
        if (space.weighting == FeatureWeighting::TfIdf) {
            const auto it = space.idf.find(tok);
            weight = it != space.idf.end() ? it->second : 0.0;
        }
        buckets[idx] += sign * weight;
    }
    SparseVector vec;
    vec.entries.reserve(buckets.size());
    for (const auto& [idx, value] : buckets) {
        double v = value;
        if (space.weighting == FeatureWeighting::Binary) {
            v = value > 0.0 ? 1.0 : (value < 0.0 ? -1.0 : 0.0);
        }
        if (v != 0.0) vec.entries.emplace_back(idx, v);
    }
    return vec;
}

}  // namespace biaslens
