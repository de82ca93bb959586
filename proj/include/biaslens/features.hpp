#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "biaslens/corpus.hpp"

namespace biaslens {

enum class FeatureWeighting { Binary, TfIdf };

// Hashed bag-of-words space. Identical (seed, dimension, weighting, idf)
// always produce identical vectors.
struct FeatureSpace {
    int hash_dimension = 1 << 15;  // power of two
    std::uint64_t hash_seed = 0x42;
    FeatureWeighting weighting = FeatureWeighting::Binary;
    std::map<std::string, double> idf;  // consulted when weighting == TfIdf

    void validate() const;
};

// Sparse vector with entries sorted by index.
struct SparseVector {
    std::vector<std::pair<std::int32_t, double>> entries;

    double dot(std::span<const double> dense) const {
        double sum = 0.0;
        for (const auto& [idx, w] : entries) sum += w * dense[static_cast<std::size_t>(idx)];
        return sum;
    }
};

// Builds the idf table (log(1 + N/df)) over a corpus slice for TfIdf
// weighting. Call on training data only.
std::map<std::string, double> fit_idf(std::span<const Instance> instances);

// Hashes each token into one signed bucket: index from the low bits of a
// seeded 64-bit hash, sign from a remixed high bit. Collisions sum. Binary
// weighting clamps each bucket to its sign; TfIdf scales token counts by idf
// before hashing.
SparseVector featurize(const Instance& instance, const FeatureSpace& space);

}  // namespace biaslens
