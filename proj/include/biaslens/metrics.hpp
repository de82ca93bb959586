#pragma once

#include <vector>

#include "biaslens/errors.hpp"

namespace biaslens {

// Micro-averaged F1 over pooled (instance, label) decisions. Label sets are
// index vectors sorted ascending. Returns 0 when precision + recall is 0.
// For single-label argmax predictions this equals accuracy.
double micro_f1(const std::vector<std::vector<int>>& predictions,
                const std::vector<std::vector<int>>& golds);

struct PooledCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
};

PooledCounts pooled_counts(const std::vector<std::vector<int>>& predictions,
                           const std::vector<std::vector<int>>& golds);

}  // namespace biaslens
