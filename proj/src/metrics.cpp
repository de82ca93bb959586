#include "biaslens/metrics.hpp"

#include <algorithm>

namespace biaslens {

PooledCounts pooled_counts(const std::vector<std::vector<int>>& predictions,
                           const std::vector<std::vector<int>>& golds) {
    if (predictions.size() != golds.size()) {
        throw LengthMismatchError("predictions and golds differ in length");
    }
    PooledCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& pred = predictions[i];
        const auto& gold = golds[i];
        for (const int p : pred) {
            if (std::binary_search(gold.begin(), gold.end(), p)) {
                ++c.tp;
            } else {
                ++c.fp;
            }
        }
        for (const int g : gold) {
            if (!std::binary_search(pred.begin(), pred.end(), g)) ++c.fn;
        }
    }
    return c;
}

double micro_f1(const std::vector<std::vector<int>>& predictions,
                const std::vector<std::vector<int>>& golds) {
    const PooledCounts c = pooled_counts(predictions, golds);
    const long long denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 0.0;  // P + R undefined or zero
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

}  // namespace biaslens
