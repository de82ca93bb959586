#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "biaslens/corpus.hpp"

namespace biaslens {

// Joint (topic, label) counts. One count per instance-label pair: a
// multi-label instance with topic t and labels {a, b} contributes the pairs
// (t, a) and (t, b).
struct ContingencyTable {
    std::vector<int> topics;                            // ascending, outlier excluded
    std::vector<std::string> labels;                    // scheme order
    std::vector<std::vector<std::int64_t>> pair_counts; // topics x labels
    std::vector<std::int64_t> topic_marginals;
    std::vector<std::int64_t> label_marginals;
    std::int64_t total_pairs = 0;
};

// Counts instance-label pairs per topic. Outlier instances are skipped;
// an instance without a topic assignment raises MissingTopicAssignmentError.
ContingencyTable build_contingency(const Corpus& corpus);

// Topics x labels matrix of normalized pointwise mutual information.
// Finite cells lie in [-1, 1]; cells whose topic or label marginal is zero
// are NaN.
struct AssociationMatrix {
    std::vector<int> topics;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;
};

// npmi(t, e) = ln(p(t,e) / (p(t) p(e))) / -ln(p(t,e)), natural log.
// A zero joint count with nonzero marginals takes the limit value -1.
AssociationMatrix npmi(const ContingencyTable& table);

enum class TableFormat { Csv, Json };

// CSV: header "topic,<label>,...", one row per topic, 6-decimal fixed
// notation, NaN as an empty cell. JSON: {topics, labels, values} with NaN
// serialized as null.
void export_association(const AssociationMatrix& matrix,
                        const std::filesystem::path& path, TableFormat format);

}  // namespace biaslens
