#include "biaslens/association.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

namespace biaslens {

ContingencyTable build_contingency(const Corpus& corpus) {
    ContingencyTable table;
    table.labels = corpus.scheme.labels;
    table.topics = corpus.topic_ids(/*include_outlier=*/false);

    std::map<int, std::size_t> topic_row;
    for (std::size_t i = 0; i < table.topics.size(); ++i) {
        topic_row[table.topics[i]] = i;
    }

    const std::size_t n_labels = table.labels.size();
    table.pair_counts.assign(table.topics.size(),
                             std::vector<std::int64_t>(n_labels, 0));
    table.topic_marginals.assign(table.topics.size(), 0);
    table.label_marginals.assign(n_labels, 0);

    for (const auto& inst : corpus.instances) {
        if (!inst.topic) {
            throw MissingTopicAssignmentError("instance has no topic: " + inst.id);
        }
        if (*inst.topic == kOutlierTopic) continue;
        const std::size_t row = topic_row.at(*inst.topic);
        for (const int label : inst.labels) {
            const auto col = static_cast<std::size_t>(label);
            ++table.pair_counts[row][col];
            ++table.topic_marginals[row];
            ++table.label_marginals[col];
            ++table.total_pairs;
        }
    }
    return table;
}

AssociationMatrix npmi(const ContingencyTable& table) {
    if (table.total_pairs <= 0) {
        throw EmptyTableError("contingency table has no pairs");
    }
    AssociationMatrix m;
    m.topics = table.topics;
    m.labels = table.labels;
    const double total = static_cast<double>(table.total_pairs);
    m.values.assign(table.topics.size(),
                    std::vector<double>(table.labels.size(), 0.0));
    for (std::size_t i = 0; i < table.topics.size(); ++i) {
        for (std::size_t j = 0; j < table.labels.size(); ++j) {
            const std::int64_t ct = table.topic_marginals[i];
            const std::int64_t ce = table.label_marginals[j];
            const std::int64_t cte = table.pair_counts[i][j];
            double value;
            if (ct == 0 || ce == 0) {
                value = std::numeric_limits<double>::quiet_NaN();
            } else if (cte == 0) {
                value = -1.0;  // limit of pmi/-ln p(t,e) as p(t,e) -> 0
            } else if (cte == ct && cte == ce) {
                // Co-occur in all and only each other's pairs. Integer check
                // keeps the cell exactly 1 (and covers the p(t,e)=1 case,
                // where the ratio would be 0/0).
                value = 1.0;
            } else if (cte * table.total_pairs == ct * ce) {
                value = 0.0;  // exact independence
            } else {
                const double pt = static_cast<double>(ct) / total;
                const double pe = static_cast<double>(ce) / total;
                const double pte = static_cast<double>(cte) / total;
                value = std::log(pte / (pt * pe)) / -std::log(pte);
            }
            m.values[i][j] = value;
        }
    }
    return m;
}

namespace {

std::string format_cell(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void export_association(const AssociationMatrix& matrix,
                        const std::filesystem::path& path, TableFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write association file: " + path.string());
    if (format == TableFormat::Csv) {
        out << "topic";
        for (const auto& label : matrix.labels) out << ',' << label;
        out << '\n';
        for (std::size_t i = 0; i < matrix.topics.size(); ++i) {
            out << matrix.topics[i];
            for (const double v : matrix.values[i]) out << ',' << format_cell(v);
            out << '\n';
        }
    } else {
        nlohmann::json obj;
        obj["topics"] = matrix.topics;
        obj["labels"] = matrix.labels;
        obj["values"] = matrix.values;  // NaN dumps as null
        out << obj.dump(2) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace biaslens
