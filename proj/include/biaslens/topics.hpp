#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "biaslens/corpus.hpp"

namespace biaslens {

struct TopicParams {
    // 0 resolves to max(15, corpus size / 100) at fit time; the model stores
    // the resolved value.
    int min_cluster_size = 0;
    int max_topics = 12;
    double outlier_similarity_threshold = 0.05;
    std::uint64_t seed = 0;
};

struct ScoredWord {
    std::string word;
    double score = 0.0;

    bool operator==(const ScoredWord&) const = default;
};

// Result of topic discovery: an assignment for every instance id, ranked
// representative words per topic, and enough state (vocabulary, document
// frequencies, centroids) to place unseen instances.
struct TopicModel {
    int num_topics = 0;
    TopicParams params;                                // resolved
    std::map<std::string, int> assignments;            // id -> topic, -1 = outlier
    std::vector<std::vector<ScoredWord>> rep_words;    // [topic], score descending

    std::vector<std::string> vocab;                    // sorted terms
    std::vector<std::int64_t> doc_freq;                // aligned with vocab
    std::int64_t total_docs = 0;
    std::vector<std::vector<std::pair<std::int32_t, double>>> centroids;  // unit sparse
};

// Clusters tf-idf document vectors with spherical k-means, sweeping the
// cluster count and keeping the one with the best mean silhouette. Instances
// too dissimilar to their centroid and clusters below the minimum size fall
// into the outlier topic. When every instance already carries a topic field,
// those assignments are adopted as-is (external labels win over fitting) and
// only representative words and centroids are computed.
TopicModel fit_topics(const Corpus& corpus, const TopicParams& params);

// Copies the corpus with topic fields filled from the model. Instances the
// model has not seen keep an existing topic field if present, otherwise they
// go to the nearest centroid (outlier below the similarity threshold). With
// strict set, an unseen instance raises UnknownInstanceError instead.
Corpus assign_topics(const TopicModel& model, const Corpus& corpus,
                     bool strict = false);

// First k representative words of a topic (fewer if fewer are stored).
std::vector<ScoredWord> representative_words(const TopicModel& model, int topic,
                                             int k);

// Mean silhouette per candidate cluster count, exactly as the fit sweep
// evaluates them. fit_topics picks the argmax (ties to the smaller count).
std::vector<std::pair<int, double>> silhouette_sweep(const Corpus& corpus,
                                                     const TopicParams& params);

void save_topic_model(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_topic_model(const std::filesystem::path& path);
std::string topic_model_to_json(const TopicModel& model);

}  // namespace biaslens
