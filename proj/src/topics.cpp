#include "biaslens/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "biaslens/rng.hpp"

namespace biaslens {

using nlohmann::json;

namespace {

constexpr int kMaxKMeansIters = 100;
constexpr int kKMeansRestarts = 10;
constexpr int kRepWordCap = 100;
constexpr std::size_t kSilhouetteSampleCap = 2048;

using SparseVec = std::vector<std::pair<std::int32_t, double>>;

struct VectorSpace {
    std::vector<std::string> vocab;       // sorted
    std::vector<std::int64_t> doc_freq;
    std::int64_t total_docs = 0;
    std::vector<SparseVec> docs;          // unit-norm tf-idf, aligned with corpus
};

double idf(std::int64_t total_docs, std::int64_t df) {
    return std::log(1.0 + static_cast<double>(total_docs) / static_cast<double>(df));
}

SparseVec vectorize(const std::vector<std::string>& tokens,
                    const std::vector<std::string>& vocab,
                    const std::vector<std::int64_t>& doc_freq,
                    std::int64_t total_docs) {
    std::map<std::int32_t, double> counts;
    for (const auto& tok : tokens) {
        const auto it = std::lower_bound(vocab.begin(), vocab.end(), tok);
        if (it != vocab.end() && *it == tok) {
            counts[static_cast<std::int32_t>(it - vocab.begin())] += 1.0;
        }
    }
    SparseVec vec;
    vec.reserve(counts.size());
    double norm_sq = 0.0;
    for (const auto& [idx, tf] : counts) {
        const double w = tf * idf(total_docs, doc_freq[static_cast<std::size_t>(idx)]);
        vec.emplace_back(idx, w);
        norm_sq += w * w;
    }
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& [idx, w] : vec) w *= inv;
    }
    return vec;
}

VectorSpace build_vector_space(const Corpus& corpus) {
    VectorSpace space;
    space.total_docs = static_cast<std::int64_t>(corpus.instances.size());
    std::map<std::string, std::int64_t> df;
    for (const auto& inst : corpus.instances) {
        std::set<std::string> uniq(inst.tokens.begin(), inst.tokens.end());
        for (const auto& tok : uniq) ++df[tok];
    }
    space.vocab.reserve(df.size());
    space.doc_freq.reserve(df.size());
    for (const auto& [term, count] : df) {
        space.vocab.push_back(term);
        space.doc_freq.push_back(count);
    }
    space.docs.reserve(corpus.instances.size());
    for (const auto& inst : corpus.instances) {
        space.docs.push_back(
            vectorize(inst.tokens, space.vocab, space.doc_freq, space.total_docs));
    }
    return space;
}

double sparse_dot(const SparseVec& a, const SparseVec& b) {
    double dot = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first < b[j].first) {
            ++i;
        } else if (a[i].first > b[j].first) {
            ++j;
        } else {
            dot += a[i].second * b[j].second;
            ++i;
            ++j;
        }
    }
    return dot;
}

double dot_dense(const SparseVec& v, const std::vector<double>& dense) {
    double dot = 0.0;
    for (const auto& [idx, w] : v) dot += w * dense[static_cast<std::size_t>(idx)];
    return dot;
}

struct Clustering {
    std::vector<int> assignment;               // per doc, cluster index
    std::vector<std::vector<double>> centroids;  // dense unit vectors
    double inertia = 0.0;
};

void normalize_dense(std::vector<double>& v) {
    double norm_sq = 0.0;
    for (const double x : v) norm_sq += x * x;
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& x : v) x *= inv;
    }
}

// Spherical k-means with k-means++ seeding. Distance is 1 - cosine on unit
// vectors. Empty clusters are dropped, so the returned clustering may have
// fewer than k centroids.
Clustering kmeans_once(const std::vector<SparseVec>& docs, std::size_t dim, int k,
                       Rng& rng) {
    const std::size_t n = docs.size();
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<std::size_t>(k));

    // k-means++ seeding on 1-cos squared weights
    std::vector<double> best_sim(n, 0.0);
    {
        const std::size_t first = static_cast<std::size_t>(rng.bounded(n));
        std::vector<double> c(dim, 0.0);
        for (const auto& [idx, w] : docs[first]) c[static_cast<std::size_t>(idx)] = w;
        centers.push_back(std::move(c));
    }
    for (int c = 1; c < k; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const double sim = dot_dense(docs[i], centers.back());
            if (c == 1 || sim > best_sim[i]) best_sim[i] = sim;
        }
        std::vector<double> weights(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = 1.0 - best_sim[i];
            weights[i] = d * d;
            total += weights[i];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(rng.bounded(n));
        } else {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += weights[i];
                if (cum >= target) {
                    pick = i;
                    break;
                }
            }
        }
        std::vector<double> cv(dim, 0.0);
        for (const auto& [idx, w] : docs[pick]) cv[static_cast<std::size_t>(idx)] = w;
        centers.push_back(std::move(cv));
    }

    Clustering result;
    result.assignment.assign(n, 0);
    for (int iter = 0; iter < kMaxKMeansIters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_dot = -2.0;
            for (std::size_t c = 0; c < centers.size(); ++c) {
                const double d = dot_dense(docs[i], centers[c]);
                if (d > best_dot) {
                    best_dot = d;
                    best = static_cast<int>(c);
                }
            }
            if (result.assignment[i] != best) {
                result.assignment[i] = best;
                changed = true;
            }
        }
        // Recompute centroids; drop empties and compact indices.
        std::vector<std::vector<double>> sums(centers.size(),
                                              std::vector<double>(dim, 0.0));
        std::vector<std::int64_t> sizes(centers.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(result.assignment[i]);
            ++sizes[c];
            for (const auto& [idx, w] : docs[i]) {
                sums[c][static_cast<std::size_t>(idx)] += w;
            }
        }
        std::vector<int> remap(centers.size(), -1);
        std::vector<std::vector<double>> next;
        for (std::size_t c = 0; c < centers.size(); ++c) {
            if (sizes[c] == 0) continue;
            remap[c] = static_cast<int>(next.size());
            normalize_dense(sums[c]);
            next.push_back(std::move(sums[c]));
        }
        const bool dropped = next.size() != centers.size();
        centers = std::move(next);
        if (dropped) {
            for (auto& a : result.assignment) a = remap[static_cast<std::size_t>(a)];
            changed = true;
        }
        if (!changed && iter > 0) break;
    }

    result.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(result.assignment[i]);
        result.inertia += 1.0 - dot_dense(docs[i], centers[c]);
    }
    result.centroids = std::move(centers);
    return result;
}

Clustering kmeans(const std::vector<SparseVec>& docs, std::size_t dim, int k,
                  Rng& rng) {
    Clustering best;
    bool have = false;
    const int restarts = k > 1 ? kKMeansRestarts : 1;
    for (int r = 0; r < restarts; ++r) {
        Clustering c = kmeans_once(docs, dim, k, rng);
        if (!have || c.inertia < best.inertia) {
            best = std::move(c);
            have = true;
        }
    }
    return best;
}

// Mean silhouette on 1-cos distance. Sampled deterministically above the cap;
// a and b terms always run over full cluster memberships.
double mean_silhouette(const std::vector<SparseVec>& docs,
                       const std::vector<int>& assignment, int num_clusters,
                       std::uint64_t seed) {
    const std::size_t n = docs.size();
    if (num_clusters < 2) return -1.0;

    std::vector<std::vector<std::size_t>> members(
        static_cast<std::size_t>(num_clusters));
    for (std::size_t i = 0; i < n; ++i) {
        members[static_cast<std::size_t>(assignment[i])].push_back(i);
    }

    std::vector<std::size_t> sample(n);
    std::iota(sample.begin(), sample.end(), 0);
    if (n > kSilhouetteSampleCap) {
        Rng rng(mix_seed(seed, 0x51));
        rng.shuffle(sample);
        sample.resize(kSilhouetteSampleCap);
        std::sort(sample.begin(), sample.end());
    }

    double total = 0.0;
    for (const std::size_t i : sample) {
        const auto own = static_cast<std::size_t>(assignment[i]);
        if (members[own].size() <= 1) continue;  // singleton: s = 0
        double a = 0.0;
        for (const std::size_t j : members[own]) {
            if (j == i) continue;
            a += 1.0 - sparse_dot(docs[i], docs[j]);
        }
        a /= static_cast<double>(members[own].size() - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < members.size(); ++c) {
            if (c == own || members[c].empty()) continue;
            double d = 0.0;
            for (const std::size_t j : members[c]) {
                d += 1.0 - sparse_dot(docs[i], docs[j]);
            }
            d /= static_cast<double>(members[c].size());
            b = std::min(b, d);
        }
        if (!std::isfinite(b)) continue;
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(sample.size());
}

SparseVec sparsify(const std::vector<double>& dense) {
    SparseVec out;
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (dense[i] != 0.0) out.emplace_back(static_cast<std::int32_t>(i), dense[i]);
    }
    return out;
}

// Class-based tf-idf: term frequency within the cluster scaled by
// log(1 + total docs / corpus document frequency). Ties break on the word.
std::vector<ScoredWord> score_cluster_words(const Corpus& corpus,
                                            const std::vector<std::size_t>& member_idx,
                                            const VectorSpace& space) {
    std::map<std::string, std::int64_t> tf;
    for (const std::size_t i : member_idx) {
        for (const auto& tok : corpus.instances[i].tokens) ++tf[tok];
    }
    std::vector<ScoredWord> scored;
    scored.reserve(tf.size());
    for (const auto& [term, count] : tf) {
        const auto it = std::lower_bound(space.vocab.begin(), space.vocab.end(), term);
        const auto df = space.doc_freq[static_cast<std::size_t>(it - space.vocab.begin())];
        scored.push_back({term, static_cast<double>(count) * idf(space.total_docs, df)});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredWord& a, const ScoredWord& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.word < b.word;
    });
    if (scored.size() > kRepWordCap) scored.resize(kRepWordCap);
    return scored;
}

struct SweepResult {
    Clustering best;
    std::vector<std::pair<int, double>> scores;
};

// The candidate counts share one generator stream, so the sweep is a pure
// function of (docs, seed).
SweepResult run_sweep(const std::vector<SparseVec>& docs, std::size_t dim,
                      int k_hi, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x7071));
    SweepResult result;
    if (k_hi < 2) {
        result.best = kmeans(docs, dim, 1, rng);
        return result;
    }
    double best_score = -2.0;
    for (int k = 2; k <= k_hi; ++k) {
        Clustering c = kmeans(docs, dim, k, rng);
        const double score = mean_silhouette(
            docs, c.assignment, static_cast<int>(c.centroids.size()), seed);
        result.scores.emplace_back(k, score);
        if (score > best_score) {
            best_score = score;
            result.best = std::move(c);
        }
    }
    return result;
}

TopicParams resolve_params(const TopicParams& params, std::size_t corpus_size) {
    TopicParams resolved = params;
    if (resolved.min_cluster_size == 0) {
        resolved.min_cluster_size =
            std::max<int>(15, static_cast<int>(corpus_size / 100));
    }
    if (resolved.min_cluster_size < 2) {
        throw Error("min_cluster_size must be >= 2");
    }
    if (resolved.max_topics < 1) throw Error("max_topics must be >= 1");
    if (resolved.outlier_similarity_threshold < 0.0 ||
        resolved.outlier_similarity_threshold > 1.0) {
        throw Error("outlier_similarity_threshold must lie in [0, 1]");
    }
    return resolved;
}

}  // namespace

TopicModel fit_topics(const Corpus& corpus, const TopicParams& params) {
    const std::size_t n = corpus.instances.size();
    const TopicParams resolved = resolve_params(params, n);
    if (n < static_cast<std::size_t>(resolved.min_cluster_size)) {
        throw CorpusTooSmallError(
            "corpus has " + std::to_string(n) + " instances; need at least " +
            std::to_string(resolved.min_cluster_size));
    }

    VectorSpace space = build_vector_space(corpus);

    TopicModel model;
    model.params = resolved;
    model.vocab = space.vocab;
    model.doc_freq = space.doc_freq;
    model.total_docs = space.total_docs;

    // topic id per corpus index; -1 = outlier
    std::vector<int> final_topic(n, kOutlierTopic);

    if (corpus.all_topics_assigned()) {
        // Externally supplied topics win over fitting. Ids are renumbered to
        // 0..K-1 in ascending id order when not already contiguous.
        const auto distinct = corpus.topic_ids(false);
        std::map<int, int> renumber;
        for (std::size_t i = 0; i < distinct.size(); ++i) {
            renumber[distinct[i]] = static_cast<int>(i);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int t = *corpus.instances[i].topic;
            final_topic[i] = t == kOutlierTopic ? kOutlierTopic : renumber.at(t);
        }
        model.num_topics = static_cast<int>(distinct.size());
        if (model.num_topics == 0) {
            throw CorpusTooSmallError("corpus has only outlier topic labels");
        }
    } else {
        const int k_hi = std::min<int>(resolved.max_topics, static_cast<int>(n));
        Clustering best =
            run_sweep(space.docs, space.vocab.size(), k_hi, resolved.seed).best;

        // Outlier pass, then small-cluster merge.
        std::vector<int> cluster_of(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(best.assignment[i]);
            const double sim = dot_dense(space.docs[i], best.centroids[c]);
            cluster_of[i] = sim < resolved.outlier_similarity_threshold
                                ? kOutlierTopic
                                : best.assignment[i];
        }
        std::vector<std::int64_t> sizes(best.centroids.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (cluster_of[i] >= 0) ++sizes[static_cast<std::size_t>(cluster_of[i])];
        }
        std::vector<bool> keep(best.centroids.size(), false);
        bool any = false;
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            if (sizes[c] >= resolved.min_cluster_size) {
                keep[c] = true;
                any = true;
            }
        }
        if (!any) {
            // Everything fell below the minimum size; retain the largest
            // cluster so the model always has at least one topic.
            const auto largest = static_cast<std::size_t>(std::distance(
                sizes.begin(), std::max_element(sizes.begin(), sizes.end())));
            keep[largest] = true;
        }
        // Renumber surviving clusters by size descending, original index tie.
        std::vector<std::size_t> order;
        for (std::size_t c = 0; c < keep.size(); ++c) {
            if (keep[c]) order.push_back(c);
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (sizes[a] != sizes[b]) return sizes[a] > sizes[b];
            return a < b;
        });
        std::vector<int> remap(keep.size(), kOutlierTopic);
        for (std::size_t r = 0; r < order.size(); ++r) {
            remap[order[r]] = static_cast<int>(r);
        }
        for (std::size_t i = 0; i < n; ++i) {
            final_topic[i] = cluster_of[i] == kOutlierTopic
                                 ? kOutlierTopic
                                 : remap[static_cast<std::size_t>(cluster_of[i])];
        }
        model.num_topics = static_cast<int>(order.size());
    }

    // Assignments, centroids and representative words from the final topics.
    std::vector<std::vector<std::size_t>> members(
        static_cast<std::size_t>(model.num_topics));
    for (std::size_t i = 0; i < n; ++i) {
        model.assignments[corpus.instances[i].id] = final_topic[i];
        if (final_topic[i] >= 0) {
            members[static_cast<std::size_t>(final_topic[i])].push_back(i);
        }
    }
    model.centroids.resize(static_cast<std::size_t>(model.num_topics));
    model.rep_words.resize(static_cast<std::size_t>(model.num_topics));
    for (std::size_t t = 0; t < members.size(); ++t) {
        std::vector<double> sum(space.vocab.size(), 0.0);
        for (const std::size_t i : members[t]) {
            for (const auto& [idx, w] : space.docs[i]) {
                sum[static_cast<std::size_t>(idx)] += w;
            }
        }
        normalize_dense(sum);
        model.centroids[t] = sparsify(sum);
        model.rep_words[t] = score_cluster_words(corpus, members[t], space);
    }
    return model;
}

Corpus assign_topics(const TopicModel& model, const Corpus& corpus, bool strict) {
    Corpus out = corpus;
    for (auto& inst : out.instances) {
        const auto it = model.assignments.find(inst.id);
        if (it != model.assignments.end()) {
            inst.topic = it->second;
            continue;
        }
        if (strict) {
            throw UnknownInstanceError("instance not covered by topic model: " +
                                       inst.id);
        }
        if (inst.topic) continue;  // externally supplied label wins
        const SparseVec vec =
            vectorize(inst.tokens, model.vocab, model.doc_freq, model.total_docs);
        int best = kOutlierTopic;
        double best_sim = -2.0;
        for (std::size_t c = 0; c < model.centroids.size(); ++c) {
            const double sim = sparse_dot(vec, model.centroids[c]);
            if (sim > best_sim) {
                best_sim = sim;
                best = static_cast<int>(c);
            }
        }
        inst.topic = (best_sim < model.params.outlier_similarity_threshold)
                         ? kOutlierTopic
                         : best;
    }
    return out;
}

std::vector<std::pair<int, double>> silhouette_sweep(const Corpus& corpus,
                                                     const TopicParams& params) {
    const TopicParams resolved = resolve_params(params, corpus.instances.size());
    const VectorSpace space = build_vector_space(corpus);
    const int k_hi =
        std::min<int>(resolved.max_topics, static_cast<int>(corpus.instances.size()));
    return run_sweep(space.docs, space.vocab.size(), k_hi, resolved.seed).scores;
}

std::vector<ScoredWord> representative_words(const TopicModel& model, int topic,
                                             int k) {
    if (k < 1) throw Error("k must be >= 1");
    if (topic == kOutlierTopic) {
        throw OutlierTopicHasNoWordsError("the outlier topic has no representative words");
    }
    if (topic < 0 || topic >= model.num_topics) {
        throw UnknownTopicError("unknown topic id: " + std::to_string(topic));
    }
    const auto& words = model.rep_words[static_cast<std::size_t>(topic)];
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(k), words.size());
    return {words.begin(), words.begin() + static_cast<std::ptrdiff_t>(count)};
}

std::string topic_model_to_json(const TopicModel& model) {
    json obj;
    obj["format_version"] = 1;
    obj["num_topics"] = model.num_topics;
    obj["params"] = {
        {"min_cluster_size", model.params.min_cluster_size},
        {"max_topics", model.params.max_topics},
        {"outlier_similarity_threshold", model.params.outlier_similarity_threshold},
        {"seed", model.params.seed},
    };
    obj["assignments"] = model.assignments;
    json rep = json::array();
    for (const auto& words : model.rep_words) {
        json list = json::array();
        for (const auto& w : words) list.push_back({w.word, w.score});
        rep.push_back(std::move(list));
    }
    obj["rep_words"] = std::move(rep);
    json vocab = json::array();
    for (std::size_t i = 0; i < model.vocab.size(); ++i) {
        vocab.push_back({model.vocab[i], model.doc_freq[i]});
    }
    obj["vocab"] = std::move(vocab);
    obj["total_docs"] = model.total_docs;
    obj["centroids"] = model.centroids;
    return obj.dump(2) + "\n";
}

void save_topic_model(const TopicModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write topic model: " + path.string());
    out << topic_model_to_json(model);
    if (!out) throw IoError("write failed: " + path.string());
}

TopicModel load_topic_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open topic model: " + path.string());
    json obj = json::parse(in, nullptr, false);
    if (obj.is_discarded()) throw IoError("topic model is not valid JSON: " + path.string());
    TopicModel model;
    model.num_topics = obj.at("num_topics").get<int>();
    const auto& p = obj.at("params");
    model.params.min_cluster_size = p.at("min_cluster_size").get<int>();
    model.params.max_topics = p.at("max_topics").get<int>();
    model.params.outlier_similarity_threshold =
        p.at("outlier_similarity_threshold").get<double>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    model.assignments = obj.at("assignments").get<std::map<std::string, int>>();
    for (const auto& list : obj.at("rep_words")) {
        std::vector<ScoredWord> words;
        for (const auto& w : list) {
            words.push_back({w.at(0).get<std::string>(), w.at(1).get<double>()});
        }
        model.rep_words.push_back(std::move(words));
    }
    for (const auto& entry : obj.at("vocab")) {
        model.vocab.push_back(entry.at(0).get<std::string>());
        model.doc_freq.push_back(entry.at(1).get<std::int64_t>());
    }
    model.total_docs = obj.at("total_docs").get<std::int64_t>();
    model.centroids =
        obj.at("centroids")
            .get<std::vector<std::vector<std::pair<std::int32_t, double>>>>();
    return model;
}

}  // namespace biaslens
