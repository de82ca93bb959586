#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biaslens/corpus.hpp"
#include "biaslens/topics.hpp"
#include "biaslens/train.hpp"

namespace biaslens {

// One leave-one-topic-out fold: the held-out topic and the topics trained
// on. Every training topic also contributes one in-topic test slice.
struct FoldSpec {
    int held_out_topic = 0;
    std::vector<int> train_topics;  // ascending, excludes held-out and outlier
};

// One fold per non-outlier topic, ascending. Throws TooFewTopicsError below
// two topics.
std::vector<FoldSpec> make_folds(const Corpus& corpus);

struct MitigationSetting {
    enum class Kind { Baseline, WordRemoval, GradientReversal };

    Kind kind = Kind::Baseline;
    int k = 10;           // WordRemoval: words masked per topic
    double lambda = 0.1;  // GradientReversal strength

    static MitigationSetting baseline() { return {Kind::Baseline, 0, 0.0}; }
    static MitigationSetting word_removal(int k) {
        return {Kind::WordRemoval, k, 0.0};
    }
    static MitigationSetting gradient_reversal(double lambda) {
        return {Kind::GradientReversal, 0, lambda};
    }

    // "bl", "wr" or "gr".
    std::string tag() const;
};

// Replaces every token that appears in the union of each topic's top-k
// representative words with the mask placeholder. Token counts are
// preserved; the text is rebuilt from the masked tokens. Applied corpus-wide
// so training and test text pass through the identical function.
Corpus mask_topic_words(const Corpus& corpus, const TopicModel& model, int k);

// The set of words mask_topic_words would replace.
std::vector<std::string> masked_word_list(const TopicModel& model, int k);

struct PredictionRecord {
    std::string id;
    std::string text;  // the text the classifier saw (masked under wr)
    int topic = 0;
    int fold = 0;  // held-out topic of the fold that produced the prediction
    std::vector<std::string> gold;
    std::vector<std::string> predicted;
    bool crosstopic = false;
};

struct SkippedFold {
    int topic = 0;
    std::string reason;
};

struct ExperimentReport {
    std::string corpus_name;
    SchemeKind scheme_kind = SchemeKind::Emotion;
    MitigationSetting setting;
    std::vector<int> topics;  // fold order; matrix rows/cols use this order
    int runs = 0;
    std::uint64_t seed = 0;
    bool weight_by_size = false;

    // matrix[f][e]: mean micro-F1 over runs when training without topics[f]
    // and evaluating on topics[e]. Diagonal = cross-topic, off-diagonal =
    // in-topic. NaN rows mark skipped folds.
    std::vector<std::vector<double>> matrix;
    std::vector<std::vector<std::vector<double>>> raw_scores;  // [f][e][run]
    std::vector<std::int64_t> crosstopic_sizes;  // instances behind each diagonal cell
    std::vector<std::vector<std::int64_t>> intopic_sizes;  // [f][e] slice sizes
    std::vector<SkippedFold> skipped_folds;
    std::vector<PredictionRecord> predictions;  // from run 0

    double mean_crosstopic() const;
    double mean_intopic() const;
    double gap() const { return mean_intopic() - mean_crosstopic(); }
};

// Protocol and classifier knobs around the TrainConfig.
struct ExperimentConfig {
    TrainConfig train;
    int hash_bits = 15;  // hash_dimension = 1 << hash_bits
    std::uint64_t hash_seed = 0x42;
    int hidden_units = 768;
    double dropout_rate = 0.5;
    FeatureWeighting weighting = FeatureWeighting::Binary;
    double test_fraction = 0.2;  // per-topic in-topic holdout
    bool weight_by_size = false;
    bool include_outliers = false;  // treat the outlier topic as a regular topic
    int threads = 0;                // 0: hardware default, capped by BIASLENS_THREADS
};

// The per-topic in-topic test slice one run of the protocol holds out,
// keyed by topic id (ids sorted). Slices depend on (seed, run, topic) only,
// never on the setting, so regimes stay comparable.
std::map<int, std::vector<std::string>> protocol_test_slices(
    const Corpus& corpus, const ExperimentConfig& config, int run);

// Runs the full leave-one-topic-out protocol for one mitigation setting:
// per fold and run, trains on the training-topic remainders and evaluates
// micro-F1 on each topic's seeded test slice (the held-out topic supplies
// all of its instances). The topic model may be null when the corpus already
// carries topic fields and the setting needs no masking.
ExperimentReport run_setting(const Corpus& corpus, const TopicModel* model,
                             const MitigationSetting& setting,
                             const ExperimentConfig& config);

// Mean scores and deltas across settings, Table-style: per setting the
// cross-topic mean, in-topic mean and their gap, plus differences against
// the baseline within each regime.
struct DeltaTable {
    std::string corpus_name;
    std::vector<std::string> settings;  // tags, baseline first
    std::map<std::string, double> crosstopic;
    std::map<std::string, double> intopic;
    std::map<std::string, double> gap;

    double delta_vs_baseline_crosstopic(const std::string& tag) const;
    double delta_vs_baseline_intopic(const std::string& tag) const;
};

// Requires one Baseline report; all reports must share corpus and folds.
DeltaTable compute_deltas(const std::vector<ExperimentReport>& reports);

// Full precision when points is false; rounded to integer points (100 * F1)
// when true, with deltas computed on the rounded operands.
void write_delta_csv(const DeltaTable& table, const std::filesystem::path& path,
                     bool points);

struct ExampleRow {
    std::string id;
    std::string text;
    int topic = 0;
    std::string gold;
    std::vector<std::string> predictions;  // aligned with the report order
    int disagreement = 0;
};

// The n cross-topic instances whose predictions disagree most across
// settings (ties by id). Text comes from the passed corpus, so masked
// settings still display the original wording.
std::vector<ExampleRow> export_examples(const std::vector<ExperimentReport>& reports,
                                        const Corpus& corpus, int n);

void write_examples_csv(const std::vector<ExampleRow>& rows,
                        const std::vector<std::string>& setting_tags,
                        const std::filesystem::path& path);

// Long-format CSV: held_out_topic,eval_topic,setting,f1,crosstopic.
void write_matrix_csv(const ExperimentReport& report,
                      const std::filesystem::path& path);

void save_report(const ExperimentReport& report, const std::filesystem::path& path);
ExperimentReport load_report(const std::filesystem::path& path);
std::string report_to_json(const ExperimentReport& report);

}  // namespace biaslens
