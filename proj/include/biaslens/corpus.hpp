#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biaslens/errors.hpp"

namespace biaslens {

inline constexpr int kOutlierTopic = -1;

enum class SchemeKind { Emotion, Appraisal };
enum class LabelSetting { SingleLabel, MultiLabel };

const char* to_string(SchemeKind kind);
const char* to_string(LabelSetting setting);

// Ordered label set plus the annotation setting. Label order is part of the
// scheme identity: classifier heads and association matrices index into it.
struct LabelScheme {
    SchemeKind kind = SchemeKind::Emotion;
    LabelSetting setting = LabelSetting::SingleLabel;
    std::vector<std::string> labels;

    int index_of(const std::string& label) const;
    bool contains(const std::string& label) const { return index_of(label) >= 0; }

    // Throws Error on empty/duplicate labels or an Appraisal scheme that is
    // not multi-label.
    void validate() const;

    bool operator==(const LabelScheme&) const = default;
};

// The nine-label inter-corpora emotion scheme. The setting follows the
// source corpus being mapped (single- and multi-label corpora both map
// onto the same label set).
LabelScheme unified_emotion_scheme(LabelSetting setting = LabelSetting::SingleLabel);

// The ten named inter-corpora appraisal dimensions. (The unified scheme is
// described as eleven dimensions in places, but only ten are ever named;
// this toolkit ships the ten named ones.)
LabelScheme unified_appraisal_scheme();

struct Instance {
    std::string id;
    std::string text;
    std::vector<std::string> tokens;     // tokenize(text)
    std::optional<int> topic;            // kOutlierTopic = outlier; nullopt = unassigned
    std::vector<int> labels;             // indices into the scheme, sorted ascending

    bool operator==(const Instance&) const = default;
};

struct Corpus {
    std::string name;
    LabelScheme scheme;
    std::vector<Instance> instances;

    // Distinct topic ids present among instances, ascending. The outlier id
    // is included only when include_outlier is set.
    std::vector<int> topic_ids(bool include_outlier = false) const;

    bool all_topics_assigned() const;

    // Label names for one instance, in scheme order.
    std::vector<std::string> label_names(const Instance& inst) const;

    bool operator==(const Corpus&) const = default;
};

enum class CorpusFormat { JsonLines, Csv };

// Loads a corpus and validates it against the given scheme. Collects all
// per-record failures and throws CorpusLoadError if any record is rejected.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const LabelScheme& scheme);

// Single-argument form: infers the scheme from the data (labels sorted
// lexicographically; single-label iff every record carries exactly one).
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

// Writes JSON Lines: {"id": str, "text": str, "labels": [str], "topic": int?}.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Maps each source label onto a unified label or drops it (nullopt entry).
struct LabelMapping {
    std::string source_scheme;
    std::map<std::string, std::optional<std::string>> entries;

    // True when more than one source label maps onto this target.
    bool is_aggregated(const std::string& target) const;
};

// Built-in mapping from commonly used emotion label names onto the unified
// emotion scheme (e.g. happiness -> joy, guilt -> shame).
LabelMapping builtin_emotion_mapping();

// Mapping files: JSON object {source_label: target_label | null}.
LabelMapping load_label_mapping(const std::filesystem::path& path);

// Rewrites every instance's label set through the mapping. Dropped labels
// are removed; instances whose label set becomes empty are removed. Throws
// UnmappedLabelError when a corpus label has no entry.
Corpus map_labels(const Corpus& corpus, const LabelMapping& mapping,
                  const LabelScheme& target);

}  // namespace biaslens
