#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biaslens/association.hpp"
#include "biaslens/corpus.hpp"

namespace biaslens {

// Controls for a synthetic corpus with a known topic-label joint
// distribution. Topic vocabularies are pairwise disjoint and disjoint from
// the cue words, so topic membership is a perfectly available spurious
// feature while cue words carry the label signal independently of topic.
struct SynthSpec {
    int num_topics = 4;
    LabelScheme labels;
    int instances_per_topic = 2500;
    // Probability that an instance's label is its topic's designated label
    // rather than a uniform draw.
    double rho = 0.8;
    int topic_vocab_size = 50;
    std::vector<std::vector<std::string>> cue_words;  // per label; defaulted when empty
    // Probability that one token is replaced by a cue word of the label.
    double cue_strength = 0.9;
    int doc_length = 12;
    std::uint64_t seed = 0;

    // Designated label index for a topic (round-robin).
    int designated(int topic) const {
        return topic % static_cast<int>(labels.labels.size());
    }
};

// Spec with generated label names (drawn from the unified emotion scheme
// when num_labels allows, synthetic names otherwise).
SynthSpec make_synth_spec(int num_topics, int num_labels);

// Generates the corpus with ground-truth topic fields populated.
Corpus generate(const SynthSpec& spec);

// Closed-form NPMI of the generator's joint distribution
// p(t, e) = (1/T) * (rho * [e == designated(t)] + (1 - rho)/|labels|).
// Requires distinct designated labels (num_topics <= |labels|).
AssociationMatrix expected_npmi(const SynthSpec& spec);

}  // namespace biaslens
