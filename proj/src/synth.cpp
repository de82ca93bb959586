#include "biaslens/synth.hpp"

#include <cmath>
#include <set>

#include "biaslens/rng.hpp"
#include "biaslens/tokenize.hpp"

namespace biaslens {

namespace {

std::string topic_word(int topic, int i) {
    return "topic" + std::to_string(topic) + "word" + std::to_string(i);
}

void validate_spec(const SynthSpec& spec) {
    if (spec.num_topics < 1) throw InvalidSpecError("num_topics must be >= 1");
    if (spec.instances_per_topic < 1) {
        throw InvalidSpecError("instances_per_topic must be >= 1");
    }
    if (spec.rho < 0.0 || spec.rho > 1.0) {
        throw InvalidSpecError("rho must lie in [0, 1]");
    }
    if (spec.cue_strength < 0.0 || spec.cue_strength > 1.0) {
        throw InvalidSpecError("cue_strength must lie in [0, 1]");
    }
    if (spec.topic_vocab_size < 1) {
        throw InvalidSpecError("topic_vocab_size must be >= 1");
    }
    if (spec.doc_length < 1) throw InvalidSpecError("doc_length must be >= 1");
    spec.labels.validate();
    if (!spec.cue_words.empty() &&
        spec.cue_words.size() != spec.labels.labels.size()) {
        throw InvalidSpecError("cue_words must have one list per label");
    }
}

std::vector<std::vector<std::string>> resolve_cues(const SynthSpec& spec) {
    if (!spec.cue_words.empty()) return spec.cue_words;
    std::vector<std::vector<std::string>> cues;
    cues.reserve(spec.labels.labels.size());
    for (const auto& label : spec.labels.labels) {
        std::vector<std::string> toks = tokenize(label);
        std::string flat = "cue";
        for (const auto& t : toks) flat += t;
        cues.push_back({flat});
    }
    return cues;
}

void check_disjoint(const SynthSpec& spec,
                    const std::vector<std::vector<std::string>>& cues) {
    std::set<std::string> seen;
    for (int t = 0; t < spec.num_topics; ++t) {
        for (int i = 0; i < spec.topic_vocab_size; ++i) {
            if (!seen.insert(topic_word(t, i)).second) {
                throw InvalidSpecError("topic vocabularies overlap");
            }
        }
    }
    for (const auto& list : cues) {
        for (const auto& cue : list) {
            if (seen.count(cue)) {
                throw InvalidSpecError("cue word collides with a topic vocabulary: " + cue);
            }
        }
    }
}

}  // namespace

SynthSpec make_synth_spec(int num_topics, int num_labels) {
    SynthSpec spec;
    spec.num_topics = num_topics;
    spec.labels.kind = SchemeKind::Emotion;
    spec.labels.setting = LabelSetting::SingleLabel;
    const auto unified = unified_emotion_scheme().labels;
    for (int i = 0; i < num_labels; ++i) {
        if (static_cast<std::size_t>(i) < unified.size()) {
            spec.labels.labels.push_back(unified[static_cast<std::size_t>(i)]);
        } else {
            spec.labels.labels.push_back("label" + std::to_string(i));
        }
    }
    return spec;
}

Corpus generate(const SynthSpec& spec) {
    validate_spec(spec);
    const auto cues = resolve_cues(spec);
    check_disjoint(spec, cues);

    const int num_labels = static_cast<int>(spec.labels.labels.size());
    Corpus corpus;
    corpus.name = "synthetic";
    corpus.scheme = spec.labels;
    corpus.instances.reserve(static_cast<std::size_t>(spec.num_topics) *
                             static_cast<std::size_t>(spec.instances_per_topic));

    Rng rng(mix_seed(spec.seed, 0x5e));
    for (int t = 0; t < spec.num_topics; ++t) {
        for (int i = 0; i < spec.instances_per_topic; ++i) {
            int label = spec.designated(t);
            if (rng.uniform() >= spec.rho) {
                label = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(num_labels)));
            }
            std::vector<std::string> tokens;
            tokens.reserve(static_cast<std::size_t>(spec.doc_length));
            for (int w = 0; w < spec.doc_length; ++w) {
                tokens.push_back(topic_word(
                    t, static_cast<int>(rng.bounded(
                           static_cast<std::uint64_t>(spec.topic_vocab_size)))));
            }
            if (rng.uniform() < spec.cue_strength) {
                const auto& list = cues[static_cast<std::size_t>(label)];
                const auto pos = static_cast<std::size_t>(
                    rng.bounded(static_cast<std::uint64_t>(spec.doc_length)));
                const auto pick = static_cast<std::size_t>(
                    rng.bounded(static_cast<std::uint64_t>(list.size())));
                tokens[pos] = list[pick];
            }

            Instance inst;
            inst.id = "synth-t" + std::to_string(t) + "-" + std::to_string(i);
            std::string text;
            for (std::size_t k = 0; k < tokens.size(); ++k) {
                if (k > 0) text += ' ';
                text += tokens[k];
            }
            inst.text = std::move(text);
            inst.tokens = std::move(tokens);
            inst.topic = t;
            inst.labels = {label};
            corpus.instances.push_back(std::move(inst));
        }
    }
    return corpus;
}

AssociationMatrix expected_npmi(const SynthSpec& spec) {
    validate_spec(spec);
    const int num_labels = static_cast<int>(spec.labels.labels.size());
    if (spec.num_topics > num_labels) {
        throw InvalidSpecError(
            "expected_npmi requires distinct designated labels "
            "(num_topics <= number of labels)");
    }
    AssociationMatrix m;
    m.labels = spec.labels.labels;
    for (int t = 0; t < spec.num_topics; ++t) m.topics.push_back(t);

    const double T = spec.num_topics;
    const double L = num_labels;
    std::vector<double> p_label(static_cast<std::size_t>(num_labels), 0.0);
    for (int e = 0; e < num_labels; ++e) {
        int designating = 0;
        for (int t = 0; t < spec.num_topics; ++t) {
            if (spec.designated(t) == e) ++designating;
        }
        p_label[static_cast<std::size_t>(e)] =
            spec.rho * designating / T + (1.0 - spec.rho) / L;
    }

    m.values.assign(static_cast<std::size_t>(spec.num_topics),
                    std::vector<double>(static_cast<std::size_t>(num_labels), 0.0));
    for (int t = 0; t < spec.num_topics; ++t) {
        for (int e = 0; e < num_labels; ++e) {
            const double joint =
                (1.0 / T) * ((spec.designated(t) == e ? spec.rho : 0.0) +
                             (1.0 - spec.rho) / L);
            const double pt = 1.0 / T;
            const double pe = p_label[static_cast<std::size_t>(e)];
            double value;
            if (joint == 0.0) {
                value = -1.0;
            } else if (joint >= 1.0 ||
                       (spec.rho == 1.0 && spec.designated(t) == e)) {
                value = 1.0;  // deterministic co-occurrence
            } else {
                const double pmi = std::log(joint / (pt * pe));
                value = pmi / -std::log(joint);
                // Clamp away round-off just outside the closed form's range.
                value = std::min(1.0, std::max(-1.0, value));
                if (spec.rho == 0.0) value = 0.0;  // exact independence
            }
            m.values[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)] = value;
        }
    }
    return m;
}

}  // namespace biaslens
