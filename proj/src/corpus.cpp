#include "biaslens/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "biaslens/tokenize.hpp"

namespace biaslens {

using nlohmann::json;

const char* to_string(SchemeKind kind) {
    return kind == SchemeKind::Emotion ? "emotion" : "appraisal";
}

const char* to_string(LabelSetting setting) {
    return setting == LabelSetting::SingleLabel ? "single" : "multi";
}

int LabelScheme::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    return -1;
}

void LabelScheme::validate() const {
    if (labels.empty()) throw Error("label scheme has no labels");
    std::set<std::string> seen;
    for (const auto& l : labels) {
        if (l.empty()) throw Error("label scheme contains an empty label name");
        if (!seen.insert(l).second) throw Error("duplicate label in scheme: " + l);
    }
    if (kind == SchemeKind::Appraisal && setting != LabelSetting::MultiLabel) {
        throw Error("appraisal schemes are always multi-label");
    }
}

LabelScheme unified_emotion_scheme(LabelSetting setting) {
    return LabelScheme{
        SchemeKind::Emotion,
        setting,
        {"anger", "disgust", "fear", "joy", "sadness", "shame", "surprise",
         "no-emotion", "other"},
    };
}

LabelScheme unified_appraisal_scheme() {
    return LabelScheme{
        SchemeKind::Appraisal,
        LabelSetting::MultiLabel,
        {"suddenness", "pleasantness", "self control", "chance control",
         "self responsibility", "other responsibility", "goal support",
         "predict consequences", "attention", "effort"},
    };
}

std::vector<int> Corpus::topic_ids(bool include_outlier) const {
    std::set<int> ids;
    for (const auto& inst : instances) {
        if (inst.topic && (include_outlier || *inst.topic != kOutlierTopic)) {
            ids.insert(*inst.topic);
        }
    }
    return {ids.begin(), ids.end()};
}

bool Corpus::all_topics_assigned() const {
    return std::all_of(instances.begin(), instances.end(),
                       [](const Instance& i) { return i.topic.has_value(); });
}

std::vector<std::string> Corpus::label_names(const Instance& inst) const {
    std::vector<std::string> names;
    names.reserve(inst.labels.size());
    for (const int idx : inst.labels) {
        names.push_back(scheme.labels.at(static_cast<std::size_t>(idx)));
    }
    return names;
}

namespace {

struct RawRecord {
    std::size_t line = 0;
    std::string id;
    std::string text;
    std::vector<std::string> labels;
    std::optional<int> topic;
};

void parse_jsonl(std::istream& in, std::vector<RawRecord>& records,
                 std::vector<RecordError>& errors) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                              "not a JSON object"});
            continue;
        }
        RawRecord rec;
        rec.line = lineno;
        if (!obj.contains("id") || !obj["id"].is_string()) {
            errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                              "missing string field 'id'"});
            continue;
        }
        if (!obj.contains("text") || !obj["text"].is_string()) {
            errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                              "missing string field 'text'"});
            continue;
        }
        if (!obj.contains("labels") || !obj["labels"].is_array()) {
            errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                              "missing array field 'labels'"});
            continue;
        }
        rec.id = obj["id"].get<std::string>();
        rec.text = obj["text"].get<std::string>();
        bool bad_label = false;
        for (const auto& l : obj["labels"]) {
            if (!l.is_string()) {
                bad_label = true;
                break;
            }
            rec.labels.push_back(l.get<std::string>());
        }
        if (bad_label) {
            errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                              "'labels' must contain strings"});
            continue;
        }
        if (obj.contains("topic") && !obj["topic"].is_null()) {
            if (!obj["topic"].is_number_integer()) {
                errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                                  "'topic' must be an integer"});
                continue;
            }
            const int t = obj["topic"].get<int>();
            if (t < kOutlierTopic) {
                errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                                  "'topic' must be >= -1"});
                continue;
            }
            rec.topic = t;
        }
        records.push_back(std::move(rec));
    }
}

// Minimal RFC-4180 reader: quoted fields, "" escapes, embedded newlines.
// Returns one row per call; false at end of input.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields,
                  std::size_t& lineno) {
    fields.clear();
    int c = in.get();
    if (c == EOF) return false;
    ++lineno;
    std::string field;
    bool quoted = false;
    while (true) {
        if (c == EOF) {
            fields.push_back(field);
            return true;
        }
        if (quoted) {
            if (c == '"') {
                const int next = in.peek();
                if (next == '"') {
                    in.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++lineno;
                field.push_back(static_cast<char>(c));
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c == '\r') {
            // swallow; CRLF handled at '\n'
        } else if (c == '\n') {
            fields.push_back(field);
            return true;
        } else {
            field.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
}

std::vector<std::string> split_multi(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : s) {
        if (c == sep) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// CSV ingestion: header row with id,text,labels[,topic]; multi-label cells
// use '|' separators.
void parse_csv(std::istream& in, std::vector<RawRecord>& records,
               std::vector<RecordError>& errors) {
    std::vector<std::string> fields;
    std::size_t lineno = 0;
    if (!read_csv_row(in, fields, lineno)) return;
    int id_col = -1, text_col = -1, labels_col = -1, topic_col = -1;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "id") id_col = static_cast<int>(i);
        else if (fields[i] == "text") text_col = static_cast<int>(i);
        else if (fields[i] == "labels") labels_col = static_cast<int>(i);
        else if (fields[i] == "topic") topic_col = static_cast<int>(i);
    }
    if (id_col < 0 || text_col < 0 || labels_col < 0) {
        errors.push_back({1, RecordErrorKind::MalformedRecord,
                          "CSV header must name id, text and labels columns"});
        return;
    }
    while (read_csv_row(in, fields, lineno)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        const std::size_t needed = static_cast<std::size_t>(
            std::max({id_col, text_col, labels_col, topic_col})) + 1;
        if (fields.size() < needed) {
            errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                              "row has too few columns"});
            continue;
        }
        RawRecord rec;
        rec.line = lineno;
        rec.id = fields[static_cast<std::size_t>(id_col)];
        rec.text = fields[static_cast<std::size_t>(text_col)];
        rec.labels = split_multi(fields[static_cast<std::size_t>(labels_col)], '|');
        if (topic_col >= 0) {
            const std::string& t = fields[static_cast<std::size_t>(topic_col)];
            if (!t.empty()) {
                try {
                    rec.topic = std::stoi(t);
                } catch (const std::exception&) {
                    errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                                      "'topic' must be an integer"});
                    continue;
                }
                if (*rec.topic < kOutlierTopic) {
                    errors.push_back({lineno, RecordErrorKind::MalformedRecord,
                                      "'topic' must be >= -1"});
                    continue;
                }
            }
        }
        records.push_back(std::move(rec));
    }
}

Corpus build_corpus(const std::filesystem::path& path,
                    std::vector<RawRecord> records,
                    std::vector<RecordError> errors,
                    const LabelScheme& scheme) {
    Corpus corpus;
    corpus.name = path.stem().string();
    corpus.scheme = scheme;
    corpus.scheme.validate();

    std::set<std::string> seen_ids;
    for (auto& rec : records) {
        if (rec.labels.empty()) {
            errors.push_back({rec.line, RecordErrorKind::MalformedRecord,
                              "record has no labels"});
            continue;
        }
        if (!seen_ids.insert(rec.id).second) {
            errors.push_back({rec.line, RecordErrorKind::DuplicateId,
                              "duplicate id: " + rec.id});
            continue;
        }
        Instance inst;
        inst.id = std::move(rec.id);
        inst.text = std::move(rec.text);
        inst.tokens = tokenize(inst.text);
        inst.topic = rec.topic;
        bool bad = false;
        for (const auto& label : rec.labels) {
            const int idx = scheme.index_of(label);
            if (idx < 0) {
                errors.push_back({rec.line, RecordErrorKind::SchemeViolation,
                                  "label not in scheme: " + label});
                bad = true;
                break;
            }
            inst.labels.push_back(idx);
        }
        if (bad) continue;
        std::sort(inst.labels.begin(), inst.labels.end());
        inst.labels.erase(std::unique(inst.labels.begin(), inst.labels.end()),
                          inst.labels.end());
        if (scheme.setting == LabelSetting::SingleLabel && inst.labels.size() != 1) {
            errors.push_back({rec.line, RecordErrorKind::SchemeViolation,
                              "single-label scheme requires exactly one label"});
            continue;
        }
        corpus.instances.push_back(std::move(inst));
    }

    if (!errors.empty()) {
        std::ostringstream msg;
        msg << path.string() << ": rejected " << errors.size() << " record(s);"
            << " first: line " << errors.front().line << ": "
            << errors.front().message;
        throw CorpusLoadError(msg.str(), std::move(errors));
    }
    return corpus;
}

std::vector<RawRecord> read_records(const std::filesystem::path& path,
                                    CorpusFormat format,
                                    std::vector<RecordError>& errors) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path.string());
    std::vector<RawRecord> records;
    if (format == CorpusFormat::JsonLines) {
        parse_jsonl(in, records, errors);
    } else {
        parse_csv(in, records, errors);
    }
    return records;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const LabelScheme& scheme) {
    std::vector<RecordError> errors;
    auto records = read_records(path, format, errors);
    return build_corpus(path, std::move(records), std::move(errors), scheme);
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    std::vector<RecordError> errors;
    auto records = read_records(path, format, errors);

    std::set<std::string> label_set;
    bool multi = false;
    for (const auto& rec : records) {
        if (rec.labels.size() > 1) multi = true;
        label_set.insert(rec.labels.begin(), rec.labels.end());
    }
    LabelScheme scheme;
    scheme.kind = SchemeKind::Emotion;
    scheme.setting = multi ? LabelSetting::MultiLabel : LabelSetting::SingleLabel;
    scheme.labels.assign(label_set.begin(), label_set.end());
    if (scheme.labels.empty()) scheme.labels.push_back("unlabeled");
    return build_corpus(path, std::move(records), std::move(errors), scheme);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file: " + path.string());
    for (const auto& inst : corpus.instances) {
        json obj;
        obj["id"] = inst.id;
        obj["text"] = inst.text;
        obj["labels"] = corpus.label_names(inst);
        if (inst.topic) obj["topic"] = *inst.topic;
        out << obj.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

bool LabelMapping::is_aggregated(const std::string& target) const {
    int sources = 0;
    for (const auto& [src, tgt] : entries) {
        if (tgt && *tgt == target) ++sources;
    }
    return sources > 1;
}

LabelMapping builtin_emotion_mapping() {
    LabelMapping m;
    m.source_scheme = "builtin-emotion";
    const auto unified = unified_emotion_scheme();
    for (const auto& l : unified.labels) m.entries[l] = l;
    m.entries["happiness"] = "joy";
    m.entries["guilt"] = "shame";
    m.entries["positive surprise"] = "surprise";
    m.entries["negative surprise"] = "surprise";
    m.entries["no emotion"] = "no-emotion";
    m.entries["neutral"] = "no-emotion";
    m.entries["anticipation"] = "other";
    m.entries["trust"] = "other";
    m.entries["pride"] = "other";
    m.entries["boredom"] = "other";
    m.entries["relief"] = "other";
    return m;
}

LabelMapping load_label_mapping(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mapping file: " + path.string());
    json obj = json::parse(in, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        throw IoError("mapping file is not a JSON object: " + path.string());
    }
    LabelMapping m;
    m.source_scheme = path.stem().string();
    for (const auto& [key, value] : obj.items()) {
        if (value.is_null()) {
            m.entries[key] = std::nullopt;
        } else if (value.is_string()) {
            m.entries[key] = value.get<std::string>();
        } else {
            throw IoError("mapping values must be strings or null: " + key);
        }
    }
    return m;
}

Corpus map_labels(const Corpus& corpus, const LabelMapping& mapping,
                  const LabelScheme& target) {
    target.validate();
    // Resolve source index -> target index (or drop) once up front.
    std::vector<std::optional<int>> lut(corpus.scheme.labels.size());
    for (std::size_t i = 0; i < corpus.scheme.labels.size(); ++i) {
        const auto& src = corpus.scheme.labels[i];
        const auto it = mapping.entries.find(src);
        if (it == mapping.entries.end()) {
            throw UnmappedLabelError("no mapping entry for label: " + src);
        }
        if (!it->second) continue;  // DROP
        const int tgt = target.index_of(*it->second);
        if (tgt < 0) {
            throw UnmappedLabelError("mapping target not in unified scheme: " +
                                     *it->second);
        }
        lut[i] = tgt;
    }

    Corpus out;
    out.name = corpus.name;
    out.scheme = target;
    for (const auto& inst : corpus.instances) {
        std::vector<int> mapped;
        for (const int src : inst.labels) {
            if (const auto tgt = lut[static_cast<std::size_t>(src)]) {
                mapped.push_back(*tgt);
            }
        }
        std::sort(mapped.begin(), mapped.end());
        mapped.erase(std::unique(mapped.begin(), mapped.end()), mapped.end());
        if (mapped.empty()) continue;  // fully dropped
        if (target.setting == LabelSetting::SingleLabel && mapped.size() > 1) {
            throw Error("mapping produced " + std::to_string(mapped.size()) +
                        " labels under a single-label scheme (instance " +
                        inst.id + ")");
        }
        Instance copy = inst;
        copy.labels = std::move(mapped);
        out.instances.push_back(std::move(copy));
    }
    return out;
}

}  // namespace biaslens
