#include "biaslens/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "biaslens/metrics.hpp"
#include "biaslens/rng.hpp"
#include "biaslens/tokenize.hpp"

namespace biaslens {

using nlohmann::json;

std::string MitigationSetting::tag() const {
    switch (kind) {
        case Kind::Baseline:
            return "bl";
        case Kind::WordRemoval:
            return "wr";
        case Kind::GradientReversal:
            return "gr";
    }
    return "bl";
}

std::vector<FoldSpec> make_folds(const Corpus& corpus) {
    const std::vector<int> topics = corpus.topic_ids(/*include_outlier=*/false);
    if (topics.size() < 2) {
        throw TooFewTopicsError("need at least 2 non-outlier topics, found " +
                                std::to_string(topics.size()));
    }
    std::vector<FoldSpec> folds;
    folds.reserve(topics.size());
    for (const int held_out : topics) {
        FoldSpec fold;
        fold.held_out_topic = held_out;
        for (const int t : topics) {
            if (t != held_out) fold.train_topics.push_back(t);
        }
        folds.push_back(std::move(fold));
    }
    return folds;
}

std::vector<std::string> masked_word_list(const TopicModel& model, int k) {
    std::set<std::string> words;
    for (int t = 0; t < model.num_topics; ++t) {
        for (const auto& w : representative_words(model, t, k)) {
            words.insert(w.word);
        }
    }
    return {words.begin(), words.end()};
}

Corpus mask_topic_words(const Corpus& corpus, const TopicModel& model, int k) {
    const auto list = masked_word_list(model, k);
    const std::set<std::string> masked(list.begin(), list.end());
    Corpus out = corpus;
    for (auto& inst : out.instances) {
        bool changed = false;
        for (auto& tok : inst.tokens) {
            if (masked.count(tok)) {
                tok = std::string(kMaskToken);
                changed = true;
            }
        }
        if (changed) {
            std::string text;
            for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
                if (i > 0) text += ' ';
                text += inst.tokens[i];
            }
            inst.text = std::move(text);
        }
    }
    return out;
}

namespace {

bool fold_is_skipped(const ExperimentReport& report, std::size_t fold) {
    const int topic = report.topics[fold];
    return std::any_of(report.skipped_folds.begin(), report.skipped_folds.end(),
                       [topic](const SkippedFold& s) { return s.topic == topic; });
}

// Which members of a topic land in the run's in-topic test slice. A pure
// function of (seed, run, topic id, member count).
std::vector<bool> test_slice_flags(std::size_t n, std::uint64_t seed, int run,
                                   int topic_id, double test_fraction) {
    std::vector<bool> flags(n, false);
    if (n < 2) return flags;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(mix_seed(seed, 0x7e57 + static_cast<std::uint64_t>(run)),
                     static_cast<std::uint64_t>(topic_id + 2)));
    rng.shuffle(order);
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(test_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < take; ++i) flags[order[i]] = true;
    return flags;
}

unsigned resolve_thread_count(int requested, std::size_t tasks) {
    unsigned n = requested > 0 ? static_cast<unsigned>(requested)
                               : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BIASLENS_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
    }
    return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(tasks)));
}

}  // namespace

std::map<int, std::vector<std::string>> protocol_test_slices(
    const Corpus& corpus, const ExperimentConfig& config, int run) {
    const std::vector<int> topics = corpus.topic_ids(config.include_outliers);
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
        const auto& inst = corpus.instances[i];
        if (!inst.topic) {
            throw MissingTopicAssignmentError("instance has no topic: " + inst.id);
        }
        members[*inst.topic].push_back(i);
    }
    std::map<int, std::vector<std::string>> slices;
    for (const int t : topics) {
        const auto& idx = members.at(t);
        const auto flags = test_slice_flags(idx.size(), config.train.seed, run, t,
                                            config.test_fraction);
        std::vector<std::string> ids;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (flags[k]) ids.push_back(corpus.instances[idx[k]].id);
        }
        std::sort(ids.begin(), ids.end());
        slices[t] = std::move(ids);
    }
    return slices;
}

double ExperimentReport::mean_crosstopic() const {
    double num = 0.0, den = 0.0;
    for (std::size_t f = 0; f < topics.size(); ++f) {
        if (fold_is_skipped(*this, f)) continue;
        const double w =
            weight_by_size ? static_cast<double>(crosstopic_sizes[f]) : 1.0;
        num += w * matrix[f][f];
        den += w;
    }
    return den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

double ExperimentReport::mean_intopic() const {
    double num = 0.0, den = 0.0;
    for (std::size_t f = 0; f < topics.size(); ++f) {
        if (fold_is_skipped(*this, f)) continue;
        double fold_num = 0.0, fold_den = 0.0;
        for (std::size_t e = 0; e < topics.size(); ++e) {
            if (e == f) continue;
            const double w =
                weight_by_size ? static_cast<double>(intopic_sizes[f][e]) : 1.0;
            fold_num += w * matrix[f][e];
            fold_den += w;
        }
        if (fold_den == 0.0) continue;
        const double fold_weight = weight_by_size ? fold_den : 1.0;
        num += fold_weight * (fold_num / fold_den);
        den += fold_weight;
    }
    return den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

ExperimentReport run_setting(const Corpus& corpus, const TopicModel* model,
                             const MitigationSetting& setting,
                             const ExperimentConfig& config) {
    config.train.validate();
    if (config.test_fraction <= 0.0 || config.test_fraction >= 1.0) {
        throw Error("test_fraction must lie in (0, 1)");
    }

    Corpus working = corpus;
    if (!working.all_topics_assigned()) {
        if (model == nullptr) {
            throw MissingTopicAssignmentError(
                "corpus has unassigned topics and no topic model was given");
        }
        working = assign_topics(*model, working);
        if (!working.all_topics_assigned()) {
            throw MissingTopicAssignmentError(
                "topic model left instances unassigned");
        }
    }
    if (setting.kind == MitigationSetting::Kind::WordRemoval) {
        if (model == nullptr) {
            throw Error("word removal requires a topic model");
        }
        if (setting.k < 1) throw Error("word removal requires k >= 1");
        // Masking precedes splitting and applies corpus-wide.
        working = mask_topic_words(working, *model, setting.k);
    }
    if (setting.kind == MitigationSetting::Kind::GradientReversal &&
        setting.lambda < 0.0) {
        throw Error("lambda must be >= 0");
    }

    const std::vector<int> topics = working.topic_ids(config.include_outliers);
    if (topics.size() < 2) {
        throw TooFewTopicsError("need at least 2 topics for the protocol, found " +
                                std::to_string(topics.size()));
    }
    const std::size_t num_topics = topics.size();
    std::map<int, std::size_t> topic_pos;
    for (std::size_t i = 0; i < num_topics; ++i) topic_pos[topics[i]] = i;

    std::vector<std::vector<std::size_t>> members(num_topics);
    for (std::size_t i = 0; i < working.instances.size(); ++i) {
        const int t = *working.instances[i].topic;
        const auto it = topic_pos.find(t);
        if (it != topic_pos.end()) members[it->second].push_back(i);
    }

    const int runs = config.train.runs;
    // Seeded per-topic test slices, shared across folds and settings within a
    // run so the regimes stay comparable.
    std::vector<std::vector<std::vector<bool>>> in_test(
        static_cast<std::size_t>(runs),
        std::vector<std::vector<bool>>(num_topics));
    for (int r = 0; r < runs; ++r) {
        for (std::size_t t = 0; t < num_topics; ++t) {
            in_test[static_cast<std::size_t>(r)][t] =
                test_slice_flags(members[t].size(), config.train.seed, r,
                                 topics[t], config.test_fraction);
        }
    }

    ExperimentReport report;
    report.corpus_name = working.name;
    report.scheme_kind = working.scheme.kind;
    report.setting = setting;
    report.topics = topics;
    report.runs = runs;
    report.seed = config.train.seed;
    report.weight_by_size = config.weight_by_size;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.matrix.assign(num_topics, std::vector<double>(num_topics, nan));
    report.raw_scores.assign(
        num_topics, std::vector<std::vector<double>>(
                        num_topics, std::vector<double>(
                                        static_cast<std::size_t>(runs), nan)));
    report.crosstopic_sizes.assign(num_topics, 0);
    report.intopic_sizes.assign(num_topics, std::vector<std::int64_t>(num_topics, 0));
    for (std::size_t f = 0; f < num_topics; ++f) {
        report.crosstopic_sizes[f] =
            static_cast<std::int64_t>(members[f].size());
    }

    const std::size_t total_tasks = num_topics * static_cast<std::size_t>(runs);
    std::vector<std::exception_ptr> task_errors(total_tasks);
    std::vector<std::vector<PredictionRecord>> fold_predictions(num_topics);

    const auto run_task = [&](std::size_t task) {
        const std::size_t f = task / static_cast<std::size_t>(runs);
        const int r = static_cast<int>(task % static_cast<std::size_t>(runs));
        const auto& test_flags = in_test[static_cast<std::size_t>(r)];

        // Training set: every topic except the held-out one, minus its test
        // slice. The held-out topic never contributes training instances.
        std::vector<Instance> train_set;
        for (std::size_t t = 0; t < num_topics; ++t) {
            if (t == f) continue;
            for (std::size_t k = 0; k < members[t].size(); ++k) {
                if (!test_flags[t][k]) {
                    train_set.push_back(working.instances[members[t][k]]);
                }
            }
        }

        ModelSkeleton skeleton;
        skeleton.feature_space.hash_dimension = 1 << config.hash_bits;
        skeleton.feature_space.hash_seed = config.hash_seed;
        skeleton.feature_space.weighting = config.weighting;
        skeleton.hidden_units = config.hidden_units;
        skeleton.dropout_rate = config.dropout_rate;
        skeleton.task_mode = working.scheme.setting == LabelSetting::SingleLabel
                                 ? TaskMode::SoftmaxCE
                                 : TaskMode::SigmoidBCE;
        skeleton.label_names = working.scheme.labels;
        if (setting.kind == MitigationSetting::Kind::GradientReversal) {
            for (std::size_t t = 0; t < num_topics; ++t) {
                if (t != f) skeleton.topic_ids.push_back(topics[t]);
            }
            skeleton.lambda = setting.lambda;
        }

        TrainConfig run_config = config.train;
        run_config.seed = config.train.seed + static_cast<std::uint64_t>(r);
        auto [trained, log] = train(train_set, skeleton, run_config);

        for (std::size_t e = 0; e < num_topics; ++e) {
            std::vector<std::size_t> eval_idx;
            if (e == f) {
                eval_idx = members[e];  // all held-out instances
            } else {
                for (std::size_t k = 0; k < members[e].size(); ++k) {
                    if (test_flags[e][k]) eval_idx.push_back(members[e][k]);
                }
            }
            if (eval_idx.empty()) continue;
            std::vector<std::vector<int>> preds;
            std::vector<std::vector<int>> golds;
            preds.reserve(eval_idx.size());
            for (const std::size_t i : eval_idx) {
                preds.push_back(predict_one(
                    trained, featurize(working.instances[i], trained.feature_space)));
                golds.push_back(working.instances[i].labels);
            }
            report.raw_scores[f][e][static_cast<std::size_t>(r)] =
                micro_f1(preds, golds);
            if (r == 0) {
                report.intopic_sizes[f][e] =
                    static_cast<std::int64_t>(eval_idx.size());
                for (std::size_t k = 0; k < eval_idx.size(); ++k) {
                    const Instance& inst = working.instances[eval_idx[k]];
                    PredictionRecord rec;
                    rec.id = inst.id;
                    rec.text = inst.text;
                    rec.topic = *inst.topic;
                    rec.fold = topics[f];
                    rec.gold = working.label_names(inst);
                    for (const int l : preds[k]) {
                        rec.predicted.push_back(
                            working.scheme.labels[static_cast<std::size_t>(l)]);
                    }
                    rec.crosstopic = e == f;
                    fold_predictions[f].push_back(std::move(rec));
                }
            }
        }
    };

    const unsigned thread_count = resolve_thread_count(config.threads, total_tasks);
    if (thread_count <= 1) {
        for (std::size_t task = 0; task < total_tasks; ++task) {
            try {
                run_task(task);
            } catch (...) {
                task_errors[task] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(thread_count);
        for (unsigned w = 0; w < thread_count; ++w) {
            workers.emplace_back([&] {
                while (true) {
                    const std::size_t task = next.fetch_add(1);
                    if (task >= total_tasks) break;
                    try {
                        run_task(task);
                    } catch (...) {
                        task_errors[task] = std::current_exception();
                    }
                }
            });
        }
        for (auto& w : workers) w.join();
    }

    // A fold whose training data is too thin is skipped with a note; any
    // other failure propagates.
    std::vector<bool> skipped(num_topics, false);
    for (std::size_t task = 0; task < total_tasks; ++task) {
        if (!task_errors[task]) continue;
        const std::size_t f = task / static_cast<std::size_t>(runs);
        try {
            std::rethrow_exception(task_errors[task]);
        } catch (const InsufficientDataError& e) {
            if (!skipped[f]) {
                skipped[f] = true;
                report.skipped_folds.push_back({topics[f], e.what()});
            }
        }
    }

    for (std::size_t f = 0; f < num_topics; ++f) {
        if (skipped[f]) {
            for (auto& row : report.raw_scores[f]) {
                std::fill(row.begin(), row.end(), nan);
            }
            continue;
        }
        report.predictions.insert(report.predictions.end(),
                                  fold_predictions[f].begin(),
                                  fold_predictions[f].end());
        for (std::size_t e = 0; e < num_topics; ++e) {
            double sum = 0.0;
            int count = 0;
            for (const double v : report.raw_scores[f][e]) {
                if (!std::isnan(v)) {
                    sum += v;
                    ++count;
                }
            }
            if (count == runs) {
                report.matrix[f][e] = sum / static_cast<double>(count);
            }
        }
    }
    return report;
}

// --- deltas -----------------------------------------------------------------

double DeltaTable::delta_vs_baseline_crosstopic(const std::string& tag) const {
    return crosstopic.at(tag) - crosstopic.at("bl");
}

double DeltaTable::delta_vs_baseline_intopic(const std::string& tag) const {
    return intopic.at(tag) - intopic.at("bl");
}

DeltaTable compute_deltas(const std::vector<ExperimentReport>& reports) {
    if (reports.empty()) throw FoldMismatchError("no reports given");
    const ExperimentReport* baseline = nullptr;
    for (const auto& r : reports) {
        if (r.setting.kind == MitigationSetting::Kind::Baseline) baseline = &r;
    }
    if (baseline == nullptr) {
        throw FoldMismatchError("delta table needs a baseline report");
    }
    DeltaTable table;
    table.corpus_name = baseline->corpus_name;
    for (const auto& r : reports) {
        if (r.corpus_name != baseline->corpus_name || r.topics != baseline->topics) {
            throw FoldMismatchError(
                "reports disagree in corpus or fold structure");
        }
        const std::string tag = r.setting.tag();
        if (table.crosstopic.count(tag)) {
            throw FoldMismatchError("duplicate setting in delta input: " + tag);
        }
        table.settings.push_back(tag);
        table.crosstopic[tag] = r.mean_crosstopic();
        table.intopic[tag] = r.mean_intopic();
        table.gap[tag] = r.gap();
    }
    return table;
}

namespace {

std::string fmt_score(double v, bool points) {
    if (std::isnan(v)) return "";
    char buf[32];
    if (points) {
        std::snprintf(buf, sizeof(buf), "%lld",
                      static_cast<long long>(std::llround(100.0 * v)));
    } else {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
    }
    return buf;
}

std::string fmt_delta(double a, double b, bool points) {
    if (std::isnan(a) || std::isnan(b)) return "";
    if (points) {
        // Differences of the rounded operands, matching how the published
        // tables are read.
        const long long d = std::llround(100.0 * a) - std::llround(100.0 * b);
        return std::to_string(d);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", a - b);
    return buf;
}

}  // namespace

void write_delta_csv(const DeltaTable& table, const std::filesystem::path& path,
                     bool points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write delta table: " + path.string());
    const bool has_wr = table.crosstopic.count("wr") > 0;
    const bool has_gr = table.crosstopic.count("gr") > 0;
    const auto get = [](const std::map<std::string, double>& m, const std::string& k) {
        const auto it = m.find(k);
        return it == m.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
    };

    out << "corpus,crosstopic_bl,crosstopic_wr,crosstopic_gr,"
           "crosstopic_delta_bl_wr,crosstopic_delta_bl_gr,"
           "intopic_bl,intopic_wr,intopic_gr,"
           "intopic_delta_bl_wr,intopic_delta_bl_gr,"
           "gap_bl,gap_wr,gap_gr\n";
    out << table.corpus_name;
    for (const auto* regime : {&table.crosstopic, &table.intopic}) {
        const double bl = get(*regime, "bl");
        const double wr = get(*regime, "wr");
        const double gr = get(*regime, "gr");
        out << ',' << fmt_score(bl, points);
        out << ',' << (has_wr ? fmt_score(wr, points) : "");
        out << ',' << (has_gr ? fmt_score(gr, points) : "");
        out << ',' << (has_wr ? fmt_delta(wr, bl, points) : "");
        out << ',' << (has_gr ? fmt_delta(gr, bl, points) : "");
    }
    {
        const double bl = get(table.gap, "bl");
        const double wr = get(table.gap, "wr");
        const double gr = get(table.gap, "gr");
        if (points) {
            // Gap in points re-derives from the rounded regime means.
            out << ',' << fmt_delta(get(table.intopic, "bl"), get(table.crosstopic, "bl"), true);
            out << ',' << (has_wr ? fmt_delta(get(table.intopic, "wr"), get(table.crosstopic, "wr"), true) : "");
            out << ',' << (has_gr ? fmt_delta(get(table.intopic, "gr"), get(table.crosstopic, "gr"), true) : "");
        } else {
            out << ',' << fmt_score(bl, false);
            out << ',' << (has_wr ? fmt_score(wr, false) : "");
            out << ',' << (has_gr ? fmt_score(gr, false) : "");
        }
    }
    out << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

// --- examples ---------------------------------------------------------------

namespace {

std::string join_labels(const std::vector<std::string>& labels) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += '|';
        out += labels[i];
    }
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::vector<ExampleRow> export_examples(const std::vector<ExperimentReport>& reports,
                                        const Corpus& corpus, int n) {
    if (reports.empty() || n < 0) return {};

    std::map<std::string, const Instance*> by_id;
    for (const auto& inst : corpus.instances) by_id[inst.id] = &inst;

    // id -> prediction per report, cross-topic records only
    struct Slot {
        std::vector<std::string> preds;
        std::vector<bool> covered;
        int topic = 0;
        std::string gold;
    };
    std::map<std::string, Slot> slots;
    for (std::size_t ri = 0; ri < reports.size(); ++ri) {
        for (const auto& rec : reports[ri].predictions) {
            if (!rec.crosstopic) continue;
            Slot& slot = slots[rec.id];
            slot.preds.resize(reports.size());
            slot.covered.resize(reports.size(), false);
            slot.preds[ri] = join_labels(rec.predicted);
            slot.covered[ri] = true;
            slot.topic = rec.topic;
            slot.gold = join_labels(rec.gold);
        }
    }

    std::vector<ExampleRow> rows;
    for (const auto& [id, slot] : slots) {
        // Only instances every report predicted on (skipped folds differ).
        if (std::find(slot.covered.begin(), slot.covered.end(), false) !=
            slot.covered.end()) {
            continue;
        }
        const auto inst_it = by_id.find(id);
        if (inst_it == by_id.end()) continue;
        ExampleRow row;
        row.id = id;
        row.text = inst_it->second->text;
        row.topic = slot.topic;
        row.gold = slot.gold;
        row.predictions = slot.preds;
        std::set<std::string> distinct(slot.preds.begin(), slot.preds.end());
        row.disagreement = static_cast<int>(distinct.size()) - 1;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const ExampleRow& a, const ExampleRow& b) {
        if (a.disagreement != b.disagreement) return a.disagreement > b.disagreement;
        return a.id < b.id;
    });
    if (rows.size() > static_cast<std::size_t>(n)) {
        rows.resize(static_cast<std::size_t>(n));
    }
    return rows;
}

void write_examples_csv(const std::vector<ExampleRow>& rows,
                        const std::vector<std::string>& setting_tags,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write examples: " + path.string());
    out << "text,topic,gold";
    for (const auto& tag : setting_tags) out << ',' << tag;
    out << '\n';
    for (const auto& row : rows) {
        out << csv_escape(row.text) << ',' << row.topic << ','
            << csv_escape(row.gold);
        for (const auto& p : row.predictions) out << ',' << csv_escape(p);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_matrix_csv(const ExperimentReport& report,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write matrix: " + path.string());
    out << "held_out_topic,eval_topic,setting,f1,crosstopic\n";
    const std::string tag = report.setting.tag();
    for (std::size_t f = 0; f < report.topics.size(); ++f) {
        for (std::size_t e = 0; e < report.topics.size(); ++e) {
            const double v = report.matrix[f][e];
            char buf[32] = "";
            if (!std::isnan(v)) std::snprintf(buf, sizeof(buf), "%.6f", v);
            out << report.topics[f] << ',' << report.topics[e] << ',' << tag << ','
                << buf << ',' << (f == e ? "true" : "false") << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

// --- report serialization ----------------------------------------------------

std::string report_to_json(const ExperimentReport& report) {
    json obj;
    obj["format_version"] = 1;
    obj["corpus"] = report.corpus_name;
    obj["scheme_kind"] = to_string(report.scheme_kind);
    json setting;
    setting["kind"] = report.setting.tag();
    if (report.setting.kind == MitigationSetting::Kind::WordRemoval) {
        setting["k"] = report.setting.k;
    }
    if (report.setting.kind == MitigationSetting::Kind::GradientReversal) {
        setting["lambda"] = report.setting.lambda;
    }
    obj["setting"] = std::move(setting);
    obj["topics"] = report.topics;
    obj["runs"] = report.runs;
    obj["seed"] = report.seed;
    obj["weight_by_size"] = report.weight_by_size;
    obj["matrix"] = report.matrix;          // NaN -> null
    obj["raw_scores"] = report.raw_scores;  // NaN -> null
    obj["crosstopic_sizes"] = report.crosstopic_sizes;
    obj["intopic_sizes"] = report.intopic_sizes;
    json skipped = json::array();
    for (const auto& s : report.skipped_folds) {
        skipped.push_back({{"topic", s.topic}, {"reason", s.reason}});
    }
    obj["skipped_folds"] = std::move(skipped);
    json summary;
    summary["mean_crosstopic"] = report.mean_crosstopic();
    summary["mean_intopic"] = report.mean_intopic();
    summary["gap"] = report.gap();
    obj["summary"] = std::move(summary);
    json preds = json::array();
    for (const auto& p : report.predictions) {
        json rec;
        rec["id"] = p.id;
        rec["text"] = p.text;
        rec["topic"] = p.topic;
        rec["fold"] = p.fold;
        rec["gold"] = p.gold;
        rec["predicted"] = p.predicted;
        rec["crosstopic"] = p.crosstopic;
        preds.push_back(std::move(rec));
    }
    obj["predictions"] = std::move(preds);
    return obj.dump(2) + "\n";
}

void save_report(const ExperimentReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + path.string());
    out << report_to_json(report);
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

double cell_from_json(const json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

}  // namespace

ExperimentReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report: " + path.string());
    json obj = json::parse(in, nullptr, false);
    if (obj.is_discarded()) throw IoError("report is not valid JSON: " + path.string());

    ExperimentReport report;
    report.corpus_name = obj.at("corpus").get<std::string>();
    report.scheme_kind = obj.at("scheme_kind").get<std::string>() == "appraisal"
                             ? SchemeKind::Appraisal
                             : SchemeKind::Emotion;
    const auto& setting = obj.at("setting");
    const std::string kind = setting.at("kind").get<std::string>();
    if (kind == "wr") {
        report.setting = MitigationSetting::word_removal(setting.at("k").get<int>());
    } else if (kind == "gr") {
        report.setting =
            MitigationSetting::gradient_reversal(setting.at("lambda").get<double>());
    } else {
        report.setting = MitigationSetting::baseline();
    }
    report.topics = obj.at("topics").get<std::vector<int>>();
    report.runs = obj.at("runs").get<int>();
    report.seed = obj.at("seed").get<std::uint64_t>();
    report.weight_by_size = obj.at("weight_by_size").get<bool>();
    for (const auto& row : obj.at("matrix")) {
        std::vector<double> r;
        for (const auto& v : row) r.push_back(cell_from_json(v));
        report.matrix.push_back(std::move(r));
    }
    for (const auto& fold : obj.at("raw_scores")) {
        std::vector<std::vector<double>> rows;
        for (const auto& row : fold) {
            std::vector<double> r;
            for (const auto& v : row) r.push_back(cell_from_json(v));
            rows.push_back(std::move(r));
        }
        report.raw_scores.push_back(std::move(rows));
    }
    report.crosstopic_sizes =
        obj.at("crosstopic_sizes").get<std::vector<std::int64_t>>();
    report.intopic_sizes =
        obj.at("intopic_sizes").get<std::vector<std::vector<std::int64_t>>>();
    for (const auto& s : obj.at("skipped_folds")) {
        report.skipped_folds.push_back(
            {s.at("topic").get<int>(), s.at("reason").get<std::string>()});
    }
    for (const auto& p : obj.at("predictions")) {
        PredictionRecord rec;
        rec.id = p.at("id").get<std::string>();
        rec.text = p.at("text").get<std::string>();
        rec.topic = p.at("topic").get<int>();
        rec.fold = p.at("fold").get<int>();
        rec.gold = p.at("gold").get<std::vector<std::string>>();
        rec.predicted = p.at("predicted").get<std::vector<std::string>>();
        rec.crosstopic = p.at("crosstopic").get<bool>();
        report.predictions.push_back(std::move(rec));
    }
    return report;
}

}  // namespace biaslens
