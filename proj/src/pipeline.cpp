#include "biaslens/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>

#include "biaslens/association.hpp"
#include "biaslens/hashing.hpp"

namespace biaslens {

using nlohmann::json;

namespace {

template <typename T>
void read_key(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& obj) {
    PipelineConfig c;
    if (obj.contains("stages")) {
        if (obj["stages"].is_string()) {
            c.stages = split_csv_list(obj["stages"].get<std::string>());
        } else {
            c.stages = obj["stages"].get<std::vector<std::string>>();
        }
    }
    std::string path;
    read_key(obj, "corpus", path);
    if (!path.empty()) c.corpus_path = path;
    path.clear();
    read_key(obj, "topics_model", path);
    if (!path.empty()) c.topics_model_path = path;
    path.clear();
    read_key(obj, "out_dir", path);
    if (!path.empty()) c.out_dir = path;

    read_key(obj, "synth_topics", c.synth_topics);
    read_key(obj, "synth_labels", c.synth_labels);
    read_key(obj, "synth_n", c.synth_n);
    read_key(obj, "synth_vocab_size", c.synth_vocab_size);
    read_key(obj, "synth_doc_length", c.synth_doc_length);
    read_key(obj, "synth_rho", c.synth_rho);
    read_key(obj, "synth_cue", c.synth_cue);

    read_key(obj, "max_topics", c.topic_params.max_topics);
    read_key(obj, "min_cluster_size", c.topic_params.min_cluster_size);
    read_key(obj, "outlier_threshold", c.topic_params.outlier_similarity_threshold);

    if (obj.contains("settings")) {
        if (obj["settings"].is_string()) {
            c.settings = split_csv_list(obj["settings"].get<std::string>());
        } else {
            c.settings = obj["settings"].get<std::vector<std::string>>();
        }
    }
    read_key(obj, "k", c.k);
    read_key(obj, "lambda", c.lambda);
    read_key(obj, "examples_n", c.examples_n);

    bool paper_compat = false;
    read_key(obj, "paper_compat", paper_compat);
    if (paper_compat) c.experiment.train = TrainConfig::paper_compat();
    read_key(obj, "learning_rate", c.experiment.train.learning_rate);
    read_key(obj, "batch_size", c.experiment.train.batch_size);
    read_key(obj, "max_epochs", c.experiment.train.max_epochs);
    read_key(obj, "patience", c.experiment.train.early_stopping_patience);
    read_key(obj, "weight_decay", c.experiment.train.weight_decay);
    read_key(obj, "runs", c.experiment.train.runs);
    read_key(obj, "validation_fraction", c.experiment.train.validation_fraction);
    read_key(obj, "hash_bits", c.experiment.hash_bits);
    read_key(obj, "hidden_units", c.experiment.hidden_units);
    read_key(obj, "dropout", c.experiment.dropout_rate);
    read_key(obj, "test_fraction", c.experiment.test_fraction);
    read_key(obj, "weight_by_size", c.experiment.weight_by_size);
    read_key(obj, "include_outliers", c.experiment.include_outliers);
    read_key(obj, "threads", c.experiment.threads);

    read_key(obj, "seed", c.seed);
    c.experiment.train.seed = c.seed;
    c.topic_params.seed = c.seed;
    return c;
}

json PipelineConfig::to_json() const {
    json obj;
    obj["stages"] = stages;
    obj["corpus"] = corpus_path.string();
    obj["topics_model"] = topics_model_path.string();
    obj["out_dir"] = out_dir.string();
    obj["synth_topics"] = synth_topics;
    obj["synth_labels"] = synth_labels;
    obj["synth_n"] = synth_n;
    obj["synth_vocab_size"] = synth_vocab_size;
    obj["synth_doc_length"] = synth_doc_length;
    obj["synth_rho"] = synth_rho;
    obj["synth_cue"] = synth_cue;
    obj["max_topics"] = topic_params.max_topics;
    obj["min_cluster_size"] = topic_params.min_cluster_size;
    obj["outlier_threshold"] = topic_params.outlier_similarity_threshold;
    obj["settings"] = settings;
    obj["k"] = k;
    obj["lambda"] = lambda;
    obj["examples_n"] = examples_n;
    obj["learning_rate"] = experiment.train.learning_rate;
    obj["batch_size"] = experiment.train.batch_size;
    obj["max_epochs"] = experiment.train.max_epochs;
    obj["patience"] = experiment.train.early_stopping_patience;
    obj["weight_decay"] = experiment.train.weight_decay;
    obj["runs"] = experiment.train.runs;
    obj["validation_fraction"] = experiment.train.validation_fraction;
    obj["hash_bits"] = experiment.hash_bits;
    obj["hidden_units"] = experiment.hidden_units;
    obj["dropout"] = experiment.dropout_rate;
    obj["test_fraction"] = experiment.test_fraction;
    obj["weight_by_size"] = experiment.weight_by_size;
    obj["include_outliers"] = experiment.include_outliers;
    obj["threads"] = experiment.threads;
    obj["seed"] = seed;
    return obj;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json obj = json::parse(in, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        throw ConfigError("config file is not a JSON object: " + path.string());
    }
    try {
        return PipelineConfig::from_json(obj);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
}

json RunManifest::to_json() const {
    json obj;
    obj["tool_version"] = tool_version;
    obj["command"] = command;
    obj["config"] = config;
    obj["corpus_digest"] = corpus_digest;
    obj["topic_model_digest"] = topic_model_digest;
    obj["seeds"] = seeds;
    json stage_list = json::array();
    for (const auto& s : stages) {
        stage_list.push_back({{"name", s.name}, {"wall_ms", s.wall_ms}});
    }
    obj["stages"] = std::move(stage_list);
    obj["outputs"] = outputs;
    obj["auto_topics"] = auto_topics;
    obj["timestamp"] = timestamp;
    return obj;
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << manifest.to_json().dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::string current_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

class StageClock {
public:
    explicit StageClock(RunManifest& manifest, std::string name)
        : manifest_(manifest),
          name_(std::move(name)),
          start_(std::chrono::steady_clock::now()) {}

    ~StageClock() {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        manifest_.stages.push_back(
            {name_, std::chrono::duration<double, std::milli>(elapsed).count()});
    }

private:
    RunManifest& manifest_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

MitigationSetting setting_from_tag(const std::string& tag, const PipelineConfig& c) {
    if (tag == "bl") return MitigationSetting::baseline();
    if (tag == "wr") return MitigationSetting::word_removal(c.k);
    if (tag == "gr") return MitigationSetting::gradient_reversal(c.lambda);
    throw ConfigError("unknown setting tag: " + tag + " (expected bl, wr or gr)");
}

bool stage_requested(const PipelineConfig& c, const std::string& name) {
    return std::find(c.stages.begin(), c.stages.end(), name) != c.stages.end();
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& config) {
    static const std::vector<std::string> known = {"synth",  "topics",   "associate",
                                                   "audit",  "deltas",   "examples"};
    if (config.stages.empty()) {
        throw ConfigError("config requests no stages");
    }
    for (const auto& s : config.stages) {
        if (std::find(known.begin(), known.end(), s) == known.end()) {
            throw ConfigError("unknown stage: " + s);
        }
    }

    RunManifest manifest;
    manifest.command = "run";
    manifest.config = config.to_json();
    manifest.timestamp = current_timestamp();
    manifest.seeds = {config.seed};

    std::filesystem::create_directories(config.out_dir);
    const auto emit = [&](const std::filesystem::path& p) {
        manifest.outputs.push_back(p.filename().string());
    };

    // --- synth ---
    std::filesystem::path corpus_path = config.corpus_path;
    if (stage_requested(config, "synth")) {
        StageClock clock(manifest, "synth");
        SynthSpec spec = make_synth_spec(config.synth_topics, config.synth_labels);
        spec.instances_per_topic = config.synth_n;
        spec.topic_vocab_size = config.synth_vocab_size;
        spec.doc_length = config.synth_doc_length;
        spec.rho = config.synth_rho;
        spec.cue_strength = config.synth_cue;
        spec.seed = config.seed;
        try {
            const Corpus synth = generate(spec);
            corpus_path = config.out_dir / "synthetic.jsonl";
            save_corpus(synth, corpus_path);
            emit(corpus_path);
        } catch (const Error& e) {
            throw StageError("synth", e.what());
        }
    }

    if (corpus_path.empty()) {
        throw ConfigError("config references no corpus file");
    }
    if (!std::filesystem::exists(corpus_path)) {
        throw ConfigError("corpus file does not exist: " + corpus_path.string());
    }

    Corpus corpus;
    try {
        const CorpusFormat format =
            corpus_path.extension() == ".csv" ? CorpusFormat::Csv : CorpusFormat::JsonLines;
        corpus = load_corpus(corpus_path, format);
    } catch (const Error& e) {
        throw StageError("load", e.what());
    }
    manifest.corpus_digest = file_digest(corpus_path);

    // --- topics (runs when requested, or when a later stage needs a model) ---
    const bool wants_wr =
        stage_requested(config, "audit") &&
        std::find(config.settings.begin(), config.settings.end(), "wr") !=
            config.settings.end();
    const bool needs_model =
        (stage_requested(config, "associate") && !corpus.all_topics_assigned()) ||
        (stage_requested(config, "audit") &&
         (!corpus.all_topics_assigned() || wants_wr));

    TopicModel model;
    bool have_model = false;
    if (!config.topics_model_path.empty()) {
        try {
            model = load_topic_model(config.topics_model_path);
            have_model = true;
            manifest.topic_model_digest = file_digest(config.topics_model_path);
        } catch (const Error& e) {
            throw StageError("topics", e.what());
        }
    }
    if (stage_requested(config, "topics") || (needs_model && !have_model)) {
        if (!have_model) {
            StageClock clock(manifest, "topics");
            if (!stage_requested(config, "topics")) manifest.auto_topics = true;
            try {
                model = fit_topics(corpus, config.topic_params);
                have_model = true;
            } catch (const Error& e) {
                throw StageError("topics", e.what());
            }
        }
        const auto path = config.out_dir / "topic_model.json";
        save_topic_model(model, path);
        emit(path);
        manifest.topic_model_digest = file_digest(path);
    }

    Corpus assigned = corpus;
    if (!assigned.all_topics_assigned() && have_model) {
        assigned = assign_topics(model, assigned);
    }

    // --- associate ---
    if (stage_requested(config, "associate")) {
        StageClock clock(manifest, "associate");
        try {
            const AssociationMatrix matrix = npmi(build_contingency(assigned));
            const auto path = config.out_dir / "association.csv";
            export_association(matrix, path, TableFormat::Csv);
            emit(path);
        } catch (const Error& e) {
            throw StageError("associate", e.what());
        }
    }

    // --- audit ---
    std::vector<ExperimentReport> reports;
    if (stage_requested(config, "audit")) {
        for (const auto& tag : config.settings) {
            StageClock clock(manifest, "audit:" + tag);
            const MitigationSetting setting = setting_from_tag(tag, config);
            try {
                ExperimentConfig exp = config.experiment;
                exp.train.seed = config.seed;
                ExperimentReport report = run_setting(
                    assigned, have_model ? &model : nullptr, setting, exp);
                const auto report_path =
                    config.out_dir / ("report_" + tag + ".json");
                save_report(report, report_path);
                emit(report_path);
                const auto matrix_path =
                    config.out_dir / ("report_" + tag + ".matrix.csv");
                write_matrix_csv(report, matrix_path);
                emit(matrix_path);
                reports.push_back(std::move(report));
            } catch (const Error& e) {
                throw StageError("audit:" + tag, e.what());
            }
        }
    }

    // --- deltas ---
    if (stage_requested(config, "deltas")) {
        StageClock clock(manifest, "deltas");
        if (reports.empty()) {
            throw StageError("deltas", "requires the audit stage in the same run");
        }
        try {
            const DeltaTable table = compute_deltas(reports);
            const auto path = config.out_dir / "deltas.csv";
            write_delta_csv(table, path, /*points=*/false);
            emit(path);
            const auto points_path = config.out_dir / "deltas_points.csv";
            write_delta_csv(table, points_path, /*points=*/true);
            emit(points_path);
        } catch (const Error& e) {
            throw StageError("deltas", e.what());
        }
    }

    // --- examples ---
    if (stage_requested(config, "examples")) {
        StageClock clock(manifest, "examples");
        if (reports.empty()) {
            throw StageError("examples", "requires the audit stage in the same run");
        }
        try {
            const auto rows = export_examples(reports, assigned, config.examples_n);
            std::vector<std::string> tags;
            for (const auto& r : reports) tags.push_back(r.setting.tag());
            const auto path = config.out_dir / "examples.csv";
            write_examples_csv(rows, tags, path);
            emit(path);
        } catch (const Error& e) {
            throw StageError("examples", e.what());
        }
    }

    save_manifest(manifest, config.out_dir / "manifest.json");
    return manifest;
}

}  // namespace biaslens
