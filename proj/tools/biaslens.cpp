// biaslens: detect, quantify and mitigate topic bias in labeled text corpora.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "biaslens/association.hpp"
#include "biaslens/experiment.hpp"
#include "biaslens/hashing.hpp"
#include "biaslens/pipeline.hpp"
#include "biaslens/synth.hpp"

namespace {

using namespace biaslens;

namespace fs = std::filesystem;

CorpusFormat format_for(const fs::path& path) {
    return path.extension() == ".csv" ? CorpusFormat::Csv : CorpusFormat::JsonLines;
}

Corpus load_with_topics(const fs::path& corpus_path, const fs::path& model_path,
                        TopicModel* model_out, bool* have_model) {
    Corpus corpus = load_corpus(corpus_path, format_for(corpus_path));
    *have_model = false;
    if (!model_path.empty()) {
        *model_out = load_topic_model(model_path);
        *have_model = true;
        if (!corpus.all_topics_assigned()) {
            corpus = assign_topics(*model_out, corpus);
        }
    }
    return corpus;
}

void write_sidecar_manifest(const std::string& command, const fs::path& out,
                            const fs::path& corpus_path, const fs::path& model_path,
                            std::uint64_t seed) {
    RunManifest manifest;
    manifest.command = command;
    manifest.timestamp = current_timestamp();
    manifest.seeds = {seed};
    if (!corpus_path.empty() && fs::exists(corpus_path)) {
        manifest.corpus_digest = file_digest(corpus_path);
    }
    if (!model_path.empty() && fs::exists(model_path)) {
        manifest.topic_model_digest = file_digest(model_path);
    }
    manifest.outputs = {out.filename().string()};
    fs::path manifest_path = out;
    manifest_path += ".manifest.json";
    save_manifest(manifest, manifest_path);
}

struct AuditOptions {
    std::string corpus;
    std::string topics;
    std::string setting = "bl";
    std::string out = "report.json";
    int k = 10;
    double lambda = 0.1;
    ExperimentConfig experiment;
    std::uint64_t seed = 0;
    bool paper_compat = false;
};

void add_train_flags(CLI::App* cmd, AuditOptions& opt) {
    cmd->add_option("--runs", opt.experiment.train.runs, "training runs to average");
    cmd->add_option("--lr", opt.experiment.train.learning_rate, "learning rate");
    cmd->add_option("--batch", opt.experiment.train.batch_size, "batch size");
    cmd->add_option("--epochs", opt.experiment.train.max_epochs, "maximum epochs");
    cmd->add_option("--patience", opt.experiment.train.early_stopping_patience,
                    "early stopping patience");
    cmd->add_option("--weight-decay", opt.experiment.train.weight_decay,
                    "decoupled weight decay");
    cmd->add_option("--validation-fraction",
                    opt.experiment.train.validation_fraction,
                    "validation holdout fraction");
    cmd->add_option("--hash-bits", opt.experiment.hash_bits,
                    "log2 of the feature-hashing dimension");
    cmd->add_option("--hidden", opt.experiment.hidden_units, "hidden layer width");
    cmd->add_option("--dropout", opt.experiment.dropout_rate, "dropout rate");
    cmd->add_option("--test-fraction", opt.experiment.test_fraction,
                    "per-topic in-topic test slice");
    cmd->add_flag("--weight-by-size", opt.experiment.weight_by_size,
                  "weight summary means by evaluation set size");
    cmd->add_flag("--include-outliers", opt.experiment.include_outliers,
                  "treat the outlier topic as a regular topic");
    cmd->add_option("--threads", opt.experiment.threads,
                    "worker threads (0 = hardware)");
    cmd->add_flag("--paper-compat", opt.paper_compat,
                  "use the fine-tuning learning rate preset");
}

int run_cli(int argc, char** argv) {
    CLI::App app{"topic bias auditing toolkit"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
    struct {
        int topics = 4, labels = 4, n = 2500, vocab = 50, doc_length = 12;
        double rho = 0.8, cue = 0.9;
        std::uint64_t seed = 0;
        std::string out = "synth.jsonl";
    } synth_opt;
    synth_cmd->add_option("--topics", synth_opt.topics, "number of topics");
    synth_cmd->add_option("--labels", synth_opt.labels, "number of labels");
    synth_cmd->add_option("--rho", synth_opt.rho, "topic-label correlation");
    synth_cmd->add_option("--cue", synth_opt.cue, "cue word probability");
    synth_cmd->add_option("-n,--n", synth_opt.n, "instances per topic");
    synth_cmd->add_option("--vocab-size", synth_opt.vocab, "words per topic vocabulary");
    synth_cmd->add_option("--doc-length", synth_opt.doc_length, "tokens per document");
    synth_cmd->add_option("--seed", synth_opt.seed, "random seed");
    synth_cmd->add_option("--out", synth_opt.out, "output corpus path")->required();

    // --- topics ---
    auto* topics_cmd = app.add_subcommand("topics", "fit the topic model");
    struct {
        std::string in, out = "topic_model.json";
        TopicParams params;
    } topics_opt;
    topics_cmd->add_option("--in", topics_opt.in, "corpus file")->required();
    topics_cmd->add_option("--out", topics_opt.out, "model output path");
    topics_cmd->add_option("--max-topics", topics_opt.params.max_topics,
                           "largest cluster count to try");
    topics_cmd->add_option("--min-cluster-size", topics_opt.params.min_cluster_size,
                           "smallest surviving cluster (0 = auto)");
    topics_cmd->add_option("--outlier-threshold",
                           topics_opt.params.outlier_similarity_threshold,
                           "centroid similarity below which instances are outliers");
    topics_cmd->add_option("--seed", topics_opt.params.seed, "random seed");

    // --- associate ---
    auto* assoc_cmd =
        app.add_subcommand("associate", "topic-label association matrix (NPMI)");
    struct {
        std::string corpus, topics, out = "association.csv";
        std::string format = "csv";
    } assoc_opt;
    assoc_cmd->add_option("--corpus", assoc_opt.corpus, "corpus file")->required();
    assoc_cmd->add_option("--topics", assoc_opt.topics, "topic model (optional)");
    assoc_cmd->add_option("--out", assoc_opt.out, "output path");
    assoc_cmd->add_option("--format", assoc_opt.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    // --- audit ---
    auto* audit_cmd =
        app.add_subcommand("audit", "leave-one-topic-out bias audit");
    AuditOptions audit_opt;
    audit_cmd->add_option("--corpus", audit_opt.corpus, "corpus file")->required();
    audit_cmd->add_option("--topics", audit_opt.topics, "topic model");
    audit_cmd->add_option("--setting", audit_opt.setting, "bl, wr or gr")
        ->check(CLI::IsMember({"bl", "wr", "gr"}));
    audit_cmd->add_option("--k", audit_opt.k, "masked words per topic (wr)");
    audit_cmd->add_option("--lambda", audit_opt.lambda, "reversal strength (gr)");
    audit_cmd->add_option("--seed", audit_opt.seed, "random seed");
    audit_cmd->add_option("--out", audit_opt.out, "report output path");
    add_train_flags(audit_cmd, audit_opt);

    // --- deltas ---
    auto* deltas_cmd =
        app.add_subcommand("deltas", "delta table from saved reports");
    struct {
        std::string baseline, wr, gr;
        std::string out = "deltas.csv";
    } deltas_opt;
    deltas_cmd->add_option("--baseline", deltas_opt.baseline, "baseline report")
        ->required();
    deltas_cmd->add_option("--wr", deltas_opt.wr, "word-removal report");
    deltas_cmd->add_option("--gr", deltas_opt.gr, "gradient-reversal report");
    deltas_cmd->add_option("--out", deltas_opt.out, "output CSV path");

    // --- examples ---
    auto* examples_cmd = app.add_subcommand(
        "examples", "cross-setting disagreement examples (cross-topic folds)");
    struct {
        std::vector<std::string> reports;
        std::string corpus;
        std::string out = "examples.csv";
        int n = 10;
    } examples_opt;
    examples_cmd->add_option("--report", examples_opt.reports, "report path (repeatable)")
        ->required();
    examples_cmd->add_option("--corpus", examples_opt.corpus, "corpus file")->required();
    examples_cmd->add_option("-n,--n", examples_opt.n, "rows to emit");
    examples_cmd->add_option("--out", examples_opt.out, "output CSV path");

    // --- run ---
    auto* run_cmd = app.add_subcommand("run", "config-driven pipeline");
    struct {
        std::string config;
        std::string corpus, out_dir, stages;
        std::int64_t seed = -1;
    } run_opt;
    run_cmd->add_option("--config", run_opt.config, "JSON config file")->required();
    run_cmd->add_option("--corpus", run_opt.corpus, "override corpus path");
    run_cmd->add_option("--out", run_opt.out_dir, "override output directory");
    run_cmd->add_option("--stages", run_opt.stages, "override stage list (comma-separated)");
    run_cmd->add_option("--seed", run_opt.seed, "override seed");

    CLI11_PARSE(app, argc, argv);

    if (synth_cmd->parsed()) {
        SynthSpec spec = make_synth_spec(synth_opt.topics, synth_opt.labels);
        spec.instances_per_topic = synth_opt.n;
        spec.topic_vocab_size = synth_opt.vocab;
        spec.doc_length = synth_opt.doc_length;
        spec.rho = synth_opt.rho;
        spec.cue_strength = synth_opt.cue;
        spec.seed = synth_opt.seed;
        const Corpus corpus = generate(spec);
        save_corpus(corpus, synth_opt.out);
        write_sidecar_manifest("synth", synth_opt.out, synth_opt.out, "",
                               synth_opt.seed);
        std::cout << "wrote " << corpus.instances.size() << " instances to "
                  << synth_opt.out << '\n';
    } else if (topics_cmd->parsed()) {
        const Corpus corpus = load_corpus(topics_opt.in, format_for(topics_opt.in));
        const TopicModel model = fit_topics(corpus, topics_opt.params);
        save_topic_model(model, topics_opt.out);
        write_sidecar_manifest("topics", topics_opt.out, topics_opt.in, topics_opt.out,
                               topics_opt.params.seed);
        std::int64_t outliers = 0;
        for (const auto& [id, t] : model.assignments) {
            if (t == kOutlierTopic) ++outliers;
        }
        std::cout << "fit " << model.num_topics << " topics (" << outliers
                  << " outliers) -> " << topics_opt.out << '\n';
    } else if (assoc_cmd->parsed()) {
        TopicModel model;
        bool have_model = false;
        const Corpus corpus = load_with_topics(assoc_opt.corpus, assoc_opt.topics,
                                               &model, &have_model);
        const AssociationMatrix matrix = npmi(build_contingency(corpus));
        export_association(matrix, assoc_opt.out,
                           assoc_opt.format == "json" ? TableFormat::Json
                                                      : TableFormat::Csv);
        write_sidecar_manifest("associate", assoc_opt.out, assoc_opt.corpus,
                               assoc_opt.topics, 0);
        std::cout << "wrote " << matrix.topics.size() << "x" << matrix.labels.size()
                  << " association matrix -> " << assoc_opt.out << '\n';
    } else if (audit_cmd->parsed()) {
        TopicModel model;
        bool have_model = false;
        const Corpus corpus = load_with_topics(audit_opt.corpus, audit_opt.topics,
                                               &model, &have_model);
        MitigationSetting setting = MitigationSetting::baseline();
        if (audit_opt.setting == "wr") {
            setting = MitigationSetting::word_removal(audit_opt.k);
        } else if (audit_opt.setting == "gr") {
            setting = MitigationSetting::gradient_reversal(audit_opt.lambda);
        }
        if (audit_opt.paper_compat) {
            const TrainConfig keep = audit_opt.experiment.train;
            audit_opt.experiment.train = TrainConfig::paper_compat();
            audit_opt.experiment.train.runs = keep.runs;
        }
        audit_opt.experiment.train.seed = audit_opt.seed;
        const ExperimentReport report = run_setting(
            corpus, have_model ? &model : nullptr, setting, audit_opt.experiment);
        save_report(report, audit_opt.out);
        fs::path matrix_path = audit_opt.out;
        matrix_path.replace_extension(".matrix.csv");
        write_matrix_csv(report, matrix_path);
        write_sidecar_manifest("audit", audit_opt.out, audit_opt.corpus,
                               audit_opt.topics, audit_opt.seed);
        std::cout << report.setting.tag()
                  << ": crosstopic=" << report.mean_crosstopic()
                  << " intopic=" << report.mean_intopic() << " gap=" << report.gap()
                  << " -> " << audit_opt.out << '\n';
    } else if (deltas_cmd->parsed()) {
        std::vector<ExperimentReport> reports;
        reports.push_back(load_report(deltas_opt.baseline));
        if (!deltas_opt.wr.empty()) reports.push_back(load_report(deltas_opt.wr));
        if (!deltas_opt.gr.empty()) reports.push_back(load_report(deltas_opt.gr));
        const DeltaTable table = compute_deltas(reports);
        write_delta_csv(table, deltas_opt.out, /*points=*/false);
        fs::path points_path = deltas_opt.out;
        points_path.replace_extension(".points.csv");
        write_delta_csv(table, points_path, /*points=*/true);
        std::cout << "wrote delta table -> " << deltas_opt.out << '\n';
    } else if (examples_cmd->parsed()) {
        std::vector<ExperimentReport> reports;
        std::vector<std::string> tags;
        for (const auto& path : examples_opt.reports) {
            reports.push_back(load_report(path));
            tags.push_back(reports.back().setting.tag());
        }
        const Corpus corpus =
            load_corpus(examples_opt.corpus, format_for(examples_opt.corpus));
        const auto rows = export_examples(reports, corpus, examples_opt.n);
        write_examples_csv(rows, tags, examples_opt.out);
        std::cout << "wrote " << rows.size() << " example rows -> "
                  << examples_opt.out << '\n';
    } else if (run_cmd->parsed()) {
        PipelineConfig config = load_pipeline_config(run_opt.config);
        if (!run_opt.corpus.empty()) config.corpus_path = run_opt.corpus;
        if (!run_opt.out_dir.empty()) config.out_dir = run_opt.out_dir;
        if (!run_opt.stages.empty()) {
            config.stages.clear();
            std::string cur;
            for (const char c : run_opt.stages) {
                if (c == ',') {
                    if (!cur.empty()) config.stages.push_back(cur);
                    cur.clear();
                } else {
                    cur.push_back(c);
                }
            }
            if (!cur.empty()) config.stages.push_back(cur);
        }
        if (run_opt.seed >= 0) {
            config.seed = static_cast<std::uint64_t>(run_opt.seed);
            config.experiment.train.seed = config.seed;
            config.topic_params.seed = config.seed;
        }
        const RunManifest manifest = run_pipeline(config);
        std::cout << "pipeline finished; " << manifest.outputs.size()
                  << " artifacts in " << config.out_dir.string() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const StageError& e) {
        std::cerr << "error " << e.what() << '\n';
        return 1;
    } catch (const CorpusLoadError& e) {
        std::cerr << "error [load] " << e.what() << '\n';
        for (std::size_t i = 0; i < e.records().size() && i < 20; ++i) {
            const auto& r = e.records()[i];
            std::cerr << "  line " << r.line << ": " << r.message << '\n';
        }
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
