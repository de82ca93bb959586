#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biaslens/experiment.hpp"
#include "biaslens/synth.hpp"

namespace biaslens {

inline constexpr const char* kToolVersion = "0.1.0";

// Flat configuration mirroring the CLI flags; `run` reads it from a JSON
// file and individual flags override file values.
struct PipelineConfig {
    std::vector<std::string> stages;  // of: synth topics associate audit deltas examples
    std::filesystem::path corpus_path;
    std::filesystem::path topics_model_path;  // optional pre-fit model
    std::filesystem::path out_dir = "biaslens-out";

    // synth
    int synth_topics = 4;
    int synth_labels = 4;
    int synth_n = 2500;  // instances per topic
    int synth_vocab_size = 50;
    int synth_doc_length = 12;
    double synth_rho = 0.8;
    double synth_cue = 0.9;

    // topics
    TopicParams topic_params;

    // audit
    std::vector<std::string> settings = {"bl", "wr", "gr"};
    int k = 10;
    double lambda = 0.1;
    ExperimentConfig experiment;

    int examples_n = 10;
    std::uint64_t seed = 0;

    static PipelineConfig from_json(const nlohmann::json& obj);
    nlohmann::json to_json() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct StageTiming {
    std::string name;
    double wall_ms = 0.0;
};

// Provenance sidecar written next to every run's outputs. Digests allow
// recomputing whether inputs changed; timing fields are the only
// non-reproducible content.
struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string command;
    nlohmann::json config;
    std::string corpus_digest;
    std::string topic_model_digest;
    std::vector<std::uint64_t> seeds;
    std::vector<StageTiming> stages;
    std::vector<std::string> outputs;  // paths relative to the manifest
    bool auto_topics = false;          // topics stage inserted as a dependency
    std::string timestamp;

    nlohmann::json to_json() const;
};

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
std::string current_timestamp();

// Executes the requested stages in dependency order and writes all artifacts
// plus manifest.json into out_dir. Returns the manifest.
RunManifest run_pipeline(const PipelineConfig& config);

}  // namespace biaslens
