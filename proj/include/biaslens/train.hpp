#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "biaslens/model.hpp"

namespace biaslens {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 16;
    int max_epochs = 5;
    int early_stopping_patience = 2;
    double weight_decay = 1e-5;
    int runs = 3;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;

    // Learning rate matching the original fine-tuning setup.
    static TrainConfig paper_compat() {
        TrainConfig c;
        c.learning_rate = 5e-5;
        return c;
    }

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    bool stopped_early = false;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
};

// JSON Lines, one object per epoch.
void write_train_log(const TrainLog& log, const std::filesystem::path& path);

// Maps a real topic id to the dense index of the model's topic head;
// returns -1 for ids the head does not cover (e.g. outliers).
int topic_head_index(const ModelSkeleton& skeleton, int topic_id);

// Mini-batch training with decoupled weight decay (beta1 0.9, beta2 0.999,
// eps 1e-8). A seeded shuffle carves off the validation split (stratified by
// label where group sizes allow); early stopping watches validation accuracy
// and the best-validation snapshot is returned. Fully deterministic given
// the seed.
std::pair<ClassifierModel, TrainLog> train(std::span<const Instance> data,
                                           const ModelSkeleton& skeleton,
                                           const TrainConfig& config);

// Convenience: trains config.runs models from seeds seed, seed+1, ... and
// returns them all (metrics get averaged by callers).
std::vector<std::pair<ClassifierModel, TrainLog>> train_runs(
    std::span<const Instance> data, const ModelSkeleton& skeleton,
    const TrainConfig& config);

}  // namespace biaslens
