#include "biaslens/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "biaslens/metrics.hpp"
#include "biaslens/optimizer.hpp"
#include "biaslens/rng.hpp"

namespace biaslens {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw Error("learning_rate must be positive");
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (max_epochs < 1) throw Error("max_epochs must be >= 1");
    if (early_stopping_patience < 1) throw Error("early_stopping_patience must be >= 1");
    if (weight_decay < 0.0) throw Error("weight_decay must be >= 0");
    if (runs < 1) throw Error("runs must be >= 1");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0) {
        throw Error("validation_fraction must lie in (0, 1)");
    }
}

void write_train_log(const TrainLog& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write training log: " + path.string());
    for (const auto& e : log.epochs) {
        nlohmann::json obj;
        obj["epoch"] = e.epoch;
        obj["train_loss"] = e.train_loss;
        obj["val_accuracy"] = e.val_accuracy;
        obj["stopped_early"] = e.stopped_early;
        out << obj.dump() << '\n';
    }
}

int topic_head_index(const ModelSkeleton& skeleton, int topic_id) {
    for (std::size_t i = 0; i < skeleton.topic_ids.size(); ++i) {
        if (skeleton.topic_ids[i] == topic_id) return static_cast<int>(i);
    }
    return -1;
}

namespace {

// Extra topic-head-only updates per batch during adversarial training, and
// the head's learning-rate advantage. Both keep the topic head close to
// optimal for the current representation; reversing a stale head's gradient
// removes nothing.
constexpr int kAdversaryHeadSteps = 2;
constexpr double kAdversaryHeadLrBoost = 10.0;

// Seeded validation holdout, stratified by label signature. Groups too small
// to give up an instance stay whole in the training split.
void split_validation(std::span<const Instance> data, double fraction,
                      std::uint64_t seed, std::vector<std::size_t>& train_idx,
                      std::vector<std::size_t>& val_idx) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::string key;
        for (const int l : data[i].labels) {
            key += std::to_string(l);
            key += ',';
        }
        groups[key].push_back(i);
    }
    Rng rng(mix_seed(seed, 0xa1));
    for (auto& [key, members] : groups) {
        rng.shuffle(members);
        const auto take = static_cast<std::size_t>(
            std::floor(fraction * static_cast<double>(members.size()) + 0.5));
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < take ? val_idx : train_idx).push_back(members[i]);
        }
    }
    if (val_idx.empty() && data.size() >= 2) {
        // Fall back to one instance from the largest group.
        std::string largest;
        std::size_t best = 0;
        for (const auto& [key, members] : groups) {
            if (members.size() > best) {
                best = members.size();
                largest = key;
            }
        }
        // The group vectors were shuffled above; move its first member.
        const std::size_t chosen = groups[largest].front();
        val_idx.push_back(chosen);
        train_idx.erase(std::find(train_idx.begin(), train_idx.end(), chosen));
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
}

double validation_score(const ClassifierModel& model,
                        std::span<const Instance> data,
                        const std::vector<std::size_t>& val_idx,
                        const std::vector<SparseVector>& features) {
    std::vector<std::vector<int>> preds;
    std::vector<std::vector<int>> golds;
    preds.reserve(val_idx.size());
    golds.reserve(val_idx.size());
    for (const std::size_t i : val_idx) {
        preds.push_back(predict_one(model, features[i]));
        golds.push_back(data[i].labels);
    }
    return micro_f1(preds, golds);
}

}  // namespace

std::pair<ClassifierModel, TrainLog> train(std::span<const Instance> data,
                                           const ModelSkeleton& skeleton,
                                           const TrainConfig& config) {
    config.validate();
    if (data.size() < 2) {
        throw InsufficientDataError("need at least 2 instances to train");
    }

    ModelSkeleton resolved = skeleton;
    if (resolved.feature_space.weighting == FeatureWeighting::TfIdf &&
        resolved.feature_space.idf.empty()) {
        resolved.feature_space.idf = fit_idf(data);
    }

    std::vector<std::size_t> train_idx, val_idx;
    split_validation(data, config.validation_fraction, config.seed, train_idx, val_idx);
    if (train_idx.empty() || val_idx.empty()) {
        throw InsufficientDataError("training/validation split came up empty");
    }

    // Every label represented in the training split needs at least two
    // instances there.
    {
        std::map<int, int> label_counts;
        for (const std::size_t i : train_idx) {
            for (const int l : data[i].labels) ++label_counts[l];
        }
        for (const auto& [label, count] : label_counts) {
            if (count < 2) {
                throw InsufficientDataError(
                    "label index " + std::to_string(label) +
                    " has fewer than 2 training instances");
            }
        }
    }

    std::vector<SparseVector> features(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        features[i] = featurize(data[i], resolved.feature_space);
    }
    std::vector<int> topic_targets(data.size(), -1);
    if (!resolved.topic_ids.empty()) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data[i].topic) {
                topic_targets[i] = topic_head_index(resolved, *data[i].topic);
            }
        }
    }

    ClassifierModel model = init_model(resolved, mix_seed(config.seed, 0x17));
    AdamW opt_hidden(model.w_hidden.data.size() + model.b_hidden.size(),
                     config.learning_rate, config.weight_decay);
    AdamW opt_task(model.w_task.data.size() + model.b_task.size(),
                   config.learning_rate, config.weight_decay);
    AdamW opt_topic(model.w_topic.data.size() + model.b_topic.size(),
                    config.learning_rate, config.weight_decay);

    TrainLog log;
    ClassifierModel best_model = model;
    double best_val = -1.0;
    int best_epoch = 0;
    int epochs_without_improvement = 0;
    Rng shuffle_rng(mix_seed(config.seed, 0x5a));
    std::uint64_t dropout_counter = 0;

    // Adversarial runs keep the topic head close to optimal for the current
    // representation (extra head-only updates) and ramp the reversal
    // strength in, which keeps the minimax from diverging into confidently
    // wrong topic predictions.
    const bool adversarial = model.has_topic_head() && model.lambda > 0.0;
    const double full_lambda = model.lambda;
    const std::size_t batches_per_epoch =
        (train_idx.size() + static_cast<std::size_t>(config.batch_size) - 1) /
        static_cast<std::size_t>(config.batch_size);
    const double total_steps = static_cast<double>(
        batches_per_epoch * static_cast<std::size_t>(config.max_epochs));
    std::size_t global_step = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t loss_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            Batch batch;
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                batch.inputs.push_back(&features[i]);
                batch.gold_labels.push_back(data[i].labels);
                batch.topic_targets.push_back(topic_targets[i]);
            }

            if (adversarial) {
                const double progress = static_cast<double>(global_step) / total_steps;
                model.lambda =
                    full_lambda * (2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0);
                for (int hs = 0; hs < kAdversaryHeadSteps; ++hs) {
                    std::vector<ForwardResult> head_caches;
                    head_caches.reserve(batch.inputs.size());
                    for (std::size_t k = start; k < end; ++k) {
                        head_caches.push_back(
                            forward(model, features[order[k]], /*training=*/true,
                                    mix_seed(config.seed, 0xd0 + dropout_counter++)));
                    }
                    const Gradients head_grads = backward(model, batch, head_caches);
                    opt_topic.step(model.w_topic, model.b_topic, head_grads.w_topic,
                                   head_grads.b_topic);
                }
            }
            ++global_step;

            std::vector<ForwardResult> caches;
            caches.reserve(batch.inputs.size());
            for (std::size_t k = start; k < end; ++k) {
                caches.push_back(forward(model, features[order[k]], /*training=*/true,
                                         mix_seed(config.seed, 0xd0 + dropout_counter++)));
            }
            const Gradients grads = backward(model, batch, caches);
            loss_sum += grads.total_loss();
            ++loss_batches;
            opt_hidden.step(model.w_hidden, model.b_hidden, grads.w_hidden,
                            grads.b_hidden);
            opt_task.step(model.w_task, model.b_task, grads.w_task, grads.b_task);
            if (model.has_topic_head()) {
                opt_topic.step(model.w_topic, model.b_topic, grads.w_topic,
                               grads.b_topic);
            }
        }
        model.lambda = full_lambda;

        const double val = validation_score(model, data, val_idx, features);
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_batches > 0 ? loss_sum / static_cast<double>(loss_batches) : 0.0;
        entry.val_accuracy = val;

        if (val > best_val) {
            best_val = val;
            best_model = model;
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
        }
        if (epochs_without_improvement >= config.early_stopping_patience &&
            epoch < config.max_epochs) {
            entry.stopped_early = true;
            log.epochs.push_back(entry);
            break;
        }
        log.epochs.push_back(entry);
    }

    log.best_epoch = best_epoch;
    log.best_val_accuracy = best_val;
    return {std::move(best_model), std::move(log)};
}

std::vector<std::pair<ClassifierModel, TrainLog>> train_runs(
    std::span<const Instance> data, const ModelSkeleton& skeleton,
    const TrainConfig& config) {
    std::vector<std::pair<ClassifierModel, TrainLog>> out;
    out.reserve(static_cast<std::size_t>(config.runs));
    for (int r = 0; r < config.runs; ++r) {
        TrainConfig run_config = config;
        run_config.seed = config.seed + static_cast<std::uint64_t>(r);
        out.push_back(train(data, skeleton, run_config));
    }
    return out;
}

}  // namespace biaslens
