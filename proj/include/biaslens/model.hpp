#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biaslens/features.hpp"

namespace biaslens {

enum class TaskMode { SoftmaxCE, SigmoidBCE };

// Row-major dense matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const {
        return data.data() + static_cast<std::size_t>(r) * cols;
    }
};

// Architecture and hyperparameters used to build a fresh model.
struct ModelSkeleton {
    FeatureSpace feature_space;
    int hidden_units = 768;
    double dropout_rate = 0.5;
    TaskMode task_mode = TaskMode::SoftmaxCE;
    std::vector<std::string> label_names;
    // Non-empty enables the adversarial topic head; entries are the real
    // topic ids behind the head's dense output indices.
    std::vector<int> topic_ids;
    double lambda = 0.0;  // gradient reversal strength
};

// Feature hashing -> one ReLU hidden layer with dropout -> task head, plus an
// optional topic head behind the gradient reversal node.
struct ClassifierModel {
    FeatureSpace feature_space;
    int hidden_units = 0;
    double dropout_rate = 0.5;
    double lambda = 0.0;
    TaskMode task_mode = TaskMode::SoftmaxCE;
    std::vector<std::string> label_names;
    std::vector<int> topic_ids;

    Matrix w_hidden;               // hash_dimension x H
    std::vector<double> b_hidden;  // H
    Matrix w_task;                 // H x |labels|
    std::vector<double> b_task;
    Matrix w_topic;                // H x |topics|; empty without topic head
    std::vector<double> b_topic;

    bool has_topic_head() const { return !topic_ids.empty(); }
    int num_labels() const { return static_cast<int>(label_names.size()); }
    int num_topics() const { return static_cast<int>(topic_ids.size()); }
};

// Seeded He-style initialization. Each tensor draws from its own derived
// stream, so shared tensors are identical with and without the topic head.
ClassifierModel init_model(const ModelSkeleton& skeleton, std::uint64_t seed);

struct ForwardResult {
    std::vector<double> pre_hidden;     // z = W'x + b
    std::vector<double> hidden;         // after ReLU and (in training) dropout
    std::vector<double> dropout_scale;  // per unit; empty in eval mode
    std::vector<double> task_logits;
    std::vector<double> task_probs;
    std::vector<double> topic_logits;   // empty without topic head
    std::vector<double> topic_probs;
};

// Single-instance forward pass. Dropout (inverted scaling) applies only in
// training mode; eval mode is deterministic. The gradient reversal node is
// the identity here, so the topic head sees the same hidden vector as the
// task head.
ForwardResult forward(const ClassifierModel& model, const SparseVector& x,
                      bool training, std::uint64_t dropout_seed);

// Backward rule of the gradient reversal node: -lambda * upstream, exactly.
std::vector<double> grl_backward(std::span<const double> upstream, double lambda);

struct Batch {
    std::vector<const SparseVector*> inputs;
    std::vector<std::vector<int>> gold_labels;  // label indices
    std::vector<int> topic_targets;             // dense head index; -1 = none
};

struct Gradients {
    Matrix w_hidden;
    std::vector<double> b_hidden;
    Matrix w_task;
    std::vector<double> b_task;
    Matrix w_topic;
    std::vector<double> b_topic;
    double task_loss = 0.0;
    double topic_loss = 0.0;

    double total_loss() const { return task_loss + topic_loss; }
};

// Mean cross-entropy gradients over the batch. The shared-layer gradient is
// exactly d(task loss) - lambda * d(topic loss); topic-head parameters get
// the unreversed topic gradient. Throws NonFiniteLossError when the loss is
// not finite.
Gradients backward(const ClassifierModel& model, const Batch& batch,
                   const std::vector<ForwardResult>& caches);

// Predicted label index sets. SoftmaxCE: argmax with lowest-index ties;
// SigmoidBCE: every label with probability >= 0.5 (possibly none).
std::vector<int> predict_one(const ClassifierModel& model, const SparseVector& x);
std::vector<std::vector<int>> predict(const ClassifierModel& model,
                                      std::span<const Instance> instances);

// Versioned little-endian binary serialization of all parameter tensors,
// the feature-space config and the task mode.
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace biaslens
