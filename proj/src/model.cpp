#include "biaslens/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "biaslens/errors.hpp"
#include "biaslens/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model serialization assumes a little-endian host");

namespace biaslens {

namespace {

constexpr double kProbFloor = 1e-12;

void fill_normal(Matrix& m, double stddev, std::uint64_t seed) {
    Rng rng(seed);
    for (double& v : m.data) v = rng.normal() * stddev;
}

void softmax(std::span<const double> logits, std::vector<double>& probs) {
    probs.resize(logits.size());
    double max_logit = logits[0];
    for (const double v : logits) max_logit = std::max(max_logit, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
}

}  // namespace

ClassifierModel init_model(const ModelSkeleton& skeleton, std::uint64_t seed) {
    skeleton.feature_space.validate();
    if (skeleton.hidden_units < 1) throw Error("hidden_units must be >= 1");
    if (skeleton.label_names.empty()) throw Error("model needs at least one label");
    if (skeleton.dropout_rate < 0.0 || skeleton.dropout_rate >= 1.0) {
        throw Error("dropout_rate must lie in [0, 1)");
    }
    if (skeleton.lambda < 0.0) throw Error("lambda must be >= 0");

    ClassifierModel model;
    model.feature_space = skeleton.feature_space;
    model.hidden_units = skeleton.hidden_units;
    model.dropout_rate = skeleton.dropout_rate;
    model.lambda = skeleton.lambda;
    model.task_mode = skeleton.task_mode;
    model.label_names = skeleton.label_names;
    model.topic_ids = skeleton.topic_ids;

    const int dim = skeleton.feature_space.hash_dimension;
    const int hidden = skeleton.hidden_units;
    const int labels = static_cast<int>(skeleton.label_names.size());

    model.w_hidden = Matrix(dim, hidden);
    fill_normal(model.w_hidden, std::sqrt(2.0 / dim), mix_seed(seed, 1));
    model.b_hidden.assign(static_cast<std::size_t>(hidden), 0.0);

    model.w_task = Matrix(hidden, labels);
    fill_normal(model.w_task, std::sqrt(2.0 / hidden), mix_seed(seed, 2));
    model.b_task.assign(static_cast<std::size_t>(labels), 0.0);

    if (!skeleton.topic_ids.empty()) {
        const int topics = static_cast<int>(skeleton.topic_ids.size());
        model.w_topic = Matrix(hidden, topics);
        fill_normal(model.w_topic, std::sqrt(2.0 / hidden), mix_seed(seed, 3));
        model.b_topic.assign(static_cast<std::size_t>(topics), 0.0);
    }
    return model;
}

ForwardResult forward(const ClassifierModel& model, const SparseVector& x,
                      bool training, std::uint64_t dropout_seed) {
    const int hidden = model.hidden_units;
    for (const auto& [idx, w] : x.entries) {
        if (idx < 0 || idx >= model.feature_space.hash_dimension) {
            throw DimensionMismatchError("input index out of range: " +
                                         std::to_string(idx));
        }
        (void)w;
    }

    ForwardResult r;
    r.pre_hidden.assign(static_cast<std::size_t>(hidden), 0.0);
    for (const auto& [idx, w] : x.entries) {
        const double* row = model.w_hidden.row(idx);
        for (int j = 0; j < hidden; ++j) r.pre_hidden[static_cast<std::size_t>(j)] += w * row[j];
    }
    for (int j = 0; j < hidden; ++j) {
        r.pre_hidden[static_cast<std::size_t>(j)] += model.b_hidden[static_cast<std::size_t>(j)];
    }

    r.hidden.resize(static_cast<std::size_t>(hidden));
    for (int j = 0; j < hidden; ++j) {
        const double z = r.pre_hidden[static_cast<std::size_t>(j)];
        r.hidden[static_cast<std::size_t>(j)] = z > 0.0 ? z : 0.0;
    }
    if (training && model.dropout_rate > 0.0) {
        Rng rng(dropout_seed);
        const double keep_scale = 1.0 / (1.0 - model.dropout_rate);
        r.dropout_scale.resize(static_cast<std::size_t>(hidden));
        for (int j = 0; j < hidden; ++j) {
            const double scale = rng.uniform() < model.dropout_rate ? 0.0 : keep_scale;
            r.dropout_scale[static_cast<std::size_t>(j)] = scale;
            r.hidden[static_cast<std::size_t>(j)] *= scale;
        }
    }

    const int labels = model.num_labels();
    r.task_logits.assign(model.b_task.begin(), model.b_task.end());
    for (int j = 0; j < hidden; ++j) {
        const double h = r.hidden[static_cast<std::size_t>(j)];
        if (h == 0.0) continue;
        const double* row = model.w_task.row(j);
        for (int l = 0; l < labels; ++l) r.task_logits[static_cast<std::size_t>(l)] += h * row[l];
    }
    if (model.task_mode == TaskMode::SoftmaxCE) {
        softmax(r.task_logits, r.task_probs);
    } else {
        r.task_probs.resize(static_cast<std::size_t>(labels));
        for (int l = 0; l < labels; ++l) {
            r.task_probs[static_cast<std::size_t>(l)] =
                1.0 / (1.0 + std::exp(-r.task_logits[static_cast<std::size_t>(l)]));
        }
    }

    if (model.has_topic_head()) {
        const int topics = model.num_topics();
        // Gradient reversal is the identity forward: the head consumes the
        // hidden vector as-is.
        r.topic_logits.assign(model.b_topic.begin(), model.b_topic.end());
        for (int j = 0; j < hidden; ++j) {
            const double h = r.hidden[static_cast<std::size_t>(j)];
            if (h == 0.0) continue;
            const double* row = model.w_topic.row(j);
            for (int t = 0; t < topics; ++t) {
                r.topic_logits[static_cast<std::size_t>(t)] += h * row[t];
            }
        }
        softmax(r.topic_logits, r.topic_probs);
    }
    return r;
}

std::vector<double> grl_backward(std::span<const double> upstream, double lambda) {
    std::vector<double> out(upstream.size());
    for (std::size_t i = 0; i < upstream.size(); ++i) out[i] = -lambda * upstream[i];
    return out;
}

Gradients backward(const ClassifierModel& model, const Batch& batch,
                   const std::vector<ForwardResult>& caches) {
    const std::size_t batch_size = batch.inputs.size();
    if (batch_size == 0 || batch.gold_labels.size() != batch_size ||
        caches.size() != batch_size ||
        (model.has_topic_head() && batch.topic_targets.size() != batch_size)) {
        throw DimensionMismatchError("batch arrays disagree in length");
    }
    const int hidden = model.hidden_units;
    const int labels = model.num_labels();
    const int topics = model.num_topics();
    const double inv_b = 1.0 / static_cast<double>(batch_size);

    Gradients g;
    g.w_hidden = Matrix(model.feature_space.hash_dimension, hidden);
    g.b_hidden.assign(static_cast<std::size_t>(hidden), 0.0);
    g.w_task = Matrix(hidden, labels);
    g.b_task.assign(static_cast<std::size_t>(labels), 0.0);
    if (model.has_topic_head()) {
        g.w_topic = Matrix(hidden, topics);
        g.b_topic.assign(static_cast<std::size_t>(topics), 0.0);
    }

    std::size_t topic_count = 0;
    for (std::size_t i = 0; i < batch_size; ++i) {
        if (model.has_topic_head() && batch.topic_targets[i] >= 0) ++topic_count;
    }
    const double inv_topic =
        topic_count > 0 ? 1.0 / static_cast<double>(topic_count) : 0.0;

    std::vector<double> d_task(static_cast<std::size_t>(labels));
    std::vector<double> d_topic(static_cast<std::size_t>(topics));
    std::vector<double> d_h_task(static_cast<std::size_t>(hidden));
    std::vector<double> d_h_topic(static_cast<std::size_t>(hidden));

    for (std::size_t i = 0; i < batch_size; ++i) {
        const ForwardResult& cache = caches[i];
        const auto& gold = batch.gold_labels[i];

        // d(loss)/d(task logits), scaled by 1/B
        if (model.task_mode == TaskMode::SoftmaxCE) {
            for (int l = 0; l < labels; ++l) {
                d_task[static_cast<std::size_t>(l)] =
                    cache.task_probs[static_cast<std::size_t>(l)] * inv_b;
            }
            for (const int y : gold) {
                d_task[static_cast<std::size_t>(y)] -= inv_b;
                g.task_loss +=
                    -std::log(std::max(cache.task_probs[static_cast<std::size_t>(y)],
                                       kProbFloor)) *
                    inv_b;
            }
        } else {
            for (int l = 0; l < labels; ++l) {
                const double p = cache.task_probs[static_cast<std::size_t>(l)];
                const bool positive =
                    std::find(gold.begin(), gold.end(), l) != gold.end();
                d_task[static_cast<std::size_t>(l)] = (p - (positive ? 1.0 : 0.0)) * inv_b;
                const double q = positive ? p : 1.0 - p;
                g.task_loss += -std::log(std::max(q, kProbFloor)) * inv_b;
            }
        }

        const bool use_topic = model.has_topic_head() && batch.topic_targets[i] >= 0;
        if (use_topic) {
            const int target = batch.topic_targets[i];
            for (int t = 0; t < topics; ++t) {
                d_topic[static_cast<std::size_t>(t)] =
                    cache.topic_probs[static_cast<std::size_t>(t)] * inv_topic;
            }
            d_topic[static_cast<std::size_t>(target)] -= inv_topic;
            g.topic_loss +=
                -std::log(std::max(cache.topic_probs[static_cast<std::size_t>(target)],
                                   kProbFloor)) *
                inv_topic;
        }

        // Head parameter gradients and the two hidden-layer pulls.
        std::fill(d_h_task.begin(), d_h_task.end(), 0.0);
        std::fill(d_h_topic.begin(), d_h_topic.end(), 0.0);
        for (int j = 0; j < hidden; ++j) {
            const double h = cache.hidden[static_cast<std::size_t>(j)];
            const double* w_row = model.w_task.row(j);
            double* g_row = g.w_task.row(j);
            double acc = 0.0;
            for (int l = 0; l < labels; ++l) {
                g_row[l] += h * d_task[static_cast<std::size_t>(l)];
                acc += w_row[l] * d_task[static_cast<std::size_t>(l)];
            }
            d_h_task[static_cast<std::size_t>(j)] = acc;
        }
        for (int l = 0; l < labels; ++l) {
            g.b_task[static_cast<std::size_t>(l)] += d_task[static_cast<std::size_t>(l)];
        }
        if (use_topic) {
            for (int j = 0; j < hidden; ++j) {
                const double h = cache.hidden[static_cast<std::size_t>(j)];
                const double* w_row = model.w_topic.row(j);
                double* g_row = g.w_topic.row(j);
                double acc = 0.0;
                for (int t = 0; t < topics; ++t) {
                    g_row[t] += h * d_topic[static_cast<std::size_t>(t)];
                    acc += w_row[t] * d_topic[static_cast<std::size_t>(t)];
                }
                d_h_topic[static_cast<std::size_t>(j)] = acc;
            }
            for (int t = 0; t < topics; ++t) {
                g.b_topic[static_cast<std::size_t>(t)] += d_topic[static_cast<std::size_t>(t)];
            }
        }

        // Combine at the reversal node, then pass dropout and ReLU gates.
        for (int j = 0; j < hidden; ++j) {
            double dz = d_h_task[static_cast<std::size_t>(j)] -
                        model.lambda * d_h_topic[static_cast<std::size_t>(j)];
            if (!cache.dropout_scale.empty()) {
                dz *= cache.dropout_scale[static_cast<std::size_t>(j)];
            }
            if (cache.pre_hidden[static_cast<std::size_t>(j)] <= 0.0) dz = 0.0;
            d_h_task[static_cast<std::size_t>(j)] = dz;  // reuse as d_z
        }
        const std::vector<double>& d_z = d_h_task;
        for (const auto& [idx, w] : batch.inputs[i]->entries) {
            double* g_row = g.w_hidden.row(idx);
            for (int j = 0; j < hidden; ++j) g_row[j] += w * d_z[static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < hidden; ++j) {
            g.b_hidden[static_cast<std::size_t>(j)] += d_z[static_cast<std::size_t>(j)];
        }
    }

    if (!std::isfinite(g.task_loss) || !std::isfinite(g.topic_loss)) {
        throw NonFiniteLossError("loss is not finite (task=" +
                                 std::to_string(g.task_loss) +
                                 ", topic=" + std::to_string(g.topic_loss) + ")");
    }
    return g;
}

std::vector<int> predict_one(const ClassifierModel& model, const SparseVector& x) {
    const ForwardResult r = forward(model, x, /*training=*/false, 0);
    std::vector<int> out;
    if (model.task_mode == TaskMode::SoftmaxCE) {
        int best = 0;
        for (int l = 1; l < model.num_labels(); ++l) {
            if (r.task_probs[static_cast<std::size_t>(l)] >
                r.task_probs[static_cast<std::size_t>(best)]) {
                best = l;
            }
        }
        out.push_back(best);
    } else {
        for (int l = 0; l < model.num_labels(); ++l) {
            if (r.task_probs[static_cast<std::size_t>(l)] >= 0.5) out.push_back(l);
        }
    }
    return out;
}

std::vector<std::vector<int>> predict(const ClassifierModel& model,
                                      std::span<const Instance> instances) {
    std::vector<std::vector<int>> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        out.push_back(predict_one(model, featurize(inst, model.feature_space)));
    }
    return out;
}

// --- serialization ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'B', 'L', 'C', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto len = read_pod<std::uint64_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    write_pod<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in) {
    const auto len = read_pod<std::uint64_t>(in);
    std::vector<double> v(len);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(len * sizeof(double)));
    return v;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    write_pod<std::int32_t>(out, m.rows);
    write_pod<std::int32_t>(out, m.cols);
    write_doubles(out, m.data);
}

Matrix read_matrix(std::istream& in) {
    Matrix m;
    m.rows = read_pod<std::int32_t>(in);
    m.cols = read_pod<std::int32_t>(in);
    m.data = read_doubles(in);
    return m;
}

}  // namespace

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint32_t>(out, model.task_mode == TaskMode::SoftmaxCE ? 0 : 1);
    write_pod<std::int32_t>(out, model.feature_space.hash_dimension);
    write_pod<std::uint64_t>(out, model.feature_space.hash_seed);
    write_pod<std::uint32_t>(
        out, model.feature_space.weighting == FeatureWeighting::Binary ? 0 : 1);
    write_pod<std::uint64_t>(out, model.feature_space.idf.size());
    for (const auto& [term, value] : model.feature_space.idf) {
        write_string(out, term);
        write_pod<double>(out, value);
    }
    write_pod<std::int32_t>(out, model.hidden_units);
    write_pod<double>(out, model.dropout_rate);
    write_pod<double>(out, model.lambda);
    write_pod<std::uint64_t>(out, model.label_names.size());
    for (const auto& name : model.label_names) write_string(out, name);
    write_pod<std::uint64_t>(out, model.topic_ids.size());
    for (const int id : model.topic_ids) write_pod<std::int32_t>(out, id);
    write_matrix(out, model.w_hidden);
    write_doubles(out, model.b_hidden);
    write_matrix(out, model.w_task);
    write_doubles(out, model.b_task);
    if (model.has_topic_head()) {
        write_matrix(out, model.w_topic);
        write_doubles(out, model.b_topic);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model: " + path.string());
    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a classifier model file: " + path.string());
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) {
        throw IoError("unsupported model version: " + std::to_string(version));
    }
    ClassifierModel model;
    model.task_mode =
        read_pod<std::uint32_t>(in) == 0 ? TaskMode::SoftmaxCE : TaskMode::SigmoidBCE;
    model.feature_space.hash_dimension = read_pod<std::int32_t>(in);
    model.feature_space.hash_seed = read_pod<std::uint64_t>(in);
    model.feature_space.weighting = read_pod<std::uint32_t>(in) == 0
                                        ? FeatureWeighting::Binary
                                        : FeatureWeighting::TfIdf;
    const auto idf_count = read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < idf_count; ++i) {
        std::string term = read_string(in);
        model.feature_space.idf[std::move(term)] = read_pod<double>(in);
    }
    model.hidden_units = read_pod<std::int32_t>(in);
    model.dropout_rate = read_pod<double>(in);
    model.lambda = read_pod<double>(in);
    const auto label_count = read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < label_count; ++i) {
        model.label_names.push_back(read_string(in));
    }
    const auto topic_count = read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < topic_count; ++i) {
        model.topic_ids.push_back(read_pod<std::int32_t>(in));
    }
    model.w_hidden = read_matrix(in);
    model.b_hidden = read_doubles(in);
    model.w_task = read_matrix(in);
    model.b_task = read_doubles(in);
    if (topic_count > 0) {
        model.w_topic = read_matrix(in);
        model.b_topic = read_doubles(in);
    }
    if (!in) throw IoError("model file truncated: " + path.string());
    return model;
}

}  // namespace biaslens
