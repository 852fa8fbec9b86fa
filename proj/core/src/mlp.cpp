#include "resfed/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "resfed/errors.hpp"
#include "resfed/rng.hpp"

namespace resfed {
namespace {

void check_batch(const MlpModel& model, const BatchView& batch) {
    if (batch.dim != model.input_dim())
        throw ShapeError("batch feature dim " + std::to_string(batch.dim) +
                         " does not match input layer " +
                         std::to_string(model.input_dim()));
    if (batch.n == 0) throw EmptyDataError("empty batch");
}

// Activations for every layer, one sample at a time. Row-major weights:
// layer l maps layer_sizes[l] -> layer_sizes[l+1].
struct LayerOffsets {
    size_t w, b;
};

std::vector<LayerOffsets> layer_offsets(const std::vector<size_t>& sizes) {
    std::vector<LayerOffsets> off(sizes.size() - 1);
    size_t pos = 0;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        off[l].w = pos;
        pos += sizes[l] * sizes[l + 1];
        off[l].b = pos;
        pos += sizes[l + 1];
    }
    return off;
}

// Softmax in-place over logits, numerically shifted by the max.
void softmax(std::vector<float>& z) {
    float m = *std::max_element(z.begin(), z.end());
    float sum = 0.0f;
    for (float& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (float& v : z) v /= sum;
}

} // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
    if (!(momentum >= 0 && momentum < 1))
        throw ConfigError("train.momentum must be in [0, 1)");
    if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
    if (local_epochs == 0) throw ConfigError("train.local_epochs must be positive");
}

size_t param_count(const std::vector<size_t>& layer_sizes) {
    size_t n = 0;
    for (size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    return n;
}

MlpModel init_model(const std::vector<size_t>& layer_sizes, uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw ConfigError("init_model: need at least input and output layers");
    for (size_t s : layer_sizes)
        if (s == 0) throw ConfigError("init_model: layer sizes must be positive");

    MlpModel m;
    m.layer_sizes = layer_sizes;
    size_t total = param_count(layer_sizes);
    m.params.values.assign(total, 0.0f);
    m.momentum_buffer.values.assign(total, 0.0f);

    Rng rng(mix_seed(seed, 0x1417));
    auto off = layer_offsets(layer_sizes);
    for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        size_t fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
        float bound = std::sqrt(6.0f / float(fan_in + fan_out));
        for (size_t i = 0; i < fan_in * fan_out; ++i)
            m.params.values[off[l].w + i] = rng.uniform(-bound, bound);
        m.params.segments.push_back({"layer" + std::to_string(l) + ".w", off[l].w,
                                     fan_in * fan_out});
        m.params.segments.push_back({"layer" + std::to_string(l) + ".b", off[l].b,
                                     fan_out});
    }
    m.momentum_buffer.segments = m.params.segments;
    return m;
}

ForwardResult forward(const MlpModel& model, const BatchView& batch) {
    check_batch(model, batch);
    auto off = layer_offsets(model.layer_sizes);
    const auto& p = model.params.values;
    size_t n_layers = model.layer_sizes.size() - 1;

    ForwardResult res;
    res.predictions.resize(batch.n);
    float loss_sum = 0.0f;
    std::vector<float> act, next;
    for (size_t s = 0; s < batch.n; ++s) {
        act.assign(batch.x + s * batch.dim, batch.x + (s + 1) * batch.dim);
        for (size_t l = 0; l < n_layers; ++l) {
            size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
            next.assign(out, 0.0f);
            for (size_t j = 0; j < out; ++j) {
                float z = p[off[l].b + j];
                for (size_t i = 0; i < in; ++i)
                    z += p[off[l].w + i * out + j] * act[i];
                next[j] = (l + 1 < n_layers) ? std::max(0.0f, z) : z;
            }
            act.swap(next);
        }
        int label = batch.y[s];
        if (label < 0 || static_cast<size_t>(label) >= act.size())
            throw ShapeError("label out of range for output layer");
        res.predictions[s] = int(std::max_element(act.begin(), act.end()) - act.begin());
        softmax(act);
        loss_sum += -std::log(std::max(act[label], 1e-30f));
    }
    res.loss = loss_sum / float(batch.n);
    return res;
}

ParamVector gradient(const MlpModel& model, const BatchView& batch) {
    check_batch(model, batch);
    auto off = layer_offsets(model.layer_sizes);
    const auto& p = model.params.values;
    size_t n_layers = model.layer_sizes.size() - 1;

    ParamVector grad(model.params.size());
    grad.segments = model.params.segments;

    std::vector<std::vector<float>> acts(n_layers + 1);
    std::vector<float> delta, prev_delta;
    for (size_t s = 0; s < batch.n; ++s) {
        acts[0].assign(batch.x + s * batch.dim, batch.x + (s + 1) * batch.dim);
        for (size_t l = 0; l < n_layers; ++l) {
            size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
            acts[l + 1].assign(out, 0.0f);
            for (size_t j = 0; j < out; ++j) {
                float z = p[off[l].b + j];
                for (size_t i = 0; i < in; ++i)
                    z += p[off[l].w + i * out + j] * acts[l][i];
                acts[l + 1][j] = (l + 1 < n_layers) ? std::max(0.0f, z) : z;
            }
        }
        // Output delta: softmax - onehot, scaled by the batch-mean factor.
        delta = acts[n_layers];
        softmax(delta);
        int label = batch.y[s];
        if (label < 0 || static_cast<size_t>(label) >= delta.size())
            throw ShapeError("label out of range for output layer");
        delta[label] -= 1.0f;
        float scale = 1.0f / float(batch.n);

        for (size_t l = n_layers; l-- > 0;) {
            size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
            for (size_t j = 0; j < out; ++j) {
                float d = delta[j] * scale;
                grad.values[off[l].b + j] += d;
                for (size_t i = 0; i < in; ++i)
                    grad.values[off[l].w + i * out + j] += d * acts[l][i];
            }
            if (l > 0) {
                prev_delta.assign(in, 0.0f);
                for (size_t i = 0; i < in; ++i) {
                    if (acts[l][i] <= 0.0f) continue; // ReLU gate
                    float d = 0.0f;
                    for (size_t j = 0; j < out; ++j)
                        d += p[off[l].w + i * out + j] * delta[j];
                    prev_delta[i] = d;
                }
                delta.swap(prev_delta);
            }
        }
    }
    return grad;
}

MlpModel local_train(const MlpModel& model, const Dataset& dataset,
                     const TrainConfig& config, uint64_t round,
                     uint64_t client_id) {
    config.validate();
    if (dataset.size() == 0) throw EmptyDataError("local_train: empty dataset");
    if (dataset.dim != model.input_dim())
        throw ShapeError("local_train: dataset dim does not match model");

    MlpModel out = model;
    Rng rng(mix_seed(config.seed, client_id, round));
    std::vector<size_t> order(dataset.size());

    for (size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), size_t{0});
        // a single batch spanning the epoch is order-invariant; keeping the
        // natural order makes the full-batch step match gradient() bit-exactly
        if (config.batch_size < order.size()) rng.shuffle(order);
        std::vector<float> bx;
        std::vector<int> by;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t len = std::min(config.batch_size, order.size() - start);
            bx.resize(len * dataset.dim);
            by.resize(len);
            for (size_t i = 0; i < len; ++i) {
                const float* r = dataset.row(order[start + i]);
                std::copy(r, r + dataset.dim, bx.begin() + i * dataset.dim);
                by[i] = dataset.labels[order[start + i]];
            }
            BatchView batch{bx.data(), by.data(), len, dataset.dim};
            ParamVector g = gradient(out, batch);
            // buf <- momentum * buf + g; params <- params - lr * buf
            for (size_t i = 0; i < out.params.size(); ++i) {
                float buf = config.momentum * out.momentum_buffer.values[i] +
                            g.values[i];
                out.momentum_buffer.values[i] = buf;
                out.params.values[i] -= config.learning_rate * buf;
            }
        }
    }
    return out;
}

BatchView full_batch(const Dataset& ds) {
    return {ds.features.data(), ds.labels.data(), ds.size(), ds.dim};
}

EvalResult evaluate(const MlpModel& model, const Dataset& dataset) {
    if (dataset.size() == 0) throw EmptyDataError("evaluate: empty dataset");
    ForwardResult f = forward(model, full_batch(dataset));
    size_t correct = 0;
    for (size_t i = 0; i < dataset.size(); ++i)
        if (f.predictions[i] == dataset.labels[i]) ++correct;
    return {double(correct) / double(dataset.size()), f.loss};
}

} // namespace resfed
