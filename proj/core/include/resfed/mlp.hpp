#pragma once

#include <cstdint>
#include <vector>

#include "resfed/dataset.hpp"
#include "resfed/param_vector.hpp"

namespace resfed {

/// Local SGD hyperparameters (momentum 0.9, lr 0.01, one epoch by default).
struct TrainConfig {
    float learning_rate = 0.01f;
    float momentum = 0.9f;
    size_t batch_size = 64;
    size_t local_epochs = 1;
    uint64_t seed = 0;

    void validate() const;
};

/// Small fully connected network with ReLU hidden layers and a
/// softmax cross-entropy head. Parameters live in one flat ParamVector
/// (per layer: weights row-major [in][out], then biases).
struct MlpModel {
    std::vector<size_t> layer_sizes;
    ParamVector params;
    ParamVector momentum_buffer;

    size_t input_dim() const { return layer_sizes.front(); }
    size_t output_dim() const { return layer_sizes.back(); }
};

/// Borrowed view of a feature/label batch.
struct BatchView {
    const float* x = nullptr;
    const int* y = nullptr;
    size_t n = 0;
    size_t dim = 0;
};

BatchView full_batch(const Dataset& ds);

struct ForwardResult {
    float loss = 0.0f;
    std::vector<int> predictions;
};

struct EvalResult {
    double accuracy = 0.0;
    float loss = 0.0f;
};

/// Number of parameters for a given architecture.
size_t param_count(const std::vector<size_t>& layer_sizes);

/// Deterministic init: weights uniform in +-sqrt(6/(fan_in+fan_out)),
/// biases and momentum zero. Same (layer_sizes, seed) is bit-identical.
MlpModel init_model(const std::vector<size_t>& layer_sizes, uint64_t seed);

/// Mean softmax cross-entropy loss and argmax predictions.
ForwardResult forward(const MlpModel& model, const BatchView& batch);

/// d(mean loss)/d(params) via backpropagation; same shape as params.
ParamVector gradient(const MlpModel& model, const BatchView& batch);

/// Mini-batch SGD with momentum. Batch order comes from a generator seeded
/// by (config.seed, client_id, round), so clients never share streams.
/// The input model is not mutated.
MlpModel local_train(const MlpModel& model, const Dataset& dataset,
                     const TrainConfig& config, uint64_t round = 0,
                     uint64_t client_id = 0);

/// Accuracy and mean loss over a dataset.
EvalResult evaluate(const MlpModel& model, const Dataset& dataset);

} // namespace resfed
