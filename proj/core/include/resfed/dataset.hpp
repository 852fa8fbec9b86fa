#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace resfed {

/// Row-major feature matrix plus class labels.
struct Dataset {
    std::vector<float> features; // n * dim
    size_t dim = 0;
    std::vector<int> labels;
    int n_classes = 0;

    size_t size() const { return labels.size(); }
    const float* row(size_t i) const { return features.data() + i * dim; }
};

/// Gaussian clusters on a deterministic lattice, one cluster per class.
/// Class counts are balanced (differ by at most one).
Dataset make_blobs(size_t n_samples, size_t dim, int n_classes, float spread,
                   uint64_t seed);

/// Reads an IDX image/label file pair (big-endian MNIST layout).
/// Pixels are scaled to [0, 1].
Dataset read_idx(const std::string& images_path, const std::string& labels_path);

/// Random permutation split into near-equal shards (sizes differ by <= 1).
std::vector<Dataset> partition_iid(const Dataset& ds, size_t n_clients,
                                   uint64_t seed);

/// Label-shard partition: every client receives samples from exactly
/// `classes_per_client` distinct classes, with balanced shard sizes.
std::vector<Dataset> partition_label_shard(const Dataset& ds, size_t n_clients,
                                           size_t classes_per_client,
                                           uint64_t seed);

/// Deterministic train/test split; `test_fraction` of rows go to the second
/// dataset after a seeded shuffle.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds,
                                             double test_fraction,
                                             uint64_t seed);

} // namespace resfed
