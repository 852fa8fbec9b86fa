#include "resfed/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "resfed/errors.hpp"
#include "resfed/rng.hpp"

namespace resfed {
namespace {

Dataset take_rows(const Dataset& ds, const std::vector<size_t>& idx) {
    Dataset out;
    out.dim = ds.dim;
    out.n_classes = ds.n_classes;
    out.features.reserve(idx.size() * ds.dim);
    out.labels.reserve(idx.size());
    for (size_t i : idx) {
        const float* r = ds.row(i);
        out.features.insert(out.features.end(), r, r + ds.dim);
        out.labels.push_back(ds.labels[i]);
    }
    return out;
}

uint32_t read_be32(std::ifstream& f, const std::string& path, size_t offset) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated at byte " + std::to_string(offset));
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) |
           uint32_t(b[3]);
}

} // namespace

Dataset make_blobs(size_t n_samples, size_t dim, int n_classes, float spread,
                   uint64_t seed) {
    if (n_samples == 0 || dim == 0 || n_classes <= 0 || !(spread > 0))
        throw ConfigError("make_blobs: counts must be positive and spread > 0");
    if (static_cast<size_t>(n_classes) > n_samples)
        throw ConfigError("make_blobs: more classes than samples");

    // Class centers on a unit lattice: digits of the class index in base
    // `side` give the grid coordinates.
    size_t side = 1;
    while (std::pow(double(side), double(dim)) < n_classes) ++side;
    std::vector<std::vector<float>> centers(n_classes, std::vector<float>(dim, 0.0f));
    for (int c = 0; c < n_classes; ++c) {
        size_t rem = static_cast<size_t>(c);
        for (size_t j = 0; j < dim; ++j) {
            centers[c][j] = static_cast<float>(rem % side);
            rem /= side;
        }
    }

    Dataset ds;
    ds.dim = dim;
    ds.n_classes = n_classes;
    ds.features.resize(n_samples * dim);
    ds.labels.resize(n_samples);

    Rng rng(mix_seed(seed, 0xb10b5));
    // Round-robin labels keep the classes balanced; shuffle the row order after.
    std::vector<size_t> order(n_samples);
    std::iota(order.begin(), order.end(), size_t{0});
    rng.shuffle(order);
    for (size_t i = 0; i < n_samples; ++i) {
        int label = static_cast<int>(i % static_cast<size_t>(n_classes));
        size_t r = order[i];
        ds.labels[r] = label;
        for (size_t j = 0; j < dim; ++j)
            ds.features[r * dim + j] =
                centers[label][j] + spread * static_cast<float>(rng.normal());
    }
    return ds;
}

Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError(images_path + ": cannot open");
    uint32_t magic = read_be32(imgs, images_path, 0);
    if (magic != 0x00000803)
        throw FormatError(images_path + ": bad magic at byte 0");
    uint32_t n = read_be32(imgs, images_path, 4);
    uint32_t rows = read_be32(imgs, images_path, 8);
    uint32_t cols = read_be32(imgs, images_path, 12);

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw FormatError(labels_path + ": cannot open");
    uint32_t lmagic = read_be32(labs, labels_path, 0);
    if (lmagic != 0x00000801)
        throw FormatError(labels_path + ": bad magic at byte 0");
    uint32_t ln = read_be32(labs, labels_path, 4);
    if (ln != n)
        throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                          " does not match image count " + std::to_string(n) +
                          " (byte 4)");

    Dataset ds;
    ds.dim = size_t(rows) * cols;
    ds.features.resize(size_t(n) * ds.dim);
    ds.labels.resize(n);

    std::vector<unsigned char> buf(ds.dim);
    for (uint32_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size())))
            throw FormatError(images_path + ": truncated at byte " +
                              std::to_string(16 + size_t(i) * ds.dim));
        for (size_t j = 0; j < ds.dim; ++j)
            ds.features[size_t(i) * ds.dim + j] = float(buf[j]) / 255.0f;
    }
    for (uint32_t i = 0; i < n; ++i) {
        char b;
        if (!labs.read(&b, 1))
            throw FormatError(labels_path + ": truncated at byte " +
                              std::to_string(8 + i));
        ds.labels[i] = static_cast<unsigned char>(b);
    }
    ds.n_classes = ds.labels.empty()
                       ? 0
                       : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    return ds;
}

std::vector<Dataset> partition_iid(const Dataset& ds, size_t n_clients,
                                   uint64_t seed) {
    if (n_clients == 0 || n_clients > ds.size())
        throw ConfigError("partition_iid: need 1 <= n_clients <= n_samples");
    std::vector<size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(mix_seed(seed, 0x11d));
    rng.shuffle(idx);

    std::vector<Dataset> shards;
    shards.reserve(n_clients);
    size_t base = ds.size() / n_clients;
    size_t extra = ds.size() % n_clients;
    size_t pos = 0;
    for (size_t k = 0; k < n_clients; ++k) {
        size_t len = base + (k < extra ? 1 : 0);
        shards.push_back(take_rows(ds, {idx.begin() + pos, idx.begin() + pos + len}));
        pos += len;
    }
    return shards;
}

std::vector<Dataset> partition_label_shard(const Dataset& ds, size_t n_clients,
                                           size_t classes_per_client,
                                           uint64_t seed) {
    size_t n_classes = static_cast<size_t>(ds.n_classes);
    if (classes_per_client == 0 || classes_per_client > n_classes)
        throw ConfigError("partition_label_shard: classes_per_client out of range");
    size_t total_shards = n_clients * classes_per_client;
    if (total_shards % n_classes != 0)
        throw ConfigError(
            "partition_label_shard: n_clients * classes_per_client must be a "
            "multiple of the class count");
    size_t shards_per_class = total_shards / n_classes;

    Rng rng(mix_seed(seed, 0x5a4d));

    // Per-class sample pools, shuffled, then cut into equal-count shards.
    std::vector<std::vector<size_t>> by_class(n_classes);
    for (size_t i = 0; i < ds.size(); ++i) {
        int l = ds.labels[i];
        if (l < 0 || static_cast<size_t>(l) >= n_classes)
            throw ConfigError("partition_label_shard: label out of range");
        by_class[l].push_back(i);
    }
    for (auto& pool : by_class) {
        if (pool.size() < shards_per_class)
            throw ConfigError("partition_label_shard: a class has fewer samples "
                              "than required shards");
        rng.shuffle(pool);
    }

    // Class sequence c0..c0, c1..c1, ... dealt cpc-at-a-time: client k gets
    // classes {(k*cpc + j) mod C}, all distinct since cpc <= C. A random class
    // relabelling keeps assignments seed-dependent.
    std::vector<size_t> class_perm(n_classes);
    std::iota(class_perm.begin(), class_perm.end(), size_t{0});
    rng.shuffle(class_perm);

    std::vector<size_t> next_shard(n_classes, 0);
    std::vector<Dataset> shards(n_clients);
    for (size_t k = 0; k < n_clients; ++k) {
        std::vector<size_t> rows;
        for (size_t j = 0; j < classes_per_client; ++j) {
            size_t c = class_perm[(k * classes_per_client + j) % n_classes];
            const auto& pool = by_class[c];
            size_t s = next_shard[c]++;
            size_t base = pool.size() / shards_per_class;
            size_t extra = pool.size() % shards_per_class;
            size_t begin = s * base + std::min(s, extra);
            size_t len = base + (s < extra ? 1 : 0);
            rows.insert(rows.end(), pool.begin() + begin, pool.begin() + begin + len);
        }
        shards[k] = take_rows(ds, rows);
    }
    return shards;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds,
                                             double test_fraction,
                                             uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw ConfigError("split_train_test: test_fraction must be in [0, 1)");
    std::vector<size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(mix_seed(seed, 0x7e57));
    rng.shuffle(idx);
    size_t n_test = static_cast<size_t>(std::llround(test_fraction * double(ds.size())));
    std::vector<size_t> test_idx(idx.begin(), idx.begin() + n_test);
    std::vector<size_t> train_idx(idx.begin() + n_test, idx.end());
    return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

} // namespace resfed
