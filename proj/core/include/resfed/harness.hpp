#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resfed/dataset.hpp"
#include "resfed/mlp.hpp"
#include "resfed/protocol.hpp"

namespace resfed {

/// Data source: deterministic Gaussian blobs, or MNIST-layout IDX files.
struct DatasetSpec {
    enum class Kind { synthetic, idx };
    Kind kind = Kind::synthetic;

    // synthetic
    size_t n_samples = 2000;
    size_t dim = 16;
    int n_classes = 4;
    float spread = 1.0f;
    double test_fraction = 0.2;

    // idx
    std::string train_images, train_labels;
    std::string test_images, test_labels;
};

struct PartitionSpec {
    enum class Kind { iid, label_shard };
    Kind kind = Kind::iid;
    size_t classes_per_client = 2;
};

struct ExperimentConfig {
    uint64_t seed = 1;
    std::vector<size_t> hidden = {32};
    TrainConfig train;
    ProtocolConfig protocol;
    DatasetSpec dataset;
    PartitionSpec partition;
    std::optional<double> target_accuracy;
    std::vector<size_t> checkpoint_rounds; // 1-based round numbers
    std::string output_dir;                // empty = keep results in memory only

    void validate() const;
};

/// One row of the experiment log. Totals always equal the sum of the
/// per-client entries.
struct RoundRecord {
    size_t round = 0;
    bool warmup = false;
    std::vector<uint64_t> uplink_bits_per_client;
    std::vector<uint64_t> downlink_bits_per_client;
    uint64_t uplink_bits = 0;
    uint64_t downlink_bits = 0;
    double uplink_cr = 1.0;   // uncompressed payload bits / actual bits
    double downlink_cr = 1.0;
    double test_accuracy = 0.0;
    float train_loss = 0.0f;
    double res_p50 = 0.0, res_p90 = 0.0, res_max = 0.0;
};

/// Weights / gradient / uplink-residual capture at one checkpoint round,
/// for the magnitude comparison study.
struct CheckpointSnapshot {
    size_t round = 0; // 1-based
    ParamVector weights;
    ParamVector gradient; // full-batch, client-0 shard, at the global model
    ParamVector residual; // client-0 uplink residual (or uplink payload)
};

struct ExperimentResult {
    std::vector<RoundRecord> records;
    MlpModel final_model;
    EvalResult final_eval;
    size_t n_params = 0;
    std::vector<CheckpointSnapshot> checkpoints;
};

struct MagnitudeRow {
    std::string name;
    double p50 = 0.0, p90 = 0.0, max = 0.0;
};

struct MemoryFootprint {
    uint64_t client_bits = 0;
    uint64_t server_bits = 0;
};

enum class SweepAxis { sparsity, mode, partition };

struct SweepEntry {
    std::string value;
    uint64_t seed = 0;
    double final_accuracy = 0.0;
    uint64_t uplink_bits = 0;
    uint64_t downlink_bits = 0;
    double uplink_cr = 1.0;
    double downlink_cr = 1.0;
};

/// Builds the datasets, runs the protocol, and evaluates the global model on
/// the held-out test set after every round. Deterministic in the config.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// BR = 1 - method / baseline. Throws on a zero baseline.
double bitsaving_rate(uint64_t baseline_bits, uint64_t method_bits);

/// Cumulative bits in one direction through the first round whose test
/// accuracy reaches the target; nullopt if no round does.
std::optional<uint64_t> volume_to_target(const std::vector<RoundRecord>& records,
                                         double target_accuracy,
                                         Direction direction);

/// p50 / p90 / max of |values| per named vector (lower nearest-rank).
std::vector<MagnitudeRow>
magnitude_stats(const std::vector<std::pair<std::string, ParamVector>>& vectors);

/// Trajectory cache cost: client 2*32*V*T bits, server N_clients times that.
MemoryFootprint memory_footprint(uint64_t n_params, uint64_t window,
                                 uint64_t n_clients);

/// One full run per axis value, seeds offset by the value index.
std::vector<SweepEntry> sweep(const ExperimentConfig& base, SweepAxis axis,
                              const std::vector<std::string>& values);

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);
std::string partition_name(PartitionSpec::Kind kind);
PartitionSpec::Kind partition_from_name(const std::string& name);

/// rounds.csv: one row per round, stable formatting.
void write_rounds_csv(const std::string& path,
                      const std::vector<RoundRecord>& records);

/// summary.json: config echo plus final metrics; stable key order.
void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const ExperimentResult& result);

/// snapshots/round_<t>.bin (weights|gradient|residual as raw little-endian
/// float32) plus snapshots/manifest.json.
void write_snapshots(const std::string& dir,
                     const std::vector<CheckpointSnapshot>& checkpoints);

/// Reads back what write_snapshots produced.
std::vector<CheckpointSnapshot> read_snapshots(const std::string& dir);

} // namespace resfed
