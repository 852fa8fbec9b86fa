#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "resfed/harness.hpp"

namespace resfed {

/// Reads a JSON config file, applies dotted `key=value` overrides, and
/// validates. An empty file yields all defaults. Unknown keys are rejected
/// with the offending key named.
///
/// Schema (all keys optional):
///   seed                       integer
///   model.hidden               array of layer widths
///   train.{learning_rate, momentum, batch_size, local_epochs}
///   dataset.{kind: synthetic|idx, n_samples, dim, n_classes, spread,
///            test_fraction, train_images, train_labels, test_images,
///            test_labels}
///   partition.{kind: iid|label_shard, classes_per_client}
///   protocol.{n_clients, total_rounds, warmup_rounds,
///             mode: no_compression|compress_weights|compress_gradients|resfed,
///             predictor.window,
///             uplink_compression.{mode: identity|sparse_quant, sparsity,
///                                 bits, entropy: none|huffman},
///             downlink_compression.{...same...},
///             weighted_aggregation}
///   target_accuracy            number or null
///   checkpoint_rounds          array of 1-based round numbers
///   output_dir                 string
ExperimentConfig parse_config(const std::string& path,
                              const std::vector<std::string>& overrides);

/// Same, from an in-memory document.
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Inverse of config_from_json; the echo round-trips to an equal config.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

/// Applies one `dotted.key=value` override to a JSON document. The value is
/// parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

} // namespace resfed
