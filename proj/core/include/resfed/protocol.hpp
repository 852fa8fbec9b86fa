#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "resfed/codec.hpp"
#include "resfed/mlp.hpp"
#include "resfed/trajectory.hpp"
#include "resfed/wire.hpp"

namespace resfed {

enum class Mode {
    no_compression,
    compress_weights,
    compress_gradients,
    resfed,
};

/// Federation round-loop configuration. Uplink and downlink compression are
/// independent.
struct ProtocolConfig {
    size_t n_clients = 10;
    size_t total_rounds = 50;
    /// 0 = auto: max(predictor.window, 1). Early rounds exchange raw models
    /// to fill the trajectories.
    size_t warmup_rounds = 0;
    Mode mode = Mode::resfed;
    PredictorConfig predictor;
    CompressionConfig uplink_compression;
    CompressionConfig downlink_compression;
    bool weighted_aggregation = true;

    size_t effective_warmup() const;
    void validate() const;
};

/// One client's federation state: model, data shard, and the two
/// synchronized trajectories (local = post-training, global = recovered).
struct ClientState {
    uint32_t id = 0;
    MlpModel model;
    Trajectory local_traj;  // trained / uplink-synced models
    Trajectory global_traj; // recovered global models
    Dataset shard;
    ParamVector last_global; // most recent recovered global (survives window 0)
};

/// Server-side mirror: per-client trajectory replicas plus the global model.
struct ServerState {
    ParamVector global;
    std::vector<Trajectory> local_trajs;  // one per client
    std::vector<Trajectory> global_trajs; // one per client
    std::vector<ParamVector> last_synced_global; // per-client downlink state
    std::vector<uint64_t> client_weights; // shard sizes
};

struct MessageRecord {
    uint64_t header_bits = 0;
    uint64_t payload_bits = 0;
};

/// Exact bit accounting for one round, one entry per client per direction.
struct RoundMessageLog {
    std::vector<MessageRecord> uplink;
    std::vector<MessageRecord> downlink;

    uint64_t uplink_bits() const;
    uint64_t downlink_bits() const;
};

/// Per-round outcome captured by run(): the aggregated global model, the
/// message log, and the client-0 uplink residual (for magnitude analysis).
struct RoundOutcome {
    size_t round = 0;
    bool warmup = false;
    ParamVector global;
    RoundMessageLog log;
    ParamVector sample_residual; // client 0 uplink residual (empty in warm-up)
};

struct RunResult {
    MlpModel final_model;
    std::vector<RoundOutcome> rounds;
};

/// Sample-count weighted elementwise mean, summed in ascending client order.
ParamVector aggregate(const std::vector<ParamVector>& models,
                      const std::vector<uint64_t>& weights);

/// Full deterministic federation run: warm-up rounds followed by mode
/// rounds, one shard per client.
RunResult run(const ProtocolConfig& config, const TrainConfig& train,
              const std::vector<Dataset>& shards,
              const std::vector<size_t>& layer_sizes, uint64_t seed);

namespace detail {

/// Internal round engine, exposed for tests that need to drive single
/// rounds or inspect trajectory state between rounds.
class Federation {
public:
    Federation(const ProtocolConfig& config, const TrainConfig& train,
               const std::vector<Dataset>& shards,
               const std::vector<size_t>& layer_sizes, uint64_t seed);

    /// Raw-model exchange round (t < warmup). Fills all four trajectories.
    RoundOutcome warmup_round(size_t t);

    /// One ResFed round (downlink residuals staged and delivered, training,
    /// uplink residuals back, aggregation).
    RoundOutcome resfed_round(size_t t);

    /// One baseline round (no_compression / compress_weights /
    /// compress_gradients).
    RoundOutcome baseline_round(size_t t);

    RoundOutcome round(size_t t);

    const ServerState& server() const { return server_; }
    const std::vector<ClientState>& clients() const { return clients_; }
    const ProtocolConfig& config() const { return config_; }

private:
    struct Downlink {
        ResidualMessage msg;
        MessageRecord bits;
    };

    /// Downlink residual generation + global-trajectory sync for all
    /// clients, from the current aggregated model.
    void stage_downlink(uint32_t round_id);

    ProtocolConfig config_;
    TrainConfig train_;
    ServerState server_;
    std::vector<ClientState> clients_;
    std::vector<Downlink> staged_downlink_;
};

} // namespace detail

} // namespace resfed
