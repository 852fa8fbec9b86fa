#include "resfed/protocol.hpp"

#include <algorithm>

#include "resfed/errors.hpp"

namespace resfed {

size_t ProtocolConfig::effective_warmup() const {
    if (warmup_rounds != 0) return warmup_rounds;
    return std::max<size_t>(predictor.window, 1);
}

void ProtocolConfig::validate() const {
    if (n_clients == 0) throw ConfigError("protocol.n_clients must be positive");
    if (total_rounds == 0) throw ConfigError("protocol.total_rounds must be positive");
    if (mode == Mode::resfed) {
        if (effective_warmup() < predictor.window)
            throw ConfigError("protocol.warmup_rounds must cover the predictor window");
        if (effective_warmup() > total_rounds)
            throw ConfigError("protocol.total_rounds must include the warm-up rounds");
    }
    uplink_compression.validate();
    downlink_compression.validate();
}

uint64_t RoundMessageLog::uplink_bits() const {
    uint64_t sum = 0;
    for (const auto& m : uplink) sum += m.header_bits + m.payload_bits;
    return sum;
}

uint64_t RoundMessageLog::downlink_bits() const {
    uint64_t sum = 0;
    for (const auto& m : downlink) sum += m.header_bits + m.payload_bits;
    return sum;
}

ParamVector aggregate(const std::vector<ParamVector>& models,
                      const std::vector<uint64_t>& weights) {
    if (models.empty()) throw ConfigError("aggregate: no models");
    if (weights.size() != models.size())
        throw ConfigError("aggregate: weight count mismatch");
    for (const auto& m : models) check_same_shape(models.front(), m);

    uint64_t total = 0;
    for (uint64_t w : weights) {
        if (w == 0) throw ConfigError("aggregate: weights must be positive");
        total += w;
    }
    ParamVector out(models.front().size());
    out.segments = models.front().segments;
    for (size_t k = 0; k < models.size(); ++k) {
        float coef = static_cast<float>(double(weights[k]) / double(total));
        for (size_t i = 0; i < out.size(); ++i)
            out.values[i] += coef * models[k].values[i];
    }
    return out;
}

namespace detail {
namespace {

// Every message crosses the (simulated) wire as bytes; decoding on receipt
// keeps the codec honest and gives exact bit counts.
struct Transmitted {
    ResidualMessage msg;
    MessageRecord bits;
};

Transmitted transmit(const ResidualMessage& msg) {
    std::vector<uint8_t> bytes = encode_message(msg);
    Transmitted t;
    t.bits.header_bits = 23 * 8;
    t.bits.payload_bits = (bytes.size() - 23) * 8;
    t.msg = decode_message(bytes);
    return t;
}

ResidualMessage raw_message(const ParamVector& v, uint32_t round, Direction dir,
                            uint32_t client_id) {
    ResidualMessage msg;
    msg.round = round;
    msg.direction = dir;
    msg.client_id = client_id;
    msg.scheme = Scheme::raw;
    msg.n = v.size();
    msg.raw_values = v.values;
    return msg;
}

MlpModel with_params(const MlpModel& base, const ParamVector& params) {
    MlpModel m = base;
    m.params.values = params.values;
    std::fill(m.momentum_buffer.values.begin(), m.momentum_buffer.values.end(),
              0.0f);
    return m;
}

} // namespace

Federation::Federation(const ProtocolConfig& config, const TrainConfig& train,
                       const std::vector<Dataset>& shards,
                       const std::vector<size_t>& layer_sizes, uint64_t seed)
    : config_(config), train_(train) {
    config_.validate();
    train_.validate();
    if (shards.size() != config_.n_clients)
        throw ConfigError("need exactly one shard per client");
    for (const auto& s : shards)
        if (s.size() == 0) throw EmptyDataError("client shard is empty");

    MlpModel init = init_model(layer_sizes, seed);
    size_t window = config_.predictor.window;
    server_.global = init.params;
    server_.local_trajs.assign(config_.n_clients, Trajectory(window));
    server_.global_trajs.assign(config_.n_clients, Trajectory(window));
    server_.last_synced_global.assign(config_.n_clients, init.params);

    clients_.reserve(config_.n_clients);
    for (size_t k = 0; k < config_.n_clients; ++k) {
        ClientState c;
        c.id = static_cast<uint32_t>(k);
        c.model = init;
        c.local_traj = Trajectory(window);
        c.global_traj = Trajectory(window);
        c.shard = shards[k];
        c.last_global = init.params;
        clients_.push_back(std::move(c));
        server_.client_weights.push_back(shards[k].size());
    }
}

RoundOutcome Federation::warmup_round(size_t t) {
    RoundOutcome out;
    out.round = t;
    out.warmup = true;

    std::vector<ParamVector> locals;
    locals.reserve(clients_.size());
    for (auto& client : clients_) {
        // Server -> client: raw global model.
        Transmitted down = transmit(raw_message(server_.global,
                                                static_cast<uint32_t>(t),
                                                Direction::downlink, client.id));
        out.log.downlink.push_back(down.bits);
        ParamVector w = decompress(down.msg);

        client.global_traj.push(w);
        client.last_global = w;
        MlpModel trained = local_train(with_params(client.model, w), client.shard,
                                       train_, t, client.id);

        // Client -> server: raw trained model.
        Transmitted up = transmit(raw_message(trained.params,
                                              static_cast<uint32_t>(t),
                                              Direction::uplink, client.id));
        out.log.uplink.push_back(up.bits);
        ParamVector w_hat = decompress(up.msg);

        client.local_traj.push(w_hat);
        client.model = trained;

        size_t i = client.id;
        server_.local_trajs[i].push(w_hat);
        server_.global_trajs[i].push(server_.global);
        server_.last_synced_global[i] = server_.global;
        locals.push_back(std::move(w_hat));
    }
    server_.global = aggregate(locals, config_.weighted_aggregation
                                           ? server_.client_weights
                                           : std::vector<uint64_t>(
                                                 clients_.size(), 1));
    out.global = server_.global;
    return out;
}

void Federation::stage_downlink(uint32_t round_id) {
    staged_downlink_.clear();
    staged_downlink_.reserve(clients_.size());
    // Identity "compression" sends the model itself: residual transport would
    // reintroduce one float rounding per coordinate and break the exact
    // FedAvg-equivalence invariant that identity mode guarantees.
    const bool lossless =
        config_.downlink_compression.mode == CompressionMode::identity;
    for (size_t i = 0; i < clients_.size(); ++i) {
        if (lossless) {
            server_.global_trajs[i].push(server_.global);
            server_.last_synced_global[i] = server_.global;
            staged_downlink_.push_back(
                {raw_message(server_.global, round_id, Direction::downlink,
                             static_cast<uint32_t>(i)),
                 {}});
            continue;
        }
        ParamVector predicted =
            predict(server_.local_trajs[i], server_.global_trajs[i],
                    server_.last_synced_global[i], config_.predictor);
        ParamVector res = residual(server_.global, predicted);
        CompressResult comp = compress(res, config_.downlink_compression,
                                       round_id, Direction::downlink,
                                       static_cast<uint32_t>(i));
        ParamVector synced = recover(predicted, comp.reconstruction);
        server_.global_trajs[i].push(synced);
        server_.last_synced_global[i] = synced;
        staged_downlink_.push_back({std::move(comp.msg), {}});
    }
}

RoundOutcome Federation::resfed_round(size_t t) {
    if (config_.mode != Mode::resfed)
        throw ProtocolOrderError("resfed_round called in a baseline mode");
    stage_downlink(static_cast<uint32_t>(t));

    RoundOutcome out;
    out.round = t;

    std::vector<Transmitted> uplinks;
    uplinks.reserve(clients_.size());
    for (auto& client : clients_) {
        Transmitted down = transmit(staged_downlink_[client.id].msg);
        out.log.downlink.push_back(down.bits);

        ParamVector w_hat;
        if (config_.downlink_compression.mode == CompressionMode::identity) {
            // lossless: the message carries the global model directly
            w_hat = decompress(down.msg);
        } else {
            // (1) predict the incoming global from the synchronized history
            ParamVector predicted_global =
                predict(client.local_traj, client.global_traj,
                        client.last_global, config_.predictor);
            // (2) recover the new global model
            w_hat = recover(predicted_global, decompress(down.msg));
        }
        // (3) extend the global trajectory
        client.global_traj.push(w_hat);
        client.last_global = w_hat;
        // (4) local training
        MlpModel trained = local_train(with_params(client.model, w_hat),
                                       client.shard, train_, t, client.id);
        // (5) predict the trained model
        ParamVector predicted_local = predict(client.local_traj,
                                              client.global_traj, w_hat,
                                              config_.predictor);
        // (6) uplink residual
        ParamVector res = residual(trained.params, predicted_local);
        if (client.id == 0) out.sample_residual = res;
        // (7) compress; (8) synchronize the local trajectory with what the
        // server will see
        ResidualMessage up_msg;
        ParamVector synced;
        if (config_.uplink_compression.mode == CompressionMode::identity) {
            up_msg = raw_message(trained.params, static_cast<uint32_t>(t),
                                 Direction::uplink, client.id);
            synced = trained.params;
        } else {
            CompressResult comp = compress(res, config_.uplink_compression,
                                           static_cast<uint32_t>(t),
                                           Direction::uplink, client.id);
            up_msg = std::move(comp.msg);
            synced = recover(predicted_local, comp.reconstruction);
        }
        client.local_traj.push(synced);
        client.model = trained;

        Transmitted up = transmit(up_msg);
        out.log.uplink.push_back(up.bits);
        uplinks.push_back(std::move(up));
    }

    // Server: recover every client's model, then aggregate.
    std::vector<ParamVector> recovered;
    recovered.reserve(clients_.size());
    for (size_t i = 0; i < clients_.size(); ++i) {
        ParamVector w_hat;
        if (config_.uplink_compression.mode == CompressionMode::identity) {
            w_hat = decompress(uplinks[i].msg);
        } else {
            ParamVector predicted =
                predict(server_.local_trajs[i], server_.global_trajs[i],
                        server_.last_synced_global[i], config_.predictor);
            w_hat = recover(predicted, decompress(uplinks[i].msg));
        }
        server_.local_trajs[i].push(w_hat);
        recovered.push_back(std::move(w_hat));
    }
    server_.global = aggregate(recovered, config_.weighted_aggregation
                                              ? server_.client_weights
                                              : std::vector<uint64_t>(
                                                    clients_.size(), 1));
    out.global = server_.global;
    return out;
}

RoundOutcome Federation::baseline_round(size_t t) {
    RoundOutcome out;
    out.round = t;

    const bool lossy_weights = config_.mode == Mode::compress_weights;
    const bool gradients = config_.mode == Mode::compress_gradients;

    std::vector<ParamVector> received;
    received.reserve(clients_.size());
    for (auto& client : clients_) {
        // Downlink: the global model, through the downlink compressor.
        ParamVector down_sent;
        if (config_.mode == Mode::no_compression ||
            config_.downlink_compression.mode == CompressionMode::identity) {
            Transmitted down = transmit(raw_message(server_.global,
                                                    static_cast<uint32_t>(t),
                                                    Direction::downlink,
                                                    client.id));
            out.log.downlink.push_back(down.bits);
            down_sent = decompress(down.msg);
        } else {
            CompressResult comp = compress(server_.global,
                                           config_.downlink_compression,
                                           static_cast<uint32_t>(t),
                                           Direction::downlink, client.id);
            Transmitted down = transmit(comp.msg);
            out.log.downlink.push_back(down.bits);
            down_sent = decompress(down.msg);
        }

        MlpModel trained = local_train(with_params(client.model, down_sent),
                                       client.shard, train_, t, client.id);
        client.model = trained;

        // Uplink payload: trained weights, or the scaled accumulated update.
        ParamVector payload;
        if (gradients) {
            payload = ParamVector(down_sent.size());
            for (size_t j = 0; j < payload.size(); ++j)
                payload.values[j] = (down_sent.values[j] -
                                     trained.params.values[j]) /
                                    train_.learning_rate;
        } else {
            payload = trained.params;
        }
        if (client.id == 0) out.sample_residual = payload;

        ParamVector up_recv;
        if (config_.mode == Mode::no_compression) {
            Transmitted up = transmit(raw_message(payload,
                                                  static_cast<uint32_t>(t),
                                                  Direction::uplink, client.id));
            out.log.uplink.push_back(up.bits);
            up_recv = decompress(up.msg);
        } else {
            CompressResult comp = compress(payload, config_.uplink_compression,
                                           static_cast<uint32_t>(t),
                                           Direction::uplink, client.id);
            Transmitted up = transmit(comp.msg);
            out.log.uplink.push_back(up.bits);
            up_recv = decompress(up.msg);
        }

        if (gradients) {
            // w_hat = w_sent - lr * u_bar
            ParamVector w_hat(down_sent.size());
            w_hat.segments = server_.global.segments;
            for (size_t j = 0; j < w_hat.size(); ++j)
                w_hat.values[j] = down_sent.values[j] -
                                  train_.learning_rate * up_recv.values[j];
            received.push_back(std::move(w_hat));
        } else {
            received.push_back(std::move(up_recv));
        }
        (void)lossy_weights;
    }
    server_.global = aggregate(received, config_.weighted_aggregation
                                             ? server_.client_weights
                                             : std::vector<uint64_t>(
                                                   clients_.size(), 1));
    out.global = server_.global;
    return out;
}

RoundOutcome Federation::round(size_t t) {
    if (config_.mode != Mode::resfed) return baseline_round(t);
    if (t < config_.effective_warmup()) return warmup_round(t);
    return resfed_round(t);
}

} // namespace detail

RunResult run(const ProtocolConfig& config, const TrainConfig& train,
              const std::vector<Dataset>& shards,
              const std::vector<size_t>& layer_sizes, uint64_t seed) {
    detail::Federation fed(config, train, shards, layer_sizes, seed);
    RunResult result;
    result.rounds.reserve(config.total_rounds);
    for (size_t t = 0; t < config.total_rounds; ++t)
        result.rounds.push_back(fed.round(t));
    result.final_model = init_model(layer_sizes, seed);
    result.final_model.params.values = fed.server().global.values;
    return result;
}

} // namespace resfed
