#include "resfed/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "resfed/config.hpp"
#include "resfed/errors.hpp"

namespace resfed {
namespace {

constexpr uint64_t kHeaderBits = 23 * 8;

// Lower nearest-rank quantile of a sorted vector.
double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    size_t rank = static_cast<size_t>(std::ceil(q * double(sorted.size())));
    if (rank == 0) rank = 1;
    if (rank > sorted.size()) rank = sorted.size();
    return sorted[rank - 1];
}

MagnitudeRow abs_quantiles(const std::string& name, const ParamVector& v) {
    std::vector<double> mags;
    mags.reserve(v.size());
    for (float x : v.values) mags.push_back(std::fabs(double(x)));
    std::sort(mags.begin(), mags.end());
    MagnitudeRow row;
    row.name = name;
    row.p50 = quantile(mags, 0.5);
    row.p90 = quantile(mags, 0.9);
    row.max = mags.empty() ? 0.0 : mags.back();
    return row;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config) {
    if (config.dataset.kind == DatasetSpec::Kind::synthetic) {
        Dataset all = make_blobs(config.dataset.n_samples, config.dataset.dim,
                                 config.dataset.n_classes, config.dataset.spread,
                                 config.seed);
        return split_train_test(all, config.dataset.test_fraction, config.seed);
    }
    Dataset train = read_idx(config.dataset.train_images,
                             config.dataset.train_labels);
    Dataset test = read_idx(config.dataset.test_images,
                            config.dataset.test_labels);
    if (train.dim != test.dim)
        throw FormatError("train/test feature dimensions differ");
    return {std::move(train), std::move(test)};
}

std::vector<Dataset> build_shards(const ExperimentConfig& config,
                                  const Dataset& train) {
    if (config.partition.kind == PartitionSpec::Kind::iid)
        return partition_iid(train, config.protocol.n_clients, config.seed);
    return partition_label_shard(train, config.protocol.n_clients,
                                 config.partition.classes_per_client,
                                 config.seed);
}

} // namespace

void ExperimentConfig::validate() const {
    train.validate();
    protocol.validate();
    if (hidden.empty())
        throw ConfigError("model.hidden must list at least one layer width");
    for (size_t h : hidden)
        if (h == 0) throw ConfigError("model.hidden widths must be positive");
    if (dataset.kind == DatasetSpec::Kind::synthetic) {
        if (dataset.n_samples == 0 || dataset.dim == 0 || dataset.n_classes < 2)
            throw ConfigError("dataset needs samples, dimensions, and >= 2 classes");
        if (dataset.test_fraction <= 0.0 || dataset.test_fraction >= 1.0)
            throw ConfigError("dataset.test_fraction must be in (0, 1)");
    } else {
        if (dataset.train_images.empty() || dataset.train_labels.empty() ||
            dataset.test_images.empty() || dataset.test_labels.empty())
            throw ConfigError("dataset kind idx requires all four file paths");
    }
    if (partition.kind == PartitionSpec::Kind::label_shard &&
        partition.classes_per_client == 0)
        throw ConfigError("partition.classes_per_client must be positive");
    if (target_accuracy && (*target_accuracy <= 0.0 || *target_accuracy > 1.0))
        throw ConfigError("target_accuracy must be in (0, 1]");
    for (size_t r : checkpoint_rounds)
        if (r < 1 || r > protocol.total_rounds)
            throw ConfigError("checkpoint_rounds entries must be in [1, total_rounds]");
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();

    auto [train_ds, test_ds] = build_datasets(config);
    std::vector<Dataset> shards = build_shards(config, train_ds);

    std::vector<size_t> layer_sizes;
    layer_sizes.push_back(train_ds.dim);
    for (size_t h : config.hidden) layer_sizes.push_back(h);
    layer_sizes.push_back(static_cast<size_t>(train_ds.n_classes));

    TrainConfig train_cfg = config.train;
    train_cfg.seed = config.seed;

    RunResult run_result = run(config.protocol, train_cfg, shards, layer_sizes,
                               config.seed);

    ExperimentResult result;
    result.n_params = param_count(layer_sizes);
    result.final_model = run_result.final_model;

    const size_t n_clients = config.protocol.n_clients;
    const uint64_t raw_direction_bits =
        uint64_t(n_clients) * (kHeaderBits + 32 * uint64_t(result.n_params));

    MlpModel eval_model = init_model(layer_sizes, config.seed);
    for (const RoundOutcome& out : run_result.rounds) {
        RoundRecord rec;
        rec.round = out.round + 1;
        rec.warmup = out.warmup;
        for (const auto& m : out.log.uplink)
            rec.uplink_bits_per_client.push_back(m.header_bits + m.payload_bits);
        for (const auto& m : out.log.downlink)
            rec.downlink_bits_per_client.push_back(m.header_bits +
                                                   m.payload_bits);
        rec.uplink_bits = out.log.uplink_bits();
        rec.downlink_bits = out.log.downlink_bits();
        rec.uplink_cr = double(raw_direction_bits) / double(rec.uplink_bits);
        rec.downlink_cr = double(raw_direction_bits) / double(rec.downlink_bits);

        eval_model.params.values = out.global.values;
        EvalResult test_eval = evaluate(eval_model, test_ds);
        rec.test_accuracy = test_eval.accuracy;
        rec.train_loss = evaluate(eval_model, train_ds).loss;

        if (out.sample_residual.size() > 0) {
            MagnitudeRow row = abs_quantiles("residual", out.sample_residual);
            rec.res_p50 = row.p50;
            rec.res_p90 = row.p90;
            rec.res_max = row.max;
        }
        result.records.push_back(std::move(rec));

        if (std::find(config.checkpoint_rounds.begin(),
                      config.checkpoint_rounds.end(),
                      out.round + 1) != config.checkpoint_rounds.end()) {
            CheckpointSnapshot snap;
            snap.round = out.round + 1;
            snap.weights = out.global;
            eval_model.params.values = out.global.values;
            snap.gradient = gradient(eval_model, full_batch(shards[0]));
            snap.residual = out.sample_residual.size() > 0
                                ? out.sample_residual
                                : ParamVector(out.global.size());
            result.checkpoints.push_back(std::move(snap));
        }
    }
    result.final_eval = evaluate(result.final_model, test_ds);

    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
        write_rounds_csv(config.output_dir + "/rounds.csv", result.records);
        write_summary_json(config.output_dir + "/summary.json", config, result);
        if (!result.checkpoints.empty())
            write_snapshots(config.output_dir + "/snapshots",
                            result.checkpoints);
    }
    return result;
}

double bitsaving_rate(uint64_t baseline_bits, uint64_t method_bits) {
    if (baseline_bits == 0)
        throw ConfigError("bitsaving_rate: baseline volume is zero");
    return 1.0 - double(method_bits) / double(baseline_bits);
}

std::optional<uint64_t> volume_to_target(const std::vector<RoundRecord>& records,
                                         double target_accuracy,
                                         Direction direction) {
    if (records.empty()) throw EmptyDataError("volume_to_target: no records");
    uint64_t total = 0;
    for (const RoundRecord& rec : records) {
        total += direction == Direction::uplink ? rec.uplink_bits
                                                : rec.downlink_bits;
        if (rec.test_accuracy >= target_accuracy) return total;
    }
    return std::nullopt;
}

std::vector<MagnitudeRow> magnitude_stats(
    const std::vector<std::pair<std::string, ParamVector>>& vectors) {
    if (vectors.empty()) throw EmptyDataError("magnitude_stats: no vectors");
    std::vector<MagnitudeRow> rows;
    for (const auto& [name, v] : vectors)
        rows.push_back(abs_quantiles(name, v));
    return rows;
}

MemoryFootprint memory_footprint(uint64_t n_params, uint64_t window,
                                 uint64_t n_clients) {
    MemoryFootprint fp;
    fp.client_bits = 2 * 32 * n_params * window;
    fp.server_bits = fp.client_bits * n_clients;
    return fp;
}

std::string mode_name(Mode mode) {
    switch (mode) {
    case Mode::no_compression: return "no_compression";
    case Mode::compress_weights: return "compress_weights";
    case Mode::compress_gradients: return "compress_gradients";
    case Mode::resfed: return "resfed";
    }
    throw ConfigError("unknown mode");
}

Mode mode_from_name(const std::string& name) {
    if (name == "no_compression") return Mode::no_compression;
    if (name == "compress_weights") return Mode::compress_weights;
    if (name == "compress_gradients") return Mode::compress_gradients;
    if (name == "resfed") return Mode::resfed;
    throw ConfigError("unknown mode '" + name + "'");
}

std::string partition_name(PartitionSpec::Kind kind) {
    return kind == PartitionSpec::Kind::iid ? "iid" : "label_shard";
}

PartitionSpec::Kind partition_from_name(const std::string& name) {
    if (name == "iid") return PartitionSpec::Kind::iid;
    if (name == "label_shard") return PartitionSpec::Kind::label_shard;
    throw ConfigError("unknown partition kind '" + name + "'");
}

std::vector<SweepEntry> sweep(const ExperimentConfig& base, SweepAxis axis,
                              const std::vector<std::string>& values) {
    if (values.empty()) throw ConfigError("sweep: no axis values");
    std::vector<SweepEntry> entries;
    for (size_t i = 0; i < values.size(); ++i) {
        ExperimentConfig cfg = base;
        cfg.seed = base.seed + i;
        cfg.output_dir.clear();
        switch (axis) {
        case SweepAxis::sparsity: {
            double s = std::stod(values[i]);
            cfg.protocol.uplink_compression.sparsity = s;
            cfg.protocol.downlink_compression.sparsity = s;
            break;
        }
        case SweepAxis::mode:
            cfg.protocol.mode = mode_from_name(values[i]);
            break;
        case SweepAxis::partition:
            cfg.partition.kind = partition_from_name(values[i]);
            break;
        }
        ExperimentResult res = run_experiment(cfg);
        SweepEntry e;
        e.value = values[i];
        e.seed = cfg.seed;
        e.final_accuracy = res.final_eval.accuracy;
        for (const RoundRecord& rec : res.records) {
            e.uplink_bits += rec.uplink_bits;
            e.downlink_bits += rec.downlink_bits;
        }
        const uint64_t raw = uint64_t(cfg.protocol.n_clients) *
                             (kHeaderBits + 32 * uint64_t(res.n_params)) *
                             res.records.size();
        e.uplink_cr = double(raw) / double(e.uplink_bits);
        e.downlink_cr = double(raw) / double(e.downlink_bits);
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_rounds_csv(const std::string& path,
                      const std::vector<RoundRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << "round,warmup,uplink_bits,downlink_bits,uplink_cr,downlink_cr,"
           "test_accuracy,train_loss,res_p50,res_p90,res_max\n";
    for (const RoundRecord& r : records) {
        out << r.round << ',' << (r.warmup ? 1 : 0) << ',' << r.uplink_bits
            << ',' << r.downlink_bits << ',' << fmt_double(r.uplink_cr) << ','
            << fmt_double(r.downlink_cr) << ',' << fmt_double(r.test_accuracy)
            << ',' << fmt_double(double(r.train_loss)) << ','
            << fmt_double(r.res_p50) << ',' << fmt_double(r.res_p90) << ','
            << fmt_double(r.res_max) << '\n';
    }
    if (!out) throw Error("write failed for '" + path + "'");
}

void write_summary_json(const std::string& path, const ExperimentConfig& config,
                        const ExperimentResult& result) {
    nlohmann::ordered_json j;
    j["units"] = "bits (table Mb = 1e6 bits)";
    j["config"] = config_to_json(config);
    j["n_params"] = result.n_params;
    j["rounds"] = result.records.size();
    j["final_accuracy"] = result.final_eval.accuracy;
    j["final_loss"] = result.final_eval.loss;

    uint64_t up = 0, down = 0;
    for (const RoundRecord& r : result.records) {
        up += r.uplink_bits;
        down += r.downlink_bits;
    }
    j["total_uplink_bits"] = up;
    j["total_downlink_bits"] = down;

    if (config.target_accuracy) {
        j["target_accuracy"] = *config.target_accuracy;
        auto ub = volume_to_target(result.records, *config.target_accuracy,
                                   Direction::uplink);
        auto db = volume_to_target(result.records, *config.target_accuracy,
                                   Direction::downlink);
        j["uplink_bits_to_target"] = ub ? nlohmann::ordered_json(*ub)
                                        : nlohmann::ordered_json(nullptr);
        j["downlink_bits_to_target"] = db ? nlohmann::ordered_json(*db)
                                          : nlohmann::ordered_json(nullptr);
    }

    MemoryFootprint fp = memory_footprint(result.n_params,
                                          config.protocol.predictor.window,
                                          config.protocol.n_clients);
    j["memory_client_bits"] = fp.client_bits;
    j["memory_server_bits"] = fp.server_bits;

    nlohmann::ordered_json cps = nlohmann::ordered_json::array();
    for (const CheckpointSnapshot& s : result.checkpoints) {
        std::vector<std::pair<std::string, ParamVector>> named = {
            {"weights", s.weights},
            {"gradient", s.gradient},
            {"residual", s.residual},
        };
        nlohmann::ordered_json cp;
        cp["round"] = s.round;
        for (const MagnitudeRow& row : magnitude_stats(named)) {
            cp[row.name] = {{"p50", row.p50}, {"p90", row.p90},
                            {"max", row.max}};
        }
        cps.push_back(std::move(cp));
    }
    j["checkpoints"] = std::move(cps);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed for '" + path + "'");
}

void write_snapshots(const std::string& dir,
                     const std::vector<CheckpointSnapshot>& checkpoints) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["layout"] = "weights|gradient|residual, float32 little-endian";
    nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
    for (const CheckpointSnapshot& s : checkpoints) {
        std::string name = "round_" + std::to_string(s.round) + ".bin";
        std::ofstream out(dir + "/" + name, std::ios::binary);
        if (!out) throw Error("cannot open snapshot '" + name + "'");
        for (const ParamVector* v : {&s.weights, &s.gradient, &s.residual}) {
            for (float f : v->values) {
                uint32_t u;
                std::memcpy(&u, &f, 4);
                char b[4] = {char(u & 0xff), char((u >> 8) & 0xff),
                             char((u >> 16) & 0xff), char((u >> 24) & 0xff)};
                out.write(b, 4);
            }
        }
        if (!out) throw Error("write failed for snapshot '" + name + "'");
        rounds.push_back({{"round", s.round},
                          {"file", name},
                          {"n_params", s.weights.size()}});
    }
    manifest["rounds"] = std::move(rounds);
    std::ofstream mf(dir + "/manifest.json", std::ios::binary);
    if (!mf) throw Error("cannot open snapshot manifest");
    mf << manifest.dump(2) << '\n';
}

std::vector<CheckpointSnapshot> read_snapshots(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json", std::ios::binary);
    if (!mf) throw Error("missing snapshot manifest in '" + dir + "'");
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad snapshot manifest: ") + e.what());
    }
    std::vector<CheckpointSnapshot> out;
    for (const auto& entry : manifest.at("rounds")) {
        CheckpointSnapshot snap;
        snap.round = entry.at("round").get<size_t>();
        size_t n = entry.at("n_params").get<size_t>();
        std::string path = dir + "/" + entry.at("file").get<std::string>();
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("missing snapshot file '" + path + "'");
        std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
        if (bytes.size() != 3 * n * 4)
            throw FormatError("snapshot '" + path + "' has wrong size");
        auto read_vec = [&](size_t block) {
            ParamVector v(n);
            for (size_t i = 0; i < n; ++i) {
                size_t off = (block * n + i) * 4;
                uint32_t u = uint32_t(bytes[off]) |
                             uint32_t(bytes[off + 1]) << 8 |
                             uint32_t(bytes[off + 2]) << 16 |
                             uint32_t(bytes[off + 3]) << 24;
                std::memcpy(&v.values[i], &u, 4);
            }
            return v;
        };
        snap.weights = read_vec(0);
        snap.gradient = read_vec(1);
        snap.residual = read_vec(2);
        out.push_back(std::move(snap));
    }
    return out;
}

} // namespace resfed
