// resfed: deterministic federated-learning simulator with residual
// compression. Subcommands: run, compare, sweep, codec-bench, inspect.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "resfed/config.hpp"
#include "resfed/errors.hpp"
#include "resfed/harness.hpp"
#include "resfed/rng.hpp"

namespace {

using namespace resfed;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--set", opts.overrides,
                    "dotted key=value override (repeatable)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "override the experiment seed");
}

ExperimentConfig load_config(const CommonOpts& opts) {
    ExperimentConfig cfg = parse_config(opts.config_path, opts.overrides);
    if (opts.seed) cfg.seed = *opts.seed;
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    return cfg;
}

int cmd_run(const CommonOpts& opts) {
    ExperimentConfig cfg = load_config(opts);
    ExperimentResult res = run_experiment(cfg);
    uint64_t up = 0, down = 0;
    for (const RoundRecord& r : res.records) {
        up += r.uplink_bits;
        down += r.downlink_bits;
    }
    std::printf("mode=%s rounds=%zu params=%zu final_accuracy=%.4f "
                "uplink_bits=%llu downlink_bits=%llu\n",
                mode_name(cfg.protocol.mode).c_str(), res.records.size(),
                res.n_params, res.final_eval.accuracy,
                (unsigned long long)up, (unsigned long long)down);
    if (!cfg.output_dir.empty())
        std::printf("wrote %s/rounds.csv and summary.json\n",
                    cfg.output_dir.c_str());
    return 0;
}

struct Series {
    std::string label;
    Mode mode;
    size_t window; // resfed only
};

int cmd_compare(const CommonOpts& opts) {
    ExperimentConfig base = load_config(opts);
    const std::vector<Series> series = {
        {"no_compression", Mode::no_compression, 0},
        {"compress_weights", Mode::compress_weights, 0},
        {"compress_gradients", Mode::compress_gradients, 0},
        {"resfed-T0", Mode::resfed, 0},
        {"resfed-T1", Mode::resfed, 1},
    };

    std::vector<ExperimentResult> results;
    for (const Series& s : series) {
        ExperimentConfig cfg = base;
        cfg.protocol.mode = s.mode;
        if (s.mode == Mode::resfed) cfg.protocol.predictor.window = s.window;
        if (!base.output_dir.empty())
            cfg.output_dir = base.output_dir + "/" + s.label;
        results.push_back(run_experiment(cfg));
    }

    std::printf("%-20s %10s %14s %14s %10s\n", "series", "rounds",
                "uplink_bits", "downlink_bits", "final_acc");
    std::string joined = "series,round,test_accuracy,uplink_bits,downlink_bits\n";
    for (size_t i = 0; i < series.size(); ++i) {
        uint64_t up = 0, down = 0;
        for (const RoundRecord& r : results[i].records) {
            up += r.uplink_bits;
            down += r.downlink_bits;
            char line[160];
            std::snprintf(line, sizeof(line), "%s,%zu,%.9g,%llu,%llu\n",
                          series[i].label.c_str(), r.round, r.test_accuracy,
                          (unsigned long long)r.uplink_bits,
                          (unsigned long long)r.downlink_bits);
            joined += line;
        }
        std::printf("%-20s %10zu %14llu %14llu %10.4f\n",
                    series[i].label.c_str(), results[i].records.size(),
                    (unsigned long long)up, (unsigned long long)down,
                    results[i].final_eval.accuracy);
    }
    if (!base.output_dir.empty()) {
        std::filesystem::create_directories(base.output_dir);
        std::string path = base.output_dir + "/compare.csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open '" + path + "' for writing");
        out << joined;
    }
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& axis_name,
              const std::vector<std::string>& values) {
    ExperimentConfig base = load_config(opts);
    SweepAxis axis;
    if (axis_name == "sparsity")
        axis = SweepAxis::sparsity;
    else if (axis_name == "mode")
        axis = SweepAxis::mode;
    else if (axis_name == "partition")
        axis = SweepAxis::partition;
    else
        throw ConfigError("unknown sweep axis '" + axis_name + "'");

    std::vector<SweepEntry> entries = sweep(base, axis, values);
    std::printf("%-16s %8s %10s %14s %14s %10s %10s\n", axis_name.c_str(),
                "seed", "final_acc", "uplink_bits", "downlink_bits", "ul_cr",
                "dl_cr");
    nlohmann::ordered_json ja = nlohmann::ordered_json::array();
    std::string csv = axis_name +
                      ",seed,final_accuracy,uplink_bits,downlink_bits,"
                      "uplink_cr,downlink_cr\n";
    for (const SweepEntry& e : entries) {
        std::printf("%-16s %8llu %10.4f %14llu %14llu %10.2f %10.2f\n",
                    e.value.c_str(), (unsigned long long)e.seed,
                    e.final_accuracy, (unsigned long long)e.uplink_bits,
                    (unsigned long long)e.downlink_bits, e.uplink_cr,
                    e.downlink_cr);
        char line[200];
        std::snprintf(line, sizeof(line), "%s,%llu,%.9g,%llu,%llu,%.9g,%.9g\n",
                      e.value.c_str(), (unsigned long long)e.seed,
                      e.final_accuracy, (unsigned long long)e.uplink_bits,
                      (unsigned long long)e.downlink_bits, e.uplink_cr,
                      e.downlink_cr);
        csv += line;
        ja.push_back({{"value", e.value},
                      {"seed", e.seed},
                      {"final_accuracy", e.final_accuracy},
                      {"uplink_bits", e.uplink_bits},
                      {"downlink_bits", e.downlink_bits},
                      {"uplink_cr", e.uplink_cr},
                      {"downlink_cr", e.downlink_cr}});
    }
    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        std::ofstream csvf(opts.out_dir + "/sweep.csv", std::ios::binary);
        csvf << csv;
        std::ofstream jf(opts.out_dir + "/sweep.json", std::ios::binary);
        nlohmann::ordered_json j;
        j["axis"] = axis_name;
        j["entries"] = std::move(ja);
        jf << j.dump(2) << '\n';
        if (!csvf || !jf) throw Error("failed to write sweep outputs");
    }
    return 0;
}

int cmd_codec_bench(const std::string& input, uint64_t n, uint64_t seed,
                    double sparsity, int bits, const std::string& entropy,
                    bool identity) {
    ParamVector v;
    if (!input.empty()) {
        std::ifstream in(input, std::ios::binary);
        if (!in) throw FormatError("cannot open input file '" + input + "'");
        std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
        if (bytes.empty() || bytes.size() % 4 != 0)
            throw FormatError("input file is not a float32 vector");
        v = ParamVector(bytes.size() / 4);
        std::memcpy(v.values.data(), bytes.data(), bytes.size());
        check_finite(v, "codec-bench input");
    } else {
        Rng rng(mix_seed(seed, 0xbe7c));
        v = ParamVector(static_cast<size_t>(n));
        for (auto& x : v.values) x = float(rng.normal());
    }

    CompressionConfig cfg;
    cfg.mode = identity ? CompressionMode::identity
                        : CompressionMode::sparse_quant;
    cfg.sparsity = sparsity;
    cfg.bits = static_cast<uint8_t>(bits);
    cfg.entropy = entropy == "none" ? EntropyCoding::none
                                    : EntropyCoding::huffman;
    cfg.validate();

    CompressResult comp = compress(v, cfg, 0, Direction::uplink, 0);
    MessageBits mb = message_bits(comp.msg);
    ParamVector back = decompress(decode_message(encode_message(comp.msg)));
    bool roundtrip = back.values == comp.reconstruction.values;

    uint64_t raw_payload = 32 * uint64_t(v.size());
    double measured_cr = double(raw_payload) / double(mb.payload_bits);
    uint64_t pruned = identity ? 0
                               : uint64_t(v.size()) -
                                     comp.msg.sq.positions.size();
    double est = estimate_cr(v.size(), pruned, cfg.bits);

    std::printf("n=%zu payload_bits=%llu (header %llu)\n", v.size(),
                (unsigned long long)mb.payload_bits,
                (unsigned long long)mb.header_bits);
    std::printf("measured_cr=%.2f estimate_cr=%.2f\n", measured_cr, est);
    std::printf("round_trip=%s\n", roundtrip ? "PASS" : "FAIL");
    return roundtrip ? 0 : 1;
}

int cmd_inspect(const std::string& dir) {
    std::string snap_dir = dir;
    if (std::filesystem::exists(dir + "/snapshots/manifest.json"))
        snap_dir = dir + "/snapshots";
    std::vector<CheckpointSnapshot> snaps = read_snapshots(snap_dir);
    std::printf("%8s %-10s %12s %12s %12s\n", "round", "vector", "p50", "p90",
                "max");
    for (const CheckpointSnapshot& s : snaps) {
        std::vector<std::pair<std::string, ParamVector>> named = {
            {"weights", s.weights},
            {"gradient", s.gradient},
            {"residual", s.residual},
        };
        for (const MagnitudeRow& row : magnitude_stats(named))
            std::printf("%8zu %-10s %12.6g %12.6g %12.6g\n", s.round,
                        row.name.c_str(), row.p50, row.p90, row.max);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Residual-compressed federated learning simulator"};
    app.require_subcommand(1);

    CommonOpts run_opts, compare_opts, sweep_opts;
    std::string sweep_axis = "sparsity";
    std::vector<std::string> sweep_values;
    std::string bench_input, bench_entropy = "huffman";
    uint64_t bench_n = 61706, bench_seed = 1;
    double bench_sparsity = 0.99;
    int bench_bits = 1;
    bool bench_identity = false;
    std::string inspect_dir;

    CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
    add_common(run_cmd, run_opts);

    CLI::App* compare_cmd = app.add_subcommand(
        "compare", "run all baselines and resfed with a shared seed");
    add_common(compare_cmd, compare_opts);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep one config axis");
    add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--axis", sweep_axis,
                          "sparsity | mode | partition");
    sweep_cmd->add_option("--values", sweep_values, "axis values")
        ->required()
        ->delimiter(',');

    CLI::App* bench_cmd =
        app.add_subcommand("codec-bench", "measure codec compression ratio");
    bench_cmd->add_option("--input", bench_input,
                          "raw float32 vector file (overrides --n)");
    bench_cmd->add_option("--n", bench_n, "generated vector length");
    bench_cmd->add_option("--seed", bench_seed, "generator seed");
    bench_cmd->add_option("--sparsity", bench_sparsity, "pruning fraction");
    bench_cmd->add_option("--bits", bench_bits, "quantization bits");
    bench_cmd->add_option("--entropy", bench_entropy, "none | huffman");
    bench_cmd->add_flag("--identity", bench_identity, "identity mode");

    CLI::App* inspect_cmd = app.add_subcommand(
        "inspect", "print magnitude statistics from run snapshots");
    inspect_cmd->add_option("--snapshots", inspect_dir,
                            "snapshot directory (or run output directory)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(run_opts);
        if (compare_cmd->parsed()) return cmd_compare(compare_opts);
        if (sweep_cmd->parsed())
            return cmd_sweep(sweep_opts, sweep_axis, sweep_values);
        if (bench_cmd->parsed())
            return cmd_codec_bench(bench_input, bench_n, bench_seed,
                                   bench_sparsity, bench_bits, bench_entropy,
                                   bench_identity);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
