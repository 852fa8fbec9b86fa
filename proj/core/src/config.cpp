#include "resfed/config.hpp"

#include <fstream>
#include <sstream>

#include "resfed/errors.hpp"

namespace resfed {
namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& key) {
    throw ConfigError("unknown config key '" + key + "'");
}

std::string join_key(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

template <typename T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

void parse_compression(const json& j, const std::string& prefix,
                       CompressionConfig& out) {
    for (const auto& [key, value] : j.items()) {
        std::string full = join_key(prefix, key);
        if (key == "mode") {
            std::string m = get_as<std::string>(value, full);
            if (m == "identity")
                out.mode = CompressionMode::identity;
            else if (m == "sparse_quant")
                out.mode = CompressionMode::sparse_quant;
            else
                throw ConfigError("config key '" + full +
                                  "': unknown compression mode '" + m + "'");
        } else if (key == "sparsity") {
            out.sparsity = get_as<double>(value, full);
        } else if (key == "bits") {
            int b = get_as<int>(value, full);
            if (b < 1 || b > 8)
                throw ConfigError("config key '" + full +
                                  "' must be in [1, 8]");
            out.bits = static_cast<uint8_t>(b);
        } else if (key == "entropy") {
            std::string e = get_as<std::string>(value, full);
            if (e == "none")
                out.entropy = EntropyCoding::none;
            else if (e == "huffman")
                out.entropy = EntropyCoding::huffman;
            else
                throw ConfigError("config key '" + full +
                                  "': unknown entropy coding '" + e + "'");
        } else {
            bad_key(full);
        }
    }
}

void parse_protocol(const json& j, ProtocolConfig& out) {
    for (const auto& [key, value] : j.items()) {
        std::string full = join_key("protocol", key);
        if (key == "n_clients")
            out.n_clients = get_as<size_t>(value, full);
        else if (key == "total_rounds")
            out.total_rounds = get_as<size_t>(value, full);
        else if (key == "warmup_rounds")
            out.warmup_rounds = get_as<size_t>(value, full);
        else if (key == "mode")
            out.mode = mode_from_name(get_as<std::string>(value, full));
        else if (key == "predictor") {
            for (const auto& [pkey, pvalue] : value.items()) {
                std::string pfull = join_key(full, pkey);
                if (pkey == "window")
                    out.predictor.window = get_as<size_t>(pvalue, pfull);
                else
                    bad_key(pfull);
            }
        } else if (key == "uplink_compression")
            parse_compression(value, full, out.uplink_compression);
        else if (key == "downlink_compression")
            parse_compression(value, full, out.downlink_compression);
        else if (key == "weighted_aggregation")
            out.weighted_aggregation = get_as<bool>(value, full);
        else
            bad_key(full);
    }
}

} // namespace

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig out;
    if (doc.is_null()) return out;
    if (!doc.is_object()) throw ConfigError("config root must be an object");

    for (const auto& [key, value] : doc.items()) {
        if (key == "seed") {
            out.seed = get_as<uint64_t>(value, "seed");
        } else if (key == "model") {
            for (const auto& [mkey, mvalue] : value.items()) {
                std::string full = join_key("model", mkey);
                if (mkey == "hidden")
                    out.hidden = get_as<std::vector<size_t>>(mvalue, full);
                else
                    bad_key(full);
            }
        } else if (key == "train") {
            for (const auto& [tkey, tvalue] : value.items()) {
                std::string full = join_key("train", tkey);
                if (tkey == "learning_rate")
                    out.train.learning_rate = get_as<float>(tvalue, full);
                else if (tkey == "momentum")
                    out.train.momentum = get_as<float>(tvalue, full);
                else if (tkey == "batch_size")
                    out.train.batch_size = get_as<size_t>(tvalue, full);
                else if (tkey == "local_epochs")
                    out.train.local_epochs = get_as<size_t>(tvalue, full);
                else
                    bad_key(full);
            }
        } else if (key == "dataset") {
            for (const auto& [dkey, dvalue] : value.items()) {
                std::string full = join_key("dataset", dkey);
                if (dkey == "kind") {
                    std::string k = get_as<std::string>(dvalue, full);
                    if (k == "synthetic")
                        out.dataset.kind = DatasetSpec::Kind::synthetic;
                    else if (k == "idx")
                        out.dataset.kind = DatasetSpec::Kind::idx;
                    else
                        throw ConfigError("config key '" + full +
                                          "': unknown dataset kind '" + k + "'");
                } else if (dkey == "n_samples")
                    out.dataset.n_samples = get_as<size_t>(dvalue, full);
                else if (dkey == "dim")
                    out.dataset.dim = get_as<size_t>(dvalue, full);
                else if (dkey == "n_classes")
                    out.dataset.n_classes = get_as<int>(dvalue, full);
                else if (dkey == "spread")
                    out.dataset.spread = get_as<float>(dvalue, full);
                else if (dkey == "test_fraction")
                    out.dataset.test_fraction = get_as<double>(dvalue, full);
                else if (dkey == "train_images")
                    out.dataset.train_images = get_as<std::string>(dvalue, full);
                else if (dkey == "train_labels")
                    out.dataset.train_labels = get_as<std::string>(dvalue, full);
                else if (dkey == "test_images")
                    out.dataset.test_images = get_as<std::string>(dvalue, full);
                else if (dkey == "test_labels")
                    out.dataset.test_labels = get_as<std::string>(dvalue, full);
                else
                    bad_key(full);
            }
        } else if (key == "partition") {
            for (const auto& [pkey, pvalue] : value.items()) {
                std::string full = join_key("partition", pkey);
                if (pkey == "kind")
                    out.partition.kind =
                        partition_from_name(get_as<std::string>(pvalue, full));
                else if (pkey == "classes_per_client")
                    out.partition.classes_per_client =
                        get_as<size_t>(pvalue, full);
                else
                    bad_key(full);
            }
        } else if (key == "protocol") {
            parse_protocol(value, out.protocol);
        } else if (key == "target_accuracy") {
            if (value.is_null())
                out.target_accuracy.reset();
            else
                out.target_accuracy = get_as<double>(value, "target_accuracy");
        } else if (key == "checkpoint_rounds") {
            out.checkpoint_rounds =
                get_as<std::vector<size_t>>(value, "checkpoint_rounds");
        } else if (key == "output_dir") {
            out.output_dir = get_as<std::string>(value, "output_dir");
        } else {
            bad_key(key);
        }
    }
    out.validate();
    return out;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& config) {
    nlohmann::ordered_json j;
    j["seed"] = config.seed;
    j["model"] = {{"hidden", config.hidden}};
    j["train"] = {{"learning_rate", config.train.learning_rate},
                  {"momentum", config.train.momentum},
                  {"batch_size", config.train.batch_size},
                  {"local_epochs", config.train.local_epochs}};

    nlohmann::ordered_json ds;
    ds["kind"] = config.dataset.kind == DatasetSpec::Kind::synthetic
                     ? "synthetic"
                     : "idx";
    ds["n_samples"] = config.dataset.n_samples;
    ds["dim"] = config.dataset.dim;
    ds["n_classes"] = config.dataset.n_classes;
    ds["spread"] = config.dataset.spread;
    ds["test_fraction"] = config.dataset.test_fraction;
    ds["train_images"] = config.dataset.train_images;
    ds["train_labels"] = config.dataset.train_labels;
    ds["test_images"] = config.dataset.test_images;
    ds["test_labels"] = config.dataset.test_labels;
    j["dataset"] = std::move(ds);

    j["partition"] = {{"kind", partition_name(config.partition.kind)},
                      {"classes_per_client",
                       config.partition.classes_per_client}};

    auto comp_json = [](const CompressionConfig& c) {
        nlohmann::ordered_json cj;
        cj["mode"] = c.mode == CompressionMode::identity ? "identity"
                                                         : "sparse_quant";
        cj["sparsity"] = c.sparsity;
        cj["bits"] = int(c.bits);
        cj["entropy"] = c.entropy == EntropyCoding::none ? "none" : "huffman";
        return cj;
    };
    nlohmann::ordered_json pj;
    pj["n_clients"] = config.protocol.n_clients;
    pj["total_rounds"] = config.protocol.total_rounds;
    pj["warmup_rounds"] = config.protocol.warmup_rounds;
    pj["mode"] = mode_name(config.protocol.mode);
    pj["predictor"] = {{"window", config.protocol.predictor.window}};
    pj["uplink_compression"] = comp_json(config.protocol.uplink_compression);
    pj["downlink_compression"] = comp_json(config.protocol.downlink_compression);
    pj["weighted_aggregation"] = config.protocol.weighted_aggregation;
    j["protocol"] = std::move(pj);

    if (config.target_accuracy)
        j["target_accuracy"] = *config.target_accuracy;
    else
        j["target_accuracy"] = nullptr;
    j["checkpoint_rounds"] = config.checkpoint_rounds;
    j["output_dir"] = config.output_dir;
    return j;
}

void apply_override(json& doc, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment +
                          "' is not of the form key=value");
    std::string key = assignment.substr(0, eq);
    std::string raw = assignment.substr(eq + 1);

    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw; // bare strings are fine unquoted
    }

    json* node = &doc;
    size_t start = 0;
    while (true) {
        size_t dot = key.find('.', start);
        std::string part = key.substr(start, dot - start);
        if (part.empty())
            throw ConfigError("override key '" + key + "' has an empty segment");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            break;
        }
        node = &(*node)[part];
        if (!node->is_object() && !node->is_null())
            throw ConfigError("override key '" + key +
                              "' descends into a non-object value");
        start = dot + 1;
    }
}

ExperimentConfig parse_config(const std::string& path,
                              const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!path.empty()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
        if (!blank) {
            try {
                doc = json::parse(text);
            } catch (const json::parse_error& e) {
                throw ConfigError("config file '" + path + "': " + e.what());
            }
        }
    }
    for (const std::string& ov : overrides) apply_override(doc, ov);
    return config_from_json(doc);
}

} // namespace resfed
