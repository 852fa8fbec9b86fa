#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "resfed/dataset.hpp"
#include "resfed/errors.hpp"
#include "resfed/protocol.hpp"

using namespace resfed;

namespace {

const std::vector<size_t> kLayers = {8, 16, 4};

std::vector<Dataset> make_shards(size_t n_clients, uint64_t seed,
                                 size_t n_samples = 400) {
    Dataset ds = make_blobs(n_samples, 8, 4, 0.15f, seed);
    return partition_iid(ds, n_clients, seed + 1);
}

TrainConfig quick_train() {
    TrainConfig t;
    t.learning_rate = 0.05f;
    t.batch_size = 32;
    return t;
}

ProtocolConfig resfed_config(size_t window, double sparsity, size_t rounds,
                             size_t n_clients) {
    ProtocolConfig p;
    p.n_clients = n_clients;
    p.total_rounds = rounds;
    p.mode = Mode::resfed;
    p.predictor.window = window;
    p.uplink_compression.sparsity = sparsity;
    p.downlink_compression.sparsity = sparsity;
    return p;
}

void check_bit_equal(const ParamVector& a, const ParamVector& b) {
    REQUIRE(a.size() == b.size());
    size_t mismatches = 0;
    for (size_t i = 0; i < a.size(); ++i)
        if (a.values[i] != b.values[i]) ++mismatches;
    CHECK(mismatches == 0);
}

} // namespace

TEST_CASE("effective warm-up and validation") {
    ProtocolConfig p;
    p.predictor.window = 0;
    CHECK(p.effective_warmup() == 1);
    p.predictor.window = 3;
    CHECK(p.effective_warmup() == 3);
    p.warmup_rounds = 5;
    CHECK(p.effective_warmup() == 5);

    ProtocolConfig bad;
    bad.n_clients = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    ProtocolConfig shortrun;
    shortrun.total_rounds = 2;
    shortrun.predictor.window = 4;
    CHECK_THROWS_AS(shortrun.validate(), ConfigError);

    ProtocolConfig underwarm;
    underwarm.predictor.window = 3;
    underwarm.warmup_rounds = 2;
    CHECK_THROWS_AS(underwarm.validate(), ConfigError);
}

TEST_CASE("aggregate weighted mean") {
    std::vector<ParamVector> models;
    models.push_back(ParamVector(std::vector<float>{1.0f, 3.0f}));
    models.push_back(ParamVector(std::vector<float>{3.0f, 5.0f}));
    ParamVector avg = aggregate(models, {1, 3});
    CHECK(avg.values[0] == doctest::Approx(2.5f));
    CHECK(avg.values[1] == doctest::Approx(4.5f));

    ParamVector plain = aggregate(models, {2, 2});
    CHECK(plain.values[0] == doctest::Approx(2.0f));
    CHECK(plain.values[1] == doctest::Approx(4.0f));

    CHECK_THROWS_AS(aggregate({}, {}), ConfigError);
    CHECK_THROWS_AS(aggregate(models, {1}), ConfigError);
    CHECK_THROWS_AS(aggregate(models, {1, 0}), ConfigError);
    models.push_back(ParamVector(1));
    CHECK_THROWS_AS(aggregate(models, {1, 1, 1}), ShapeError);
}

TEST_CASE("warm-up rounds exchange raw models") {
    auto shards = make_shards(4, 10);
    ProtocolConfig p = resfed_config(2, 0.9, 4, 4);
    RunResult res = run(p, quick_train(), shards, kLayers, 10);

    size_t V = 0;
    for (size_t i = 0; i + 1 < kLayers.size(); ++i)
        V += kLayers[i] * kLayers[i + 1] + kLayers[i + 1];
    uint64_t raw_bits = 4 * (184 + 32 * uint64_t(V));

    REQUIRE(res.rounds.size() == 4);
    for (size_t t = 0; t < 2; ++t) {
        CHECK(res.rounds[t].warmup);
        CHECK(res.rounds[t].log.uplink_bits() == raw_bits);
        CHECK(res.rounds[t].log.downlink_bits() == raw_bits);
        CHECK(res.rounds[t].sample_residual.size() == 0);
    }
    for (size_t t = 2; t < 4; ++t) {
        CHECK_FALSE(res.rounds[t].warmup);
        CHECK(res.rounds[t].log.uplink_bits() < raw_bits);
        CHECK(res.rounds[t].sample_residual.size() == V);
    }
}

TEST_CASE("client and server trajectories stay bit-identical") {
    auto shards = make_shards(3, 20);
    for (size_t window : {1, 2}) {
        ProtocolConfig p = resfed_config(window, 0.9, 8, 3);
        detail::Federation fed(p, quick_train(), shards, kLayers, 20);
        for (size_t t = 0; t < p.total_rounds; ++t) {
            fed.round(t);
            for (size_t i = 0; i < 3; ++i) {
                const ClientState& c = fed.clients()[i];
                REQUIRE(c.local_traj.size() ==
                        fed.server().local_trajs[i].size());
                REQUIRE(c.global_traj.size() ==
                        fed.server().global_trajs[i].size());
                for (size_t j = 0; j < c.local_traj.size(); ++j)
                    check_bit_equal(c.local_traj.from_newest(j),
                                    fed.server().local_trajs[i].from_newest(j));
                for (size_t j = 0; j < c.global_traj.size(); ++j)
                    check_bit_equal(c.global_traj.from_newest(j),
                                    fed.server().global_trajs[i].from_newest(j));
                check_bit_equal(c.last_global,
                                fed.server().last_synced_global[i]);
            }
        }
    }
}

TEST_CASE("identity compression reproduces the uncompressed trajectory") {
    auto shards = make_shards(4, 30);
    ProtocolConfig plain;
    plain.n_clients = 4;
    plain.total_rounds = 10;
    plain.mode = Mode::no_compression;
    RunResult base = run(plain, quick_train(), shards, kLayers, 30);

    for (size_t window : {0, 1}) {
        ProtocolConfig p = resfed_config(window, 0.9, 10, 4);
        p.uplink_compression.mode = CompressionMode::identity;
        p.downlink_compression.mode = CompressionMode::identity;
        RunResult res = run(p, quick_train(), shards, kLayers, 30);
        for (size_t t = 0; t < 10; ++t)
            check_bit_equal(res.rounds[t].global, base.rounds[t].global);
    }
}

TEST_CASE("uncompressed gradient exchange matches weight exchange") {
    auto shards = make_shards(4, 40);
    ProtocolConfig plain;
    plain.n_clients = 4;
    plain.total_rounds = 1;
    plain.mode = Mode::no_compression;
    RunResult base = run(plain, quick_train(), shards, kLayers, 40);

    ProtocolConfig grads = plain;
    grads.mode = Mode::compress_gradients;
    grads.uplink_compression.mode = CompressionMode::identity;
    grads.downlink_compression.mode = CompressionMode::identity;
    RunResult res = run(grads, quick_train(), shards, kLayers, 40);

    // the update is divided and re-multiplied by the learning rate and the
    // aggregation order differs, so allow a few ulps per coordinate
    const ParamVector& a = res.rounds[0].global;
    const ParamVector& b = base.rounds[0].global;
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        float scale = std::max(std::fabs(a.values[i]), std::fabs(b.values[i]));
        float ulp = std::nextafter(scale, HUGE_VALF) - scale;
        CHECK(std::fabs(a.values[i] - b.values[i]) <= 16 * ulp);
    }
}

TEST_CASE("weighted aggregation uses shard sizes") {
    Dataset ds = make_blobs(300, 8, 4, 0.15f, 50);
    // deliberately unequal shards
    std::vector<Dataset> shards(2);
    shards[0].dim = shards[1].dim = ds.dim;
    shards[0].n_classes = shards[1].n_classes = ds.n_classes;
    for (size_t i = 0; i < ds.size(); ++i) {
        Dataset& dst = i < 60 ? shards[0] : shards[1];
        dst.features.insert(dst.features.end(), ds.row(i), ds.row(i) + ds.dim);
        dst.labels.push_back(ds.labels[i]);
    }

    ProtocolConfig p;
    p.n_clients = 2;
    p.total_rounds = 2;
    p.mode = Mode::no_compression;
    RunResult weighted = run(p, quick_train(), shards, kLayers, 50);
    p.weighted_aggregation = false;
    RunResult unweighted = run(p, quick_train(), shards, kLayers, 50);

    bool differs = false;
    for (size_t i = 0; i < weighted.final_model.params.size(); ++i)
        differs |= weighted.final_model.params.values[i] !=
                   unweighted.final_model.params.values[i];
    CHECK(differs);
}

TEST_CASE("runs are deterministic") {
    auto shards = make_shards(3, 60);
    ProtocolConfig p = resfed_config(1, 0.95, 6, 3);
    RunResult a = run(p, quick_train(), shards, kLayers, 60);
    RunResult b = run(p, quick_train(), shards, kLayers, 60);
    for (size_t t = 0; t < 6; ++t) {
        check_bit_equal(a.rounds[t].global, b.rounds[t].global);
        CHECK(a.rounds[t].log.uplink_bits() == b.rounds[t].log.uplink_bits());
        CHECK(a.rounds[t].log.downlink_bits() ==
              b.rounds[t].log.downlink_bits());
    }
}

TEST_CASE("compressed residual exchange still learns") {
    Dataset full = make_blobs(800, 8, 4, 0.15f, 70);
    auto [train_set, test_set] = split_train_test(full, 0.25, 71);
    auto shards = partition_iid(train_set, 4, 72);

    ProtocolConfig p = resfed_config(1, 0.9, 30, 4);
    // the fixed 256-byte code-length table would dominate on a model this
    // small, so measure with plain token coding
    p.uplink_compression.entropy = EntropyCoding::none;
    p.downlink_compression.entropy = EntropyCoding::none;
    RunResult res = run(p, quick_train(), shards, kLayers, 70);
    EvalResult ev = evaluate(res.final_model, test_set);
    CHECK(ev.accuracy >= 0.8);

    // post-warm-up rounds are much cheaper than raw exchange
    size_t V = res.final_model.params.size();
    uint64_t raw_bits = 4 * (184 + 32 * uint64_t(V));
    for (size_t t = 1; t < 30; ++t) {
        double cr = double(raw_bits) /
                    double(res.rounds[t].log.uplink_bits());
        CHECK(cr > 4.0);
    }
}

TEST_CASE("federation constructor validation") {
    auto shards = make_shards(3, 80);
    ProtocolConfig p = resfed_config(1, 0.9, 4, 4);
    CHECK_THROWS_AS(detail::Federation(p, quick_train(), shards, kLayers, 80),
                    ConfigError);

    auto shards2 = make_shards(4, 80);
    shards2[2].features.clear();
    shards2[2].labels.clear();
    CHECK_THROWS_AS(detail::Federation(p, quick_train(), shards2, kLayers, 80),
                    EmptyDataError);
}
