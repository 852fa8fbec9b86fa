#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "resfed/codec.hpp"
#include "resfed/errors.hpp"
#include "resfed/rng.hpp"
#include "resfed/wire.hpp"

using namespace resfed;

namespace {

ParamVector pv(std::initializer_list<float> v) {
    return ParamVector(std::vector<float>(v));
}

ParamVector random_sparse(size_t n, double keep_prob, Rng& rng) {
    ParamVector v(n);
    for (auto& x : v.values)
        if (rng.uniform() < keep_prob) x = float(rng.normal());
    return v;
}

} // namespace

TEST_CASE("sparsify_topk examples") {
    ParamVector a = sparsify_topk(pv({0.5f, -0.2f, 0.1f, 0.0f}), 0.5);
    CHECK(a.values == std::vector<float>{0.5f, -0.2f, 0.0f, 0.0f});

    ParamVector b = pv({0.3f, -0.1f, 0.2f});
    CHECK(sparsify_topk(b, 0.0).values == b.values);

    // ties keep the lower index
    ParamVector c = sparsify_topk(pv({0.3f, -0.3f, 0.3f, 0.3f}), 0.75);
    CHECK(c.values == std::vector<float>{0.3f, 0.0f, 0.0f, 0.0f});

    CHECK_THROWS_AS(sparsify_topk(b, 1.0), ConfigError);
}

TEST_CASE("sparsify_topk properties") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 50 + rng.below(200);
        ParamVector v(n);
        for (auto& x : v.values) x = float(rng.normal());
        double s = 0.5 + 0.4 * rng.uniform();
        ParamVector out = sparsify_topk(v, s);
        size_t k = size_t(std::max<long long>(
            1, std::llround((1.0 - s) * double(n))));

        size_t nnz = 0;
        float min_kept = HUGE_VALF, max_dropped = 0.0f;
        for (size_t i = 0; i < n; ++i) {
            if (out.values[i] != 0.0f) {
                ++nnz;
                CHECK(out.values[i] == v.values[i]);
                min_kept = std::min(min_kept, std::fabs(v.values[i]));
            } else {
                max_dropped = std::max(max_dropped, std::fabs(v.values[i]));
            }
        }
        CHECK(nnz == k);
        CHECK(min_kept >= max_dropped);
    }
}

TEST_CASE("quantize 1-bit medians") {
    SparseQuantized sq = quantize(pv({0.5f, -0.2f, 0.3f, -0.6f}), 1);
    CHECK(sq.codebook == std::vector<float>{-0.4f, 0.4f});
    ParamVector back = dequantize(sq);
    CHECK(back.values == std::vector<float>{0.4f, -0.4f, 0.4f, -0.4f});

    // one-sided input: absent sign class maps to zero
    SparseQuantized pos = quantize(pv({1.0f, 3.0f}), 1);
    CHECK(pos.codebook == std::vector<float>{0.0f, 2.0f});
    CHECK(dequantize(pos).values == std::vector<float>{2.0f, 2.0f});
    CHECK(std::signbit(pos.codebook[0]) == false); // normalized +0.0

    // constant nonzeros reconstruct exactly
    for (uint8_t L : {1, 2, 3}) {
        SparseQuantized c = quantize(pv({0.25f, 0.0f, 0.25f}), L);
        ParamVector back2 = dequantize(c);
        CHECK(back2.values == std::vector<float>{0.25f, 0.0f, 0.25f});
    }

    CHECK_THROWS_AS(quantize(pv({0.0f, 0.0f}), 1), EmptyPayloadError);
}

TEST_CASE("quantize odd-count median is the middle value") {
    SparseQuantized sq = quantize(pv({0.1f, 0.5f, 0.2f}), 1);
    CHECK(sq.codebook[1] == 0.2f);
}

TEST_CASE("quantize multi-bit levels") {
    // nonzeros [0.1, -0.4, 0.2]; L=2 levels per sign: {0.1, 0.4}
    SparseQuantized sq = quantize(pv({0.1f, -0.4f, 0.2f}), 2);
    CHECK(sq.codebook == std::vector<float>{-0.4f, -0.1f, 0.1f, 0.4f});
    ParamVector back = dequantize(sq);
    CHECK(back.values[0] == 0.1f);
    CHECK(back.values[1] == -0.4f);
    CHECK(back.values[2] == 0.1f); // 0.2 is nearer 0.1 than 0.4

    // exact midpoint ties toward the smaller magnitude
    SparseQuantized tie = quantize(pv({0.1f, 0.25f, 0.4f}), 2);
    CHECK(dequantize(tie).values[1] == 0.1f);
}

TEST_CASE("quantize preserves sign and support") {
    Rng rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        ParamVector v = random_sparse(120, 0.3, rng);
        bool any = false;
        for (float x : v.values) any |= x != 0.0f;
        if (!any) continue;
        for (uint8_t L : {1, 2, 4}) {
            ParamVector back = dequantize(quantize(v, L));
            for (size_t i = 0; i < v.size(); ++i) {
                if (v.values[i] == 0.0f) {
                    CHECK(back.values[i] == 0.0f);
                } else {
                    CHECK(back.values[i] != 0.0f);
                    CHECK((v.values[i] > 0) == (back.values[i] > 0));
                }
            }
        }
    }
}

TEST_CASE("dequantize basics and validation") {
    SparseQuantized sq;
    sq.n = 5;
    sq.positions = {3};
    sq.symbols = {1};
    sq.codebook = {-1.0f, 2.5f};
    sq.bits = 1;
    CHECK(dequantize(sq).values ==
          std::vector<float>{0.0f, 0.0f, 0.0f, 2.5f, 0.0f});

    SparseQuantized empty;
    empty.n = 3;
    empty.codebook = {0.0f, 0.0f};
    CHECK(dequantize(empty).values == std::vector<float>{0.0f, 0.0f, 0.0f});

    SparseQuantized bad = sq;
    bad.positions = {7};
    CHECK_THROWS_AS(dequantize(bad), CorruptDataError);
}

TEST_CASE("rle token layout") {
    SparseQuantized sq;
    sq.n = 6;
    sq.positions = {3, 5};
    sq.symbols = {1, 0};
    sq.codebook = {-1.0f, 1.0f};
    sq.bits = 1;
    BitBuffer bits = rle_encode(sq);
    CHECK(bits.bit_count == 2 * 17);
    BitReader r(bits.bytes.data(), bits.bit_count);
    CHECK(r.get(16) == 3);
    CHECK(r.get(1) == 1);
    CHECK(r.get(16) == 1);
    CHECK(r.get(1) == 0);

    // dense run: gaps all zero
    SparseQuantized dense;
    dense.n = 4;
    dense.positions = {0, 1, 2};
    dense.symbols = {0, 0, 1};
    dense.codebook = {-1.0f, 1.0f};
    dense.bits = 1;
    BitBuffer dbits = rle_encode(dense);
    BitReader dr(dbits.bytes.data(), dbits.bit_count);
    for (int j = 0; j < 3; ++j) {
        CHECK(dr.get(16) == 0);
        dr.get(1);
    }
}

TEST_CASE("rle escape for long gaps") {
    SparseQuantized sq;
    sq.n = 70000;
    sq.positions = {69999};
    sq.symbols = {1};
    sq.codebook = {-1.0f, 1.0f};
    sq.bits = 1;
    BitBuffer bits = rle_encode(sq);
    CHECK(bits.bit_count == 16 + 16 + 1);
    BitReader r(bits.bytes.data(), bits.bit_count);
    CHECK(r.get(16) == 0xFFFF);
    CHECK(r.get(16) == 4464); // 69999 = 65535 + 4464
    CHECK(r.get(1) == 1);

    SparseQuantized back = rle_decode(bits.bytes.data(), bits.bit_count, sq.n,
                                      sq.bits, sq.codebook, 1);
    CHECK(back == sq);
}

TEST_CASE("rle round-trip property and errors") {
    Rng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = 1 + rng.below(3000);
        ParamVector v = random_sparse(n, 0.05, rng);
        bool any = false;
        for (float x : v.values) any |= x != 0.0f;
        if (!any) continue;
        uint8_t L = uint8_t(1 + rng.below(4));
        SparseQuantized sq = quantize(v, L);
        BitBuffer bits = rle_encode(sq);
        SparseQuantized back = rle_decode(bits.bytes.data(), bits.bit_count,
                                          sq.n, sq.bits, sq.codebook,
                                          sq.positions.size());
        CHECK(back == sq);
    }

    SparseQuantized sq;
    sq.n = 10;
    sq.positions = {2, 7};
    sq.symbols = {0, 1};
    sq.codebook = {-1.0f, 1.0f};
    sq.bits = 1;
    BitBuffer bits = rle_encode(sq);
    // truncated stream
    CHECK_THROWS_AS(rle_decode(bits.bytes.data(), bits.bit_count - 10, sq.n,
                               sq.bits, sq.codebook, 2),
                    CorruptDataError);
    // claims a position past the end
    CHECK_THROWS_AS(rle_decode(bits.bytes.data(), bits.bit_count, 3, sq.bits,
                               sq.codebook, 2),
                    CorruptDataError);
}

TEST_CASE("huffman round-trip and determinism") {
    Rng rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 1 + rng.below(2000);
        std::vector<uint8_t> bytes(n);
        // skewed distribution so codes have varied lengths
        for (auto& b : bytes) b = uint8_t(rng.below(8) == 0 ? rng.below(256)
                                                            : rng.below(4));
        HuffmanCoded hc = huffman_encode(bytes);
        std::vector<uint8_t> back = huffman_decode(hc.lengths,
                                                   hc.stream.bytes.data(),
                                                   hc.stream.bit_count,
                                                   bytes.size());
        CHECK(back == bytes);

        HuffmanCoded again = huffman_encode(bytes);
        CHECK(again.lengths == hc.lengths);
        CHECK(again.stream.bytes == hc.stream.bytes);
    }
}

TEST_CASE("huffman single-symbol input") {
    std::vector<uint8_t> bytes(100, 0x41);
    HuffmanCoded hc = huffman_encode(bytes);
    CHECK(hc.lengths[0x41] == 1);
    CHECK(hc.stream.bit_count == 100);
    CHECK(huffman_decode(hc.lengths, hc.stream.bytes.data(),
                         hc.stream.bit_count, 100) == bytes);
}

TEST_CASE("huffman incompressible data does not shrink") {
    Rng rng(55);
    std::vector<uint8_t> bytes(4096);
    for (auto& b : bytes) b = uint8_t(rng.below(256));
    HuffmanCoded hc = huffman_encode(bytes);
    CHECK(double(hc.stream.bit_count) >= 0.99 * 8.0 * double(bytes.size()));
}

TEST_CASE("huffman payload brackets the empirical entropy") {
    Rng rng(56);
    std::vector<uint8_t> bytes(8192);
    for (auto& b : bytes) b = uint8_t(rng.below(8) ? 0 : rng.below(16));
    std::map<uint8_t, size_t> freq;
    for (uint8_t b : bytes) ++freq[b];
    double H = 0.0;
    for (auto& [sym, cnt] : freq) {
        double p = double(cnt) / double(bytes.size());
        H -= p * std::log2(p);
    }
    HuffmanCoded hc = huffman_encode(bytes);
    double per_symbol = double(hc.stream.bit_count) / double(bytes.size());
    CHECK(per_symbol >= H - 1e-9);
    CHECK(per_symbol <= H + 1.0);
}

TEST_CASE("huffman errors") {
    CHECK_THROWS_AS(huffman_encode({}), EmptyPayloadError);

    std::vector<uint8_t> bytes = {1, 2, 3, 1, 2, 1};
    HuffmanCoded hc = huffman_encode(bytes);
    // truncation
    CHECK_THROWS_AS(huffman_decode(hc.lengths, hc.stream.bytes.data(), 2,
                                   bytes.size()),
                    CorruptDataError);
    // empty table with symbols requested
    std::array<uint8_t, 256> none{};
    CHECK_THROWS_AS(huffman_decode(none, hc.stream.bytes.data(),
                                   hc.stream.bit_count, 1),
                    CorruptDataError);
    // over-full (Kraft-violating) table
    std::array<uint8_t, 256> overfull{};
    overfull[0] = overfull[1] = overfull[2] = 1;
    CHECK_THROWS_AS(huffman_decode(overfull, hc.stream.bytes.data(),
                                   hc.stream.bit_count, 3),
                    CorruptDataError);
}

TEST_CASE("compress contract") {
    Rng rng(66);
    ParamVector r(500);
    for (auto& x : r.values) x = float(rng.normal());

    CompressionConfig identity;
    identity.mode = CompressionMode::identity;
    CompressResult ci = compress(r, identity, 3, Direction::uplink, 4);
    CHECK(ci.reconstruction.values == r.values);
    CHECK(ci.msg.scheme == Scheme::raw);
    CHECK(decompress(ci.msg).values == r.values);

    CompressionConfig sq;
    sq.sparsity = 0.9;
    sq.bits = 1;
    for (EntropyCoding e : {EntropyCoding::none, EntropyCoding::huffman}) {
        sq.entropy = e;
        CompressResult cs = compress(r, sq, 3, Direction::downlink, 4);
        CHECK(cs.msg.scheme == Scheme::sparse_quant);
        // receiver sees exactly the sender's reconstruction
        ResidualMessage wire_msg = decode_message(encode_message(cs.msg));
        CHECK(decompress(wire_msg).values == cs.reconstruction.values);
    }

    // all-zero residual: legal empty sparse message
    ParamVector zeros(64);
    CompressResult cz = compress(zeros, sq, 0, Direction::uplink, 0);
    CHECK(cz.msg.sq.positions.empty());
    CHECK(cz.reconstruction.values == zeros.values);
    ResidualMessage zmsg = decode_message(encode_message(cz.msg));
    CHECK(decompress(zmsg).values == zeros.values);
}

TEST_CASE("wire round-trip and corruption") {
    Rng rng(77);
    ParamVector r(300);
    for (auto& x : r.values) x = float(rng.normal());
    CompressionConfig cfg;
    cfg.sparsity = 0.95;
    CompressResult c = compress(r, cfg, 9, Direction::uplink, 2);
    std::vector<uint8_t> bytes = encode_message(c.msg);

    ResidualMessage back = decode_message(bytes);
    CHECK(back == c.msg);

    // two encoders, identical bytes
    CHECK(encode_message(back) == bytes);

    std::vector<uint8_t> corrupt = bytes;
    corrupt[0] ^= 0xFF; // magic
    CHECK_THROWS_AS(decode_message(corrupt), CorruptDataError);

    std::vector<uint8_t> truncated(bytes.begin(), bytes.begin() + 10);
    CHECK_THROWS_AS(decode_message(truncated), CorruptDataError);
}

TEST_CASE("message_bits accounting") {
    ParamVector r(40);
    for (size_t i = 0; i < r.size(); ++i) r.values[i] = float(i) - 20.0f;

    CompressionConfig identity;
    identity.mode = CompressionMode::identity;
    MessageBits raw = message_bits(compress(r, identity, 0,
                                            Direction::uplink, 0).msg);
    CHECK(raw.header_bits == 184);
    CHECK(raw.payload_bits == 32 * 40);

    // empty sparse message: L + entropy flag + count + codebook (+ huffman
    // table and bit count)
    CompressionConfig cfg;
    cfg.sparsity = 0.9;
    cfg.entropy = EntropyCoding::none;
    ParamVector zeros(64);
    MessageBits mb = message_bits(compress(zeros, cfg, 0,
                                           Direction::uplink, 0).msg);
    CHECK(mb.payload_bits == (1 + 1 + 8 + 2 * 4) * 8);

    cfg.entropy = EntropyCoding::huffman;
    MessageBits mbh = message_bits(compress(zeros, cfg, 0,
                                            Direction::uplink, 0).msg);
    CHECK(mbh.payload_bits == (1 + 1 + 8 + 2 * 4 + 256 + 8) * 8);

    // payload equals actual body length
    CompressionConfig dense;
    dense.sparsity = 0.5;
    ResidualMessage m = compress(r, dense, 0, Direction::uplink, 0).msg;
    CHECK(message_bits(m).total() == encode_message(m).size() * 8);
}

TEST_CASE("estimate_cr formula") {
    CHECK(estimate_cr(61706, 49365, 1) ==
          doctest::Approx(61706.0 * 32 / 74111.0).epsilon(1e-12));
    CHECK(estimate_cr(61706, 49365, 1) == doctest::Approx(26.64).epsilon(1e-3));

    uint64_t n = 1000000;
    CHECK(estimate_cr(n, 0, 1) ==
          doctest::Approx(32.0 * n / (2.0 * n + 64)).epsilon(1e-12));
    CHECK(estimate_cr(n, n, 1) ==
          doctest::Approx(32.0 * n / (double(n) + 64)).epsilon(1e-12));
    CHECK_THROWS_AS(estimate_cr(10, 11, 1), ConfigError);
}

TEST_CASE("measured CR is monotone in sparsity") {
    Rng rng(88);
    ParamVector r(20000);
    for (auto& x : r.values) x = float(rng.normal());
    double prev = 0.0;
    for (double s : {0.5, 0.9, 0.99}) {
        CompressionConfig cfg;
        cfg.sparsity = s;
        MessageBits mb = message_bits(compress(r, cfg, 0,
                                               Direction::uplink, 0).msg);
        double cr = 32.0 * double(r.size()) / double(mb.payload_bits);
        CHECK(cr >= prev);
        prev = cr;
    }
}

TEST_CASE("lossy idempotence: recompression preserves support and signs") {
    Rng rng(99);
    ParamVector r(2000);
    for (auto& x : r.values) x = float(rng.normal());
    CompressionConfig cfg;
    cfg.sparsity = 0.9;
    ParamVector rbar = compress(r, cfg, 0, Direction::uplink, 0).reconstruction;
    ParamVector rbar2 = compress(rbar, cfg, 0, Direction::uplink, 0)
                            .reconstruction;
    for (size_t i = 0; i < r.size(); ++i) {
        CHECK((rbar.values[i] == 0.0f) == (rbar2.values[i] == 0.0f));
        if (rbar.values[i] != 0.0f)
            CHECK((rbar.values[i] > 0) == (rbar2.values[i] > 0));
    }
}
