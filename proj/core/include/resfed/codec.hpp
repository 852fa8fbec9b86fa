#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "resfed/param_vector.hpp"

namespace resfed {

enum class EntropyCoding : uint8_t { none = 0, huffman = 1 };
enum class CompressionMode : uint8_t { identity = 0, sparse_quant = 1 };

/// Lossy residual compression settings.
struct CompressionConfig {
    CompressionMode mode = CompressionMode::sparse_quant;
    double sparsity = 0.99;   // fraction of coordinates zeroed, in [0, 1)
    uint8_t bits = 1;         // quantization bits per surviving value, <= 8
    EntropyCoding entropy = EntropyCoding::huffman;

    void validate() const;
};

/// Sparse vector after top-k pruning and codebook quantization.
struct SparseQuantized {
    uint64_t n = 0;                    // dense length
    std::vector<uint64_t> positions;   // strictly increasing, < n
    std::vector<uint8_t> symbols;      // one per position, < 2^bits
    std::vector<float> codebook;       // 2^bits reconstruction values
    uint8_t bits = 1;

    bool operator==(const SparseQuantized&) const = default;
};

/// MSB-first bit accumulator.
class BitWriter {
public:
    void put(uint64_t value, unsigned n_bits);
    const std::vector<uint8_t>& bytes() const { return bytes_; }
    std::vector<uint8_t> take();
    uint64_t bit_count() const { return bit_count_; }

private:
    std::vector<uint8_t> bytes_;
    uint64_t bit_count_ = 0;
};

/// MSB-first bit reader; throws CorruptDataError on exhaustion.
class BitReader {
public:
    BitReader(const uint8_t* data, uint64_t bit_count)
        : data_(data), bit_count_(bit_count) {}

    uint64_t get(unsigned n_bits);
    uint64_t bits_left() const { return bit_count_ - pos_; }

private:
    const uint8_t* data_;
    uint64_t bit_count_;
    uint64_t pos_ = 0;
};

/// Keeps the k = max(1, round((1-sparsity)*N)) largest-magnitude entries,
/// zeroing the rest. Ties break toward the lower index.
ParamVector sparsify_topk(const ParamVector& v, double sparsity);

/// Codebook quantization of the nonzeros of a sparse vector.
///
/// bits = 1: codebook [-m-, +m+] where m+/m- are the medians of the
/// positive / absolute negative nonzeros (an absent sign class maps to 0).
/// bits > 1: 2^(bits-1) uniform magnitude levels per sign spanning
/// [min|nz|, max|nz|]; each nonzero maps to the nearest same-sign level,
/// ties toward the smaller magnitude.
SparseQuantized quantize(const ParamVector& v, uint8_t bits);

/// Dense reconstruction: codebook[symbol] at each position, zero elsewhere.
ParamVector dequantize(const SparseQuantized& sq);

/// Zero-run token stream: per nonzero, (gap: 16 bits, symbol: L bits).
/// Gaps >= 65535 emit 0xFFFF escape tokens (no symbol, advance 65535).
/// Returns the packed bytes and the exact bit count.
struct BitBuffer {
    std::vector<uint8_t> bytes;
    uint64_t bit_count = 0;
};

BitBuffer rle_encode(const SparseQuantized& sq);

/// Exact inverse of rle_encode. Throws CorruptDataError on overflow past n
/// or premature stream end.
SparseQuantized rle_decode(const uint8_t* data, uint64_t bit_count, uint64_t n,
                           uint8_t bits, const std::vector<float>& codebook,
                           uint64_t nonzero_count);

/// Canonical Huffman over byte symbols. Returns 256 code lengths
/// (0 = absent) and the packed code stream. A single distinct symbol gets
/// code length 1. Throws EmptyPayloadError on empty input.
struct HuffmanCoded {
    std::array<uint8_t, 256> lengths{};
    BitBuffer stream;
};

HuffmanCoded huffman_encode(const std::vector<uint8_t>& bytes);

/// Decodes n_symbols bytes; throws CorruptDataError on an invalid code,
/// bad table, or premature end.
std::vector<uint8_t> huffman_decode(const std::array<uint8_t, 256>& lengths,
                                    const uint8_t* data, uint64_t bit_count,
                                    uint64_t n_symbols);

/// Analytic compression-ratio estimate
///   CR = 32 N / ((N - M) 2^L + M + 2 L 32)
/// where M is the pruned count. Entropy coding is excluded. Reporting
/// only; never used for actual message sizing.
double estimate_cr(uint64_t n, uint64_t pruned, uint8_t bits);

} // namespace resfed
