#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "resfed/codec.hpp"
#include "resfed/param_vector.hpp"

namespace resfed {

enum class Direction : uint8_t { uplink = 0, downlink = 1 };
enum class Scheme : uint8_t { raw = 0, sparse_quant = 1 };

/// One residual (or raw warm-up) message.
///
/// Binary layout, little-endian:
///   magic "RFD1" (4) | version (1) | round (4) | direction (1) |
///   client_id (4) | scheme (1) | N (8)                          = 23-byte header
///   raw body:    N float32
///   sparse body: L (1) | entropy (1) | nonzero_count (8) | codebook 2^L float32 |
///                [huffman: 256-byte length table | rle bit count (8)] |
///                token payload padded to a byte boundary
/// Two encoders given identical inputs produce identical bytes.
struct ResidualMessage {
    static constexpr uint8_t kVersion = 1;

    uint32_t round = 0;
    Direction direction = Direction::uplink;
    uint32_t client_id = 0;
    Scheme scheme = Scheme::raw;
    uint64_t n = 0;

    std::vector<float> raw_values;     // raw scheme
    EntropyCoding entropy = EntropyCoding::none; // sparse scheme
    SparseQuantized sq;                          // sparse scheme

    bool operator==(const ResidualMessage&) const = default;
};

std::vector<uint8_t> encode_message(const ResidualMessage& msg);

/// Parses and validates a message; throws CorruptDataError on any framing
/// or consistency violation.
ResidualMessage decode_message(std::span<const uint8_t> bytes);

struct MessageBits {
    uint64_t header_bits = 0;
    uint64_t payload_bits = 0;
    uint64_t total() const { return header_bits + payload_bits; }
};

/// Exact serialized size, split into header and body bits.
MessageBits message_bits(const ResidualMessage& msg);

struct CompressResult {
    ParamVector reconstruction; // what the receiver will see, bit-exact
    ResidualMessage msg;
};

/// Lossy residual compression. In identity mode the reconstruction equals
/// the input bit-for-bit (raw scheme). In sparse_quant mode the
/// reconstruction is dequantize(quantize(sparsify_topk(r))) and is exactly
/// what decompressing the message yields.
CompressResult compress(const ParamVector& r, const CompressionConfig& config,
                        uint32_t round, Direction direction, uint32_t client_id);

/// Receiver side: reconstructs the (lossy) residual carried by a message.
ParamVector decompress(const ResidualMessage& msg);

} // namespace resfed
