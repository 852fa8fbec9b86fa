#include "resfed/wire.hpp"

#include <cmath>
#include <cstring>

#include "resfed/errors.hpp"

namespace resfed {
namespace {

constexpr char kMagic[4] = {'R', 'F', 'D', '1'};
constexpr size_t kHeaderBytes = 23;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

class Cursor {
public:
    Cursor(std::span<const uint8_t> data) : data_(data) {}

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() {
        uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    const uint8_t* bytes(size_t n) {
        need(n);
        const uint8_t* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    size_t remaining() const { return data_.size() - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > data_.size())
            throw CorruptDataError("message truncated at byte " +
                                   std::to_string(pos_));
    }
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

} // namespace

std::vector<uint8_t> encode_message(const ResidualMessage& msg) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(ResidualMessage::kVersion);
    put_u32(out, msg.round);
    out.push_back(uint8_t(msg.direction));
    put_u32(out, msg.client_id);
    out.push_back(uint8_t(msg.scheme));
    put_u64(out, msg.n);

    if (msg.scheme == Scheme::raw) {
        if (msg.raw_values.size() != msg.n)
            throw Error("encode_message: raw value count does not match N");
        for (float f : msg.raw_values) put_f32(out, f);
        return out;
    }

    const SparseQuantized& sq = msg.sq;
    if (sq.n != msg.n || sq.codebook.size() != (size_t{1} << sq.bits) ||
        sq.symbols.size() != sq.positions.size())
        throw Error("encode_message: inconsistent sparse body");
    out.push_back(sq.bits);
    out.push_back(uint8_t(msg.entropy));
    put_u64(out, sq.positions.size());
    for (float f : sq.codebook) put_f32(out, f);

    BitBuffer tokens = rle_encode(sq);
    if (msg.entropy == EntropyCoding::huffman) {
        if (tokens.bytes.empty()) {
            // Nothing to code: zero table, zero bit count, no payload.
            out.insert(out.end(), 256, 0);
            put_u64(out, 0);
        } else {
            HuffmanCoded hc = huffman_encode(tokens.bytes);
            out.insert(out.end(), hc.lengths.begin(), hc.lengths.end());
            put_u64(out, tokens.bit_count);
            out.insert(out.end(), hc.stream.bytes.begin(), hc.stream.bytes.end());
        }
    } else {
        out.insert(out.end(), tokens.bytes.begin(), tokens.bytes.end());
    }
    return out;
}

ResidualMessage decode_message(std::span<const uint8_t> bytes) {
    Cursor c(bytes);
    const uint8_t* magic = c.bytes(4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CorruptDataError("bad magic");
    if (c.u8() != ResidualMessage::kVersion)
        throw CorruptDataError("unsupported version");

    ResidualMessage msg;
    msg.round = c.u32();
    uint8_t dir = c.u8();
    if (dir > 1) throw CorruptDataError("invalid direction byte");
    msg.direction = Direction(dir);
    msg.client_id = c.u32();
    uint8_t scheme = c.u8();
    if (scheme > 1) throw CorruptDataError("invalid scheme byte");
    msg.scheme = Scheme(scheme);
    msg.n = c.u64();

    if (msg.scheme == Scheme::raw) {
        if (c.remaining() % 4 != 0 || msg.n != c.remaining() / 4)
            throw CorruptDataError("raw body length mismatch");
        msg.raw_values.resize(static_cast<size_t>(msg.n));
        for (auto& f : msg.raw_values) f = c.f32();
        return msg;
    }

    uint8_t bits = c.u8();
    if (bits < 1 || bits > 8) throw CorruptDataError("invalid quantization bits");
    uint8_t entropy = c.u8();
    if (entropy > 1) throw CorruptDataError("invalid entropy flag");
    msg.entropy = EntropyCoding(entropy);
    uint64_t nnz = c.u64();
    if (nnz > msg.n) throw CorruptDataError("nonzero count exceeds vector length");
    std::vector<float> codebook(size_t{1} << bits);
    for (auto& f : codebook) {
        f = c.f32();
        if (!std::isfinite(f)) throw CorruptDataError("non-finite codebook value");
    }

    std::vector<uint8_t> tokens;
    uint64_t token_bits = 0;
    if (msg.entropy == EntropyCoding::huffman) {
        std::array<uint8_t, 256> lengths;
        std::memcpy(lengths.data(), c.bytes(256), 256);
        token_bits = c.u64();
        uint64_t n_token_bytes = (token_bits + 7) / 8;
        uint64_t payload = c.remaining();
        // every coded symbol costs at least one bit
        if (n_token_bytes > payload * 8)
            throw CorruptDataError("token count exceeds coded payload");
        tokens = huffman_decode(lengths, c.bytes(payload), payload * 8,
                                n_token_bytes);
    } else {
        size_t nrem = c.remaining();
        const uint8_t* p = c.bytes(nrem);
        tokens.assign(p, p + nrem);
        token_bits = uint64_t(nrem) * 8;
    }

    SparseQuantized sq = rle_decode(tokens.data(), token_bits, msg.n, bits,
                                    codebook, nnz);
    sq.bits = bits;
    msg.sq = std::move(sq);
    return msg;
}

MessageBits message_bits(const ResidualMessage& msg) {
    std::vector<uint8_t> bytes = encode_message(msg);
    MessageBits mb;
    mb.header_bits = kHeaderBytes * 8;
    mb.payload_bits = (bytes.size() - kHeaderBytes) * 8;
    return mb;
}

CompressResult compress(const ParamVector& r, const CompressionConfig& config,
                        uint32_t round, Direction direction,
                        uint32_t client_id) {
    config.validate();
    check_finite(r, "compress");

    CompressResult res;
    res.msg.round = round;
    res.msg.direction = direction;
    res.msg.client_id = client_id;
    res.msg.n = r.size();

    if (config.mode == CompressionMode::identity) {
        res.msg.scheme = Scheme::raw;
        res.msg.raw_values = r.values;
        res.reconstruction = r;
        return res;
    }

    res.msg.scheme = Scheme::sparse_quant;
    res.msg.entropy = config.entropy;
    ParamVector pruned = sparsify_topk(r, config.sparsity);
    bool all_zero = true;
    for (float x : pruned.values)
        if (x != 0.0f) {
            all_zero = false;
            break;
        }
    if (all_zero) {
        // Legal empty sparse message; decodes to the zero vector.
        res.msg.sq.n = r.size();
        res.msg.sq.bits = config.bits;
        res.msg.sq.codebook.assign(size_t{1} << config.bits, 0.0f);
        res.reconstruction = ParamVector(r.size());
        res.reconstruction.segments = r.segments;
        return res;
    }
    res.msg.sq = quantize(pruned, config.bits);
    res.reconstruction = dequantize(res.msg.sq);
    res.reconstruction.segments = r.segments;
    return res;
}

ParamVector decompress(const ResidualMessage& msg) {
    if (msg.scheme == Scheme::raw) {
        if (msg.raw_values.size() != msg.n)
            throw CorruptDataError("decompress: raw value count mismatch");
        ParamVector out(msg.raw_values);
        check_finite(out, "decompress");
        return out;
    }
    ParamVector out = dequantize(msg.sq);
    check_finite(out, "decompress");
    return out;
}

} // namespace resfed
