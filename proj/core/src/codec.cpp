#include "resfed/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "resfed/errors.hpp"

namespace resfed {
namespace {

constexpr uint16_t kRleEscape = 0xFFFF;
constexpr uint64_t kRleEscapeAdvance = 65535;

// Median of an unsorted list, even count = mean of the middle two.
// Computed in double, rounded once to float.
float median(std::vector<float> v) {
    if (v.empty()) return 0.0f;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return static_cast<float>((double(v[n / 2 - 1]) + double(v[n / 2])) / 2.0);
}

} // namespace

void CompressionConfig::validate() const {
    if (!(sparsity >= 0.0 && sparsity < 1.0))
        throw ConfigError("compression.sparsity must be in [0, 1)");
    if (bits < 1 || bits > 8)
        throw ConfigError("compression.bits must be in [1, 8]");
}

void BitWriter::put(uint64_t value, unsigned n_bits) {
    for (unsigned i = n_bits; i-- > 0;) {
        unsigned bit = (value >> i) & 1u;
        size_t byte = static_cast<size_t>(bit_count_ >> 3);
        if (byte == bytes_.size()) bytes_.push_back(0);
        if (bit) bytes_[byte] |= uint8_t(0x80u >> (bit_count_ & 7));
        ++bit_count_;
    }
}

std::vector<uint8_t> BitWriter::take() {
    bit_count_ = 0;
    return std::move(bytes_);
}

uint64_t BitReader::get(unsigned n_bits) {
    if (pos_ + n_bits > bit_count_)
        throw CorruptDataError("bitstream exhausted");
    uint64_t v = 0;
    for (unsigned i = 0; i < n_bits; ++i) {
        uint64_t p = pos_ + i;
        v = (v << 1) | ((data_[p >> 3] >> (7 - (p & 7))) & 1u);
    }
    pos_ += n_bits;
    return v;
}

ParamVector sparsify_topk(const ParamVector& v, double sparsity) {
    if (!(sparsity >= 0.0 && sparsity < 1.0))
        throw ConfigError("sparsify_topk: sparsity must be in [0, 1)");
    size_t n = v.size();
    if (n == 0) return v;
    size_t k = static_cast<size_t>(
        std::max<long long>(1, std::llround((1.0 - sparsity) * double(n))));
    if (k >= n) return v;

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    auto larger = [&](size_t a, size_t b) {
        float ma = std::fabs(v.values[a]), mb = std::fabs(v.values[b]);
        if (ma != mb) return ma > mb;
        return a < b; // tie: lower index wins
    };
    std::nth_element(idx.begin(), idx.begin() + k - 1, idx.end(), larger);

    ParamVector out(n);
    out.segments = v.segments;
    for (size_t j = 0; j < k; ++j) out.values[idx[j]] = v.values[idx[j]];
    return out;
}

SparseQuantized quantize(const ParamVector& v, uint8_t bits) {
    if (bits < 1 || bits > 8) throw ConfigError("quantize: bits must be in [1, 8]");
    SparseQuantized sq;
    sq.n = v.size();
    sq.bits = bits;
    for (size_t i = 0; i < v.size(); ++i)
        if (v.values[i] != 0.0f) sq.positions.push_back(i);
    if (sq.positions.empty())
        throw EmptyPayloadError("quantize: input has no nonzero values");

    size_t half = size_t{1} << (bits - 1);
    sq.codebook.assign(size_t{1} << bits, 0.0f);
    sq.symbols.reserve(sq.positions.size());

    if (bits == 1) {
        std::vector<float> pos, neg;
        for (uint64_t i : sq.positions) {
            float x = v.values[i];
            (x > 0.0f ? pos : neg).push_back(std::fabs(x));
        }
        sq.codebook[0] = neg.empty() ? 0.0f : -median(neg);
        sq.codebook[1] = median(pos);
        for (uint64_t i : sq.positions)
            sq.symbols.push_back(v.values[i] > 0.0f ? 1 : 0);
        return sq;
    }

    float lo = HUGE_VALF, hi = -HUGE_VALF;
    for (uint64_t i : sq.positions) {
        float m = std::fabs(v.values[i]);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    // Levels lo..hi; codebook laid out ascending: [-hi..-lo, +lo..+hi].
    std::vector<float> levels(half);
    for (size_t j = 0; j < half; ++j)
        levels[j] = (half == 1) ? lo
                                : static_cast<float>(double(lo) +
                                                     double(j) * (double(hi) - lo) /
                                                         double(half - 1));
    for (size_t j = 0; j < half; ++j) {
        sq.codebook[j] = -levels[half - 1 - j];
        sq.codebook[half + j] = levels[j];
    }
    for (uint64_t i : sq.positions) {
        float x = v.values[i];
        float m = std::fabs(x);
        size_t best = 0;
        float best_d = HUGE_VALF;
        for (size_t j = 0; j < half; ++j) {
            float d = std::fabs(m - levels[j]);
            if (d < best_d) { // strict: ties keep the smaller magnitude
                best_d = d;
                best = j;
            }
        }
        sq.symbols.push_back(
            static_cast<uint8_t>(x > 0.0f ? half + best : half - 1 - best));
    }
    return sq;
}

ParamVector dequantize(const SparseQuantized& sq) {
    ParamVector out(static_cast<size_t>(sq.n));
    uint64_t prev = 0;
    bool first = true;
    for (size_t j = 0; j < sq.positions.size(); ++j) {
        uint64_t p = sq.positions[j];
        if (p >= sq.n || (!first && p <= prev))
            throw CorruptDataError("dequantize: invalid position sequence");
        if (sq.symbols[j] >= sq.codebook.size())
            throw CorruptDataError("dequantize: symbol out of codebook range");
        out.values[static_cast<size_t>(p)] = sq.codebook[sq.symbols[j]];
        prev = p;
        first = false;
    }
    return out;
}

BitBuffer rle_encode(const SparseQuantized& sq) {
    BitWriter w;
    uint64_t prev_end = 0; // index one past the previous nonzero
    for (size_t j = 0; j < sq.positions.size(); ++j) {
        uint64_t gap = sq.positions[j] - prev_end;
        while (gap >= kRleEscapeAdvance) {
            w.put(kRleEscape, 16);
            gap -= kRleEscapeAdvance;
        }
        w.put(gap, 16);
        w.put(sq.symbols[j], sq.bits);
        prev_end = sq.positions[j] + 1;
    }
    BitBuffer out;
    out.bit_count = w.bit_count();
    out.bytes = w.take();
    return out;
}

SparseQuantized rle_decode(const uint8_t* data, uint64_t bit_count, uint64_t n,
                           uint8_t bits, const std::vector<float>& codebook,
                           uint64_t nonzero_count) {
    SparseQuantized sq;
    sq.n = n;
    sq.bits = bits;
    sq.codebook = codebook;
    BitReader r(data, bit_count);
    uint64_t pos = 0;
    for (uint64_t j = 0; j < nonzero_count; ++j) {
        uint64_t gap = 0;
        for (;;) {
            uint64_t tok = r.get(16);
            if (tok == kRleEscape) {
                gap += kRleEscapeAdvance;
                continue;
            }
            gap += tok;
            break;
        }
        pos += gap;
        if (pos >= n) throw CorruptDataError("rle_decode: position past vector end");
        sq.positions.push_back(pos);
        sq.symbols.push_back(static_cast<uint8_t>(r.get(bits)));
        ++pos;
    }
    if (r.bits_left() >= 8)
        throw CorruptDataError("rle_decode: trailing data after last token");
    return sq;
}

HuffmanCoded huffman_encode(const std::vector<uint8_t>& bytes) {
    if (bytes.empty()) throw EmptyPayloadError("huffman_encode: empty input");

    std::array<uint64_t, 256> freq{};
    for (uint8_t b : bytes) ++freq[b];

    // Tree build with deterministic tie-breaking on (freq, creation order).
    struct Node {
        uint64_t freq;
        int order;
        int left, right; // -1 for leaves
        int symbol;
    };
    std::vector<Node> nodes;
    auto cmp = [&](int a, int b) {
        if (nodes[a].freq != nodes[b].freq) return nodes[a].freq > nodes[b].freq;
        return nodes[a].order > nodes[b].order;
    };
    std::priority_queue<int, std::vector<int>, decltype(cmp)> heap(cmp);
    for (int s = 0; s < 256; ++s) {
        if (!freq[s]) continue;
        nodes.push_back({freq[s], int(nodes.size()), -1, -1, s});
        heap.push(int(nodes.size()) - 1);
    }

    HuffmanCoded out;
    if (heap.size() == 1) {
        out.lengths[nodes[0].symbol] = 1;
    } else {
        while (heap.size() > 1) {
            int a = heap.top();
            heap.pop();
            int b = heap.top();
            heap.pop();
            nodes.push_back({nodes[a].freq + nodes[b].freq, int(nodes.size()), a, b, -1});
            heap.push(int(nodes.size()) - 1);
        }
        // Depth-first depth assignment.
        std::vector<std::pair<int, int>> stack{{heap.top(), 0}};
        while (!stack.empty()) {
            auto [id, depth] = stack.back();
            stack.pop_back();
            if (nodes[id].left < 0) {
                out.lengths[nodes[id].symbol] = static_cast<uint8_t>(depth);
            } else {
                stack.push_back({nodes[id].left, depth + 1});
                stack.push_back({nodes[id].right, depth + 1});
            }
        }
    }

    // Canonical codes: assigned in (length, symbol) order.
    unsigned max_len = 0;
    for (int s = 0; s < 256; ++s) max_len = std::max<unsigned>(max_len, out.lengths[s]);
    if (max_len > 64)
        throw Error("huffman_encode: code length exceeds 64 bits");
    std::array<uint64_t, 256> codes{};
    uint64_t code = 0;
    for (unsigned len = 1; len <= max_len; ++len) {
        for (int s = 0; s < 256; ++s) {
            if (out.lengths[s] != len) continue;
            codes[s] = code++;
        }
        code <<= 1;
    }

    BitWriter w;
    for (uint8_t b : bytes) w.put(codes[b], out.lengths[b]);
    out.stream.bit_count = w.bit_count();
    out.stream.bytes = w.take();
    return out;
}

std::vector<uint8_t> huffman_decode(const std::array<uint8_t, 256>& lengths,
                                    const uint8_t* data, uint64_t bit_count,
                                    uint64_t n_symbols) {
    // Canonical decoding tables: per length, the first code and the symbols
    // in canonical order.
    std::array<std::vector<int>, 256> by_len;
    size_t present = 0;
    for (int s = 0; s < 256; ++s) {
        if (!lengths[s]) continue;
        by_len[lengths[s]].push_back(s);
        ++present;
    }
    if (present == 0) {
        if (n_symbols == 0) return {};
        throw CorruptDataError("huffman_decode: empty code table");
    }
    // Kraft check rejects over-full tables.
    long double kraft = 0;
    for (int s = 0; s < 256; ++s)
        if (lengths[s]) kraft += std::pow(2.0L, -(long double)lengths[s]);
    if (kraft > 1.0L + 1e-12L)
        throw CorruptDataError("huffman_decode: invalid code length table");

    std::array<uint64_t, 256> first_code{};
    uint64_t code = 0;
    for (unsigned len = 1; len < 256; ++len) {
        first_code[len] = code;
        code = (code + uint64_t(by_len[len].size())) << 1;
    }

    BitReader r(data, bit_count);
    std::vector<uint8_t> out;
    out.reserve(static_cast<size_t>(n_symbols));
    for (uint64_t i = 0; i < n_symbols; ++i) {
        uint64_t acc = 0;
        unsigned len = 0;
        for (;;) {
            acc = (acc << 1) | r.get(1);
            ++len;
            if (len > 255) throw CorruptDataError("huffman_decode: invalid code");
            uint64_t offset = acc - first_code[len];
            if (acc >= first_code[len] && offset < by_len[len].size()) {
                out.push_back(static_cast<uint8_t>(by_len[len][offset]));
                break;
            }
        }
    }
    return out;
}

double estimate_cr(uint64_t n, uint64_t pruned, uint8_t bits) {
    if (pruned > n) throw ConfigError("estimate_cr: pruned count exceeds length");
    if (bits < 1) throw ConfigError("estimate_cr: bits must be >= 1");
    double denom = double(n - pruned) * std::pow(2.0, double(bits)) +
                   double(pruned) + 2.0 * double(bits) * 32.0;
    return 32.0 * double(n) / denom;
}

} // namespace resfed
