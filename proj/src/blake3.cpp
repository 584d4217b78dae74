// SPDX-License-Identifier: Apache-2.0
#include "dim/blake3.hpp"

#include <bit>
#include <cstring>

namespace dim {

namespace {

constexpr uint32_t kIv[8] = {
    0x6A09E667u, 0xBB67AE85u, 0x3C6EF372u, 0xA54FF53Au,
    0x510E527Fu, 0x9B05688Cu, 0x1F83D9ABu, 0x5BE0CD19u,
};

constexpr uint8_t kMsgPerm[16] = {2, 6, 3, 10, 7, 0, 4, 13, 1, 11, 12, 5, 9, 14, 15, 8};

constexpr uint32_t kChunkStart = 1 << 0;
constexpr uint32_t kChunkEnd = 1 << 1;
constexpr uint32_t kParent = 1 << 2;
constexpr uint32_t kRoot = 1 << 3;

constexpr size_t kBlockLen = 64;
constexpr size_t kChunkLen = 1024;

inline void g(uint32_t* v, int a, int b, int c, int d, uint32_t mx, uint32_t my) {
    v[a] = v[a] + v[b] + mx;
    v[d] = std::rotr(v[d] ^ v[a], 16);
    v[c] = v[c] + v[d];
    v[b] = std::rotr(v[b] ^ v[c], 12);
    v[a] = v[a] + v[b] + my;
    v[d] = std::rotr(v[d] ^ v[a], 8);
    v[c] = v[c] + v[d];
    v[b] = std::rotr(v[b] ^ v[c], 7);
}

void round_fn(uint32_t* v, const uint32_t* m) {
    g(v, 0, 4, 8, 12, m[0], m[1]);
    g(v, 1, 5, 9, 13, m[2], m[3]);
    g(v, 2, 6, 10, 14, m[4], m[5]);
    g(v, 3, 7, 11, 15, m[6], m[7]);
    g(v, 0, 5, 10, 15, m[8], m[9]);
    g(v, 1, 6, 11, 12, m[10], m[11]);
    g(v, 2, 7, 8, 13, m[12], m[13]);
    g(v, 3, 4, 9, 14, m[14], m[15]);
}

std::array<uint32_t, 16> compress(const std::array<uint32_t, 8>& cv,
                                  const std::array<uint32_t, 16>& block_words,
                                  uint64_t counter, uint32_t block_len, uint32_t flags) {
    uint32_t v[16] = {
        cv[0], cv[1], cv[2], cv[3], cv[4], cv[5], cv[6], cv[7],
        kIv[0], kIv[1], kIv[2], kIv[3],
        uint32_t(counter), uint32_t(counter >> 32), block_len, flags,
    };
    uint32_t m[16];
    std::memcpy(m, block_words.data(), sizeof(m));
    for (int r = 0; r < 7; ++r) {
        round_fn(v, m);
        if (r < 6) {
            uint32_t p[16];
            for (int i = 0; i < 16; ++i) p[i] = m[kMsgPerm[i]];
            std::memcpy(m, p, sizeof(m));
        }
    }
    std::array<uint32_t, 16> out;
    for (int i = 0; i < 8; ++i) {
        out[i] = v[i] ^ v[i + 8];
        out[i + 8] = v[i + 8] ^ cv[i];
    }
    return out;
}

std::array<uint32_t, 16> words_from_block(const uint8_t* block) {
    std::array<uint32_t, 16> w;
    for (int i = 0; i < 16; ++i) {
        w[i] = uint32_t(block[4 * i]) | uint32_t(block[4 * i + 1]) << 8 |
               uint32_t(block[4 * i + 2]) << 16 | uint32_t(block[4 * i + 3]) << 24;
    }
    return w;
}

// A node ready to produce either a chaining value or the root output.
struct Output {
    std::array<uint32_t, 8> input_cv;
    std::array<uint32_t, 16> block_words;
    uint64_t counter;
    uint32_t block_len;
    uint32_t flags;

    std::array<uint32_t, 8> chaining_value() const {
        auto full = compress(input_cv, block_words, counter, block_len, flags);
        std::array<uint32_t, 8> cv;
        std::copy(full.begin(), full.begin() + 8, cv.begin());
        return cv;
    }

    Digest root_digest() const {
        auto full = compress(input_cv, block_words, 0, block_len, flags | kRoot);
        Digest d;
        for (int i = 0; i < 8; ++i) {
            d.bytes[4 * i] = uint8_t(full[i]);
            d.bytes[4 * i + 1] = uint8_t(full[i] >> 8);
            d.bytes[4 * i + 2] = uint8_t(full[i] >> 16);
            d.bytes[4 * i + 3] = uint8_t(full[i] >> 24);
        }
        return d;
    }
};

Output parent_output(const std::array<uint32_t, 8>& left, const std::array<uint32_t, 8>& right) {
    Output o;
    o.input_cv = {kIv[0], kIv[1], kIv[2], kIv[3], kIv[4], kIv[5], kIv[6], kIv[7]};
    for (int i = 0; i < 8; ++i) {
        o.block_words[i] = left[i];
        o.block_words[i + 8] = right[i];
    }
    o.counter = 0;
    o.block_len = kBlockLen;
    o.flags = kParent;
    return o;
}

} // namespace

Blake3::Blake3() {
    std::copy(std::begin(kIv), std::end(kIv), chunk_cv_.begin());
}

void Blake3::add_chunk_cv(std::array<uint32_t, 8> cv, uint64_t total_chunks) {
    // Each completed right-subtree of size 2^k merges with the stacked left twin.
    while ((total_chunks & 1) == 0) {
        cv = parent_output(stack_[--stack_len_], cv).chaining_value();
        total_chunks >>= 1;
    }
    stack_[stack_len_++] = cv;
}

void Blake3::update(std::span<const uint8_t> data) {
    while (!data.empty()) {
        if (chunk_len() == kChunkLen) {
            // chunk complete and more input follows: fold it into the tree;
            // the 16th block is still buffered, the state holds 15 compressed
            uint32_t flags = kChunkEnd | (blocks_compressed_ == 0 ? kChunkStart : 0);
            Output o{chunk_cv_, words_from_block(block_.data()), chunk_counter_,
                     kBlockLen, flags};
            add_chunk_cv(o.chaining_value(), chunk_counter_ + 1);
            ++chunk_counter_;
            std::copy(std::begin(kIv), std::end(kIv), chunk_cv_.begin());
            block_.fill(0);
            block_len_ = 0;
            blocks_compressed_ = 0;
        }
        if (block_len_ == kBlockLen && chunk_len() < kChunkLen) {
            uint32_t flags = blocks_compressed_ == 0 ? kChunkStart : 0;
            auto full = compress(chunk_cv_, words_from_block(block_.data()), chunk_counter_,
                                 kBlockLen, flags);
            std::copy(full.begin(), full.begin() + 8, chunk_cv_.begin());
            ++blocks_compressed_;
            block_.fill(0);
            block_len_ = 0;
        }
        size_t take = std::min(data.size(), kBlockLen - block_len_);
        std::memcpy(block_.data() + block_len_, data.data(), take);
        block_len_ += uint32_t(take);
        data = data.subspan(take);
    }
}

void Blake3::update(const void* data, size_t len) {
    update(std::span<const uint8_t>(static_cast<const uint8_t*>(data), len));
}

Digest Blake3::finalize() const {
    uint32_t flags = kChunkEnd | (blocks_compressed_ == 0 ? kChunkStart : 0);
    Output out{chunk_cv_, words_from_block(block_.data()), chunk_counter_, block_len_, flags};
    for (uint32_t i = stack_len_; i-- > 0;) {
        out = parent_output(stack_[i], out.chaining_value());
    }
    return out.root_digest();
}

Digest blake3(std::span<const uint8_t> data) {
    Blake3 h;
    h.update(data);
    return h.finalize();
}

Digest blake3(const void* data, size_t len) {
    Blake3 h;
    h.update(data, len);
    return h.finalize();
}

std::string Digest::hex() const {
    static const char* k = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (uint8_t b : bytes) {
        s.push_back(k[b >> 4]);
        s.push_back(k[b & 0xf]);
    }
    return s;
}

} // namespace dim
