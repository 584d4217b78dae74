// SPDX-License-Identifier: Apache-2.0
#include "dim/chacha20.hpp"

#include <bit>
#include <cstring>

namespace dim {

namespace {

inline void quarter_round(uint32_t& a, uint32_t& b, uint32_t& c, uint32_t& d) {
    a += b; d ^= a; d = std::rotl(d, 16);
    c += d; b ^= c; b = std::rotl(b, 12);
    a += b; d ^= a; d = std::rotl(d, 8);
    c += d; b ^= c; b = std::rotl(b, 7);
}

} // namespace

void chacha20_block(const std::array<uint32_t, 8>& key, const std::array<uint32_t, 3>& nonce,
                    uint32_t counter, std::array<uint8_t, 64>& out) {
    const uint32_t init[16] = {
        0x61707865u, 0x3320646eu, 0x79622d32u, 0x6b206574u,
        key[0], key[1], key[2], key[3], key[4], key[5], key[6], key[7],
        counter, nonce[0], nonce[1], nonce[2],
    };
    uint32_t s[16];
    std::memcpy(s, init, sizeof(s));
    for (int i = 0; i < 10; ++i) {
        quarter_round(s[0], s[4], s[8], s[12]);
        quarter_round(s[1], s[5], s[9], s[13]);
        quarter_round(s[2], s[6], s[10], s[14]);
        quarter_round(s[3], s[7], s[11], s[15]);
        quarter_round(s[0], s[5], s[10], s[15]);
        quarter_round(s[1], s[6], s[11], s[12]);
        quarter_round(s[2], s[7], s[8], s[13]);
        quarter_round(s[3], s[4], s[9], s[14]);
    }
    for (int i = 0; i < 16; ++i) {
        uint32_t w = s[i] + init[i];
        out[4 * i] = uint8_t(w);
        out[4 * i + 1] = uint8_t(w >> 8);
        out[4 * i + 2] = uint8_t(w >> 16);
        out[4 * i + 3] = uint8_t(w >> 24);
    }
}

ChaCha20Rng::ChaCha20Rng(const std::array<uint8_t, 32>& key) {
    for (int i = 0; i < 8; ++i) {
        key_[i] = uint32_t(key[4 * i]) | uint32_t(key[4 * i + 1]) << 8 |
                  uint32_t(key[4 * i + 2]) << 16 | uint32_t(key[4 * i + 3]) << 24;
    }
}

ChaCha20Rng::ChaCha20Rng(const Digest& key) : ChaCha20Rng(key.bytes) {}

ChaCha20Rng::ChaCha20Rng(uint64_t seed)
    : ChaCha20Rng([&] {
          uint8_t le[8];
          for (int i = 0; i < 8; ++i) le[i] = uint8_t(seed >> (8 * i));
          return blake3(le, sizeof(le));
      }()) {}

void ChaCha20Rng::refill() {
    chacha20_block(key_, {0, 0, 0}, counter_++, buf_);
    pos_ = 0;
}

uint8_t ChaCha20Rng::next_u8() {
    if (pos_ >= 64) refill();
    return buf_[pos_++];
}

uint32_t ChaCha20Rng::next_u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(next_u8()) << (8 * i);
    return v;
}

uint64_t ChaCha20Rng::next_u64() {
    uint64_t lo = next_u32();
    return lo | uint64_t(next_u32()) << 32;
}

double ChaCha20Rng::next_unit() {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

int8_t ChaCha20Rng::next_weight_i8() {
    for (;;) {
        uint8_t b = next_u8();
        if (b != 255) return int8_t(int(b) - 127);
    }
}

} // namespace dim
