// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

#include "dim/blake3.hpp"

namespace dim {

/// One ChaCha20 block (RFC 8439 layout: 8 key words, 3 nonce words, 32-bit counter).
void chacha20_block(const std::array<uint32_t, 8>& key, const std::array<uint32_t, 3>& nonce,
                    uint32_t counter, std::array<uint8_t, 64>& out);

/// Deterministic byte stream: ChaCha20 keystream under a fixed key,
/// nonce 0, block counter starting at 0. Identical key -> identical stream
/// on every platform.
class ChaCha20Rng {
  public:
    explicit ChaCha20Rng(const std::array<uint8_t, 32>& key);
    explicit ChaCha20Rng(const Digest& key);
    /// Keyed from a 64-bit seed via BLAKE3 of its little-endian bytes.
    explicit ChaCha20Rng(uint64_t seed);

    uint8_t next_u8();
    uint32_t next_u32();
    uint64_t next_u64();
    /// Uniform in [0, 1), 53-bit resolution.
    double next_unit();
    /// Uniform over [-127, 127] by rejection.
    int8_t next_weight_i8();

  private:
    std::array<uint32_t, 8> key_;
    uint32_t counter_ = 0;
    std::array<uint8_t, 64> buf_{};
    size_t pos_ = 64;

    void refill();
};

} // namespace dim
