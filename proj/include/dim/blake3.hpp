// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace dim {

/// 256-bit digest value. Comparable, hex-printable.
struct Digest {
    std::array<uint8_t, 32> bytes{};

    std::string hex() const;
    friend bool operator==(const Digest&, const Digest&) = default;
};

/// Incremental BLAKE3 hasher (plain hash mode, 32-byte output).
class Blake3 {
  public:
    Blake3();

    void update(std::span<const uint8_t> data);
    void update(const void* data, size_t len);

    /// May be called at any point; does not disturb the running state.
    Digest finalize() const;

  private:
    // current chunk
    std::array<uint32_t, 8> chunk_cv_;
    uint64_t chunk_counter_ = 0;
    std::array<uint8_t, 64> block_{};
    uint32_t block_len_ = 0;
    uint32_t blocks_compressed_ = 0;
    // stack of subtree chaining values, one slot per tree level
    std::array<std::array<uint32_t, 8>, 54> stack_;
    uint32_t stack_len_ = 0;

    size_t chunk_len() const { return size_t(blocks_compressed_) * 64 + block_len_; }
    void add_chunk_cv(std::array<uint32_t, 8> cv, uint64_t total_chunks);
};

Digest blake3(std::span<const uint8_t> data);
Digest blake3(const void* data, size_t len);

} // namespace dim
