// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dim/chacha20.hpp"
#include "dim/kernels.hpp"
#include "dim/model.hpp"

namespace dim {

struct ContextOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EngineOptions {
    int threads = 1;     // head-level parallelism only
    size_t chunk = 0;    // 0 = plain dense kernel, otherwise matvec chunk size
    bool keep_logits = false;
};

struct GenerationResult {
    std::vector<uint32_t> token_ids; // generated continuation
    Digest output_hash;              // BLAKE3 over u32-LE token encoding
    std::vector<std::vector<q16>> logits; // per generated token, when requested
};

/// Write-once KV store across all layers of one generation session.
struct KvCache {
    std::vector<LayerKv> layers;
    uint32_t max_ctx = 0;
    uint32_t len() const { return layers.empty() ? 0 : layers[0].len; }
};

/// Owns the KV cache for one sequence; single writer. Distinct sessions are
/// independent and may run concurrently.
class InferenceSession {
  public:
    InferenceSession(const ModelFile& model, EngineOptions opts = {},
                     const RopeTables* imported_tables = nullptr);

    /// Runs token at position pos (== current cache length); returns logits.
    std::vector<q16> forward(uint32_t token, uint32_t pos);

    uint32_t cache_len() const { return cache_.len(); }
    const RopeTables& tables() const { return tables_; }

  private:
    const ModelFile& model_;
    EngineOptions opts_;
    RopeTables tables_;
    KvCache cache_;
};

/// Normative output-hash encoding: token IDs as little-endian u32, concatenated.
Digest hash_token_ids(std::span<const uint32_t> ids);

/// Argmax with ties broken by lowest index.
uint32_t select_greedy(std::span<const q16> logits);

/// One temperature-scaled draw: logits divided by temperature via widened
/// integer division, integer softmax, then a cumulative walk over the
/// truncated mass with threshold (draw * sum_p) >> 32.
uint32_t sample_from_logits(std::span<const q16> logits, q16 temperature, ChaCha20Rng& rng);

GenerationResult generate_greedy(const ModelFile& model, std::span<const uint32_t> prompt,
                                 size_t max_new, EngineOptions opts = {},
                                 const RopeTables* imported_tables = nullptr);

/// PRNG keyed by BLAKE3(model bytes || prompt u32-LE bytes); reproducible.
GenerationResult generate_sampled(const ModelFile& model, std::span<const uint32_t> prompt,
                                  size_t max_new, q16 temperature, EngineOptions opts = {});

/// Count of generation runs in this process (used to audit that verification
/// re-executes exactly once).
std::atomic<uint64_t>& generation_counter();

} // namespace dim
