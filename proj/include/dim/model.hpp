// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dim/blake3.hpp"
#include "dim/q16.hpp"
#include "dim/serial.hpp"

namespace dim {

struct ModelConfig {
    uint32_t n_layers = 0;
    uint32_t d_model = 0;
    uint32_t n_heads = 0;
    uint32_t d_ffn = 0;
    uint32_t vocab = 0;
    uint32_t max_ctx = 0;
    double rope_theta = 10000.0;

    uint32_t d_head() const { return d_model / n_heads; }
    /// Throws std::invalid_argument when any invariant is violated.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// INT8 weight matrix with one Q16 scale per row. Values stay in [-127, 127];
/// -128 never appears. scales[r].raw > 0.
struct QuantTensor {
    uint32_t rows = 0;
    uint32_t cols = 0;
    std::vector<int8_t> data;    // rows * cols, row-major
    std::vector<int64_t> scales; // rows, Q16 raw

    int8_t at(uint32_t r, uint32_t c) const { return data[size_t(r) * cols + c]; }
    const int8_t* row(uint32_t r) const { return data.data() + size_t(r) * cols; }
};

struct RowQuant {
    q16 scale;
    std::vector<int8_t> values;
};

/// Per-row INT8 quantization: scale = round(max|row| * 65536 / 127),
/// values = clamp(round-half-away(row[i] * 127 / max|row|), -127, 127).
/// An all-zero row quantizes to scale ONE with zero values.
RowQuant quantize_row(std::span<const double> row);

struct LayerWeights {
    std::vector<q16> attn_norm;
    QuantTensor wq, wk, wv, wo;
    std::vector<q16> ffn_norm;
    QuantTensor w_gate, w_up, w_down;
};

/// Byte-exact model container. `bytes` always holds the canonical
/// serialization of the rest of the struct and `weight_hash` its BLAKE3.
struct ModelFile {
    ModelConfig config;
    QuantTensor tok_embd; // vocab x d_model
    std::vector<LayerWeights> layers;
    std::vector<q16> final_norm;
    QuantTensor output; // vocab x d_model
    std::vector<uint8_t> bytes;
    Digest weight_hash;
};

/// Deterministic toy model: INT8 weights drawn uniformly from [-127, 127] by a
/// ChaCha20 stream keyed from the seed, scales 1/(127*floor(sqrt(d_in))),
/// norm gains ONE. Identical (seed, config) yields identical bytes everywhere.
ModelFile gen_toy_model(uint64_t seed, const ModelConfig& config);

/// Divergence-lab variant: per-row quantized gaussian weights, with the
/// attention score projections (wq, wk) scaled by attn_gain and the rest by
/// body_gain. Large attn_gain sharpens the score distributions, which is the
/// regime where reduction-order noise can flip a float argmax; the integer
/// engine is bit-stable on these models like any other.
ModelFile gen_lab_model(uint64_t seed, const ModelConfig& config, double attn_gain,
                        double body_gain);

/// Canonical little-endian serialization (see README for the exact layout).
std::vector<uint8_t> serialize(const ModelFile& m);

/// Strict parse; throws ParseError with kind bad_magic / bad_version /
/// truncated / invariant. serialize(deserialize(b)) == b for any accepted b.
ModelFile deserialize(std::span<const uint8_t> bytes);

/// BLAKE3 of the exact serialized bytes.
Digest weight_hash(std::span<const uint8_t> model_bytes);

void save_model(const ModelFile& m, const std::string& path);
ModelFile load_model(const std::string& path);
std::vector<uint8_t> read_file_bytes(const std::string& path);

} // namespace dim
