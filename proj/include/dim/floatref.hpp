// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dim/engine.hpp"
#include "dim/model.hpp"

namespace dim {

/// Simulated SIMD accumulation width. lanes=1 is strict left-to-right;
/// 2/4/8 model 128/256/512-bit lanes.
struct LaneConfig {
    int lanes = 1;

    friend bool operator==(const LaneConfig&, const LaneConfig&) = default;
};

/// Strided lane accumulation: element i goes to accumulator i mod lanes in
/// index order; partials combine in a pairwise tree. The reduction order is a
/// program parameter, never the build machine's vector unit.
float fsum_lanes(std::span<const float> values, LaneConfig cfg);

/// The integer model dequantized to f32 (w_i8 * s_real per element).
struct FloatModel {
    ModelConfig config;
    std::vector<float> tok_embd; // vocab x d_model
    struct Layer {
        std::vector<float> attn_norm;
        std::vector<float> wq, wk, wv, wo;
        std::vector<float> ffn_norm;
        std::vector<float> w_gate, w_up, w_down;
    };
    std::vector<Layer> layers;
    std::vector<float> final_norm;
    std::vector<float> output;
    std::vector<float> rope_cos; // f32 copies of the fp64 angles
    std::vector<float> rope_sin;

    static FloatModel from(const ModelFile& m);
};

struct FloatGenResult {
    std::vector<uint32_t> token_ids;
    /// Gap between the two largest logits at each selection step; the
    /// experiment's sensitivity observable (a flip needs noise > gap).
    std::vector<float> top2_gap;
    /// Per-layer activation snapshot after each block of the final forward
    /// pass, when requested.
    std::vector<std::vector<float>> layer_snapshots;
};

/// Same architecture as the integer engine, every reduction through
/// fsum_lanes(cfg), f32 softmax/SiLU/RMSNorm. Single-threaded.
FloatGenResult float_generate(const FloatModel& m, std::span<const uint32_t> prompt,
                              size_t max_new, LaneConfig cfg, bool keep_snapshots = false);

/// Greedy decodes under both configs in lockstep; first index (within the
/// generated continuation) where the selections differ, or nullopt.
std::optional<size_t> first_divergence(const FloatModel& m, std::span<const uint32_t> prompt,
                                       LaneConfig a, LaneConfig b, size_t horizon);

/// Integer-engine counterpart for the same protocol under two option sets.
std::optional<size_t> first_divergence_int(const ModelFile& m, std::span<const uint32_t> prompt,
                                           EngineOptions a, EngineOptions b, size_t horizon);

/// One forward pass over `input` under both configs; L2 distance of the block
/// outputs at the final position, one value per layer.
std::vector<double> measure_layer_divergence(const FloatModel& m,
                                             std::span<const uint32_t> input, LaneConfig a,
                                             LaneConfig b);

} // namespace dim
