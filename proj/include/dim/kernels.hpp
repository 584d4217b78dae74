// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dim/model.hpp"
#include "dim/q16.hpp"
#include "dim/rope.hpp"

namespace dim {

/// Activation clamp applied after every residual add: +-256.0 in real units.
/// Keeps the worst-case dense accumulator at 127 * 2^24 * 8192 < 2^63.
constexpr int64_t kActClampRaw = 256ll * kQ16One;

/// out[i] = (sum_j w_i8[i,j] * x[j].raw) * s[i] >> 16. The inner sum runs in
/// index order in a 64-bit accumulator; the scale product widens to 128 bits.
std::vector<q16> dense_forward(const QuantTensor& w, std::span<const q16> x);

/// dense_forward with the row accumulation split into per-chunk partial sums
/// that are combined in chunk order. Bitwise identical to dense_forward for
/// every chunk_size >= 1 (integer addition is associative).
std::vector<q16> matvec_chunked(const QuantTensor& w, std::span<const q16> x, size_t chunk_size);

/// chunk_size == 0 selects the plain kernel.
std::vector<q16> dense_dispatch(const QuantTensor& w, std::span<const q16> x, size_t chunk_size);

/// ms = ((sum x_i^2) / n) >> 16, r = inv_sqrt(ms + 1), out_i = ((x_i*r)>>16 * g_i)>>16.
std::vector<q16> rmsnorm(std::span<const q16> x, std::span<const q16> gamma);

/// Paired-halves rotation: out[k] = x[k]*cos - x[k+d/2]*sin,
/// out[k+d/2] = x[k]*sin + x[k+d/2]*cos, all products via q16_mul.
std::vector<q16> rope_apply(std::span<const q16> x, uint32_t pos, const RopeTables& tables);
void rope_apply_inplace(std::span<q16> x, uint32_t pos, const RopeTables& tables);

/// Integer softmax: w_i = exp_neg_lut(clamp(max - s_i, 0, 8)), p_i = (w_i<<16)/S
/// with truncating division. sum(p) lands in [ONE - n, ONE]; no renormalization.
std::vector<q16> softmax_q16(std::span<const q16> scores);

/// Per-layer KV storage, one K/V strip per head, full Q16 (i64) precision.
struct LayerKv {
    uint32_t d_head = 0;
    uint32_t max_ctx = 0;
    uint32_t len = 0;
    struct Head {
        std::vector<int64_t> k;
        std::vector<int64_t> v;
    };
    std::vector<Head> heads;

    LayerKv() = default;
    LayerKv(uint32_t n_heads, uint32_t d_head, uint32_t max_ctx);
};

/// One attention step at `pos` (which must equal cache.len): applies RoPE to
/// the per-head q/k slices, appends k/v to the cache, scores in position order
/// with a 128-bit dot then q16_mul by inv_sqrt(d_head), softmax, and the
/// weighted value sum. Heads may run on `threads` workers; outputs land in
/// head-index order regardless of scheduling.
std::vector<q16> attention_step(std::span<const q16> q, std::span<const q16> k,
                                std::span<const q16> v, LayerKv& cache, uint32_t pos,
                                const RopeTables& tables, int threads);

/// h = silu(gate(x)) * up(x) elementwise, out = down(h); fixed evaluation order.
std::vector<q16> ffn_silu(std::span<const q16> x, const QuantTensor& w_gate,
                          const QuantTensor& w_up, const QuantTensor& w_down,
                          size_t chunk_size = 0);

/// Elementwise raw sum clamped to [-kActClampRaw, kActClampRaw].
std::vector<q16> residual_add_clamp(std::span<const q16> a, std::span<const q16> b);

} // namespace dim
