// SPDX-License-Identifier: Apache-2.0
#include "dim/kernels.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace dim {

namespace {

void check_dims(const QuantTensor& w, std::span<const q16> x, const char* what) {
    if (x.size() != w.cols) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

} // namespace

std::vector<q16> dense_forward(const QuantTensor& w, std::span<const q16> x) {
    check_dims(w, x, "dense_forward");
    std::vector<q16> out(w.rows);
    for (uint32_t r = 0; r < w.rows; ++r) {
        const int8_t* row = w.row(r);
        int64_t acc = 0;
        for (uint32_t j = 0; j < w.cols; ++j) {
            acc += int64_t(row[j]) * x[j].raw;
        }
        out[r].raw = int64_t((int128(acc) * w.scales[r]) >> 16);
    }
    return out;
}

std::vector<q16> matvec_chunked(const QuantTensor& w, std::span<const q16> x, size_t chunk_size) {
    check_dims(w, x, "matvec_chunked");
    if (chunk_size < 1) throw std::invalid_argument("matvec_chunked: chunk_size must be >= 1");
    std::vector<q16> out(w.rows);
    for (uint32_t r = 0; r < w.rows; ++r) {
        const int8_t* row = w.row(r);
        int64_t acc = 0;
        for (size_t start = 0; start < w.cols; start += chunk_size) {
            size_t end = std::min(start + chunk_size, size_t(w.cols));
            int64_t partial = 0;
            for (size_t j = start; j < end; ++j) {
                partial += int64_t(row[j]) * x[j].raw;
            }
            acc += partial;
        }
        out[r].raw = int64_t((int128(acc) * w.scales[r]) >> 16);
    }
    return out;
}

std::vector<q16> dense_dispatch(const QuantTensor& w, std::span<const q16> x, size_t chunk_size) {
    return chunk_size == 0 ? dense_forward(w, x) : matvec_chunked(w, x, chunk_size);
}

std::vector<q16> rmsnorm(std::span<const q16> x, std::span<const q16> gamma) {
    if (x.empty()) throw std::invalid_argument("rmsnorm: empty vector");
    if (x.size() != gamma.size()) throw std::invalid_argument("rmsnorm: gamma size mismatch");
    int128 sum = 0;
    for (const q16& v : x) sum += int128(v.raw) * v.raw;
    int64_t ms = int64_t((sum / int128(x.size())) >> 16);
    q16 r = inv_sqrt_q16(q16{ms + 1}); // +1 raw unit keeps zero vectors in-domain
    std::vector<q16> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        out[i] = q16_mul(q16_mul(x[i], r), gamma[i]);
    }
    return out;
}

void rope_apply_inplace(std::span<q16> x, uint32_t pos, const RopeTables& tables) {
    if (pos >= tables.max_ctx) throw std::out_of_range("rope_apply: position out of range");
    uint32_t half = tables.half_dim;
    if (x.size() != size_t(half) * 2) throw std::invalid_argument("rope_apply: bad vector length");
    for (uint32_t k = 0; k < half; ++k) {
        q16 c{tables.cos_at(pos, k)};
        q16 s{tables.sin_at(pos, k)};
        q16 a = x[k];
        q16 b = x[k + half];
        x[k].raw = q16_mul(a, c).raw - q16_mul(b, s).raw;
        x[k + half].raw = q16_mul(a, s).raw + q16_mul(b, c).raw;
    }
}

std::vector<q16> rope_apply(std::span<const q16> x, uint32_t pos, const RopeTables& tables) {
    std::vector<q16> out(x.begin(), x.end());
    rope_apply_inplace(out, pos, tables);
    return out;
}

std::vector<q16> softmax_q16(std::span<const q16> scores) {
    if (scores.empty()) throw std::invalid_argument("softmax_q16: empty input");
    int64_t m = scores[0].raw;
    for (const q16& s : scores) m = std::max(m, s.raw);
    std::vector<int64_t> w(scores.size());
    int64_t total = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        int64_t d = m - scores[i].raw;
        if (d > 8 * kQ16One) d = 8 * kQ16One;
        w[i] = exp_neg_lut(q16{d}).raw;
        total += w[i];
    }
    std::vector<q16> p(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
        p[i].raw = (w[i] << 16) / total;
    }
    return p;
}

LayerKv::LayerKv(uint32_t n_heads, uint32_t d_head_, uint32_t max_ctx_)
    : d_head(d_head_), max_ctx(max_ctx_), heads(n_heads) {
    for (auto& h : heads) {
        h.k.assign(size_t(max_ctx) * d_head, 0);
        h.v.assign(size_t(max_ctx) * d_head, 0);
    }
}

std::vector<q16> attention_step(std::span<const q16> q, std::span<const q16> k,
                                std::span<const q16> v, LayerKv& cache, uint32_t pos,
                                const RopeTables& tables, int threads) {
    const uint32_t n_heads = uint32_t(cache.heads.size());
    const uint32_t dh = cache.d_head;
    const size_t d_model = size_t(n_heads) * dh;
    if (q.size() != d_model || k.size() != d_model || v.size() != d_model) {
        throw std::invalid_argument("attention_step: projection length mismatch");
    }
    if (pos != cache.len) throw std::logic_error("attention_step: pos must equal cache length");
    if (pos >= cache.max_ctx) throw std::length_error("attention_step: cache overflow");

    const q16 inv_scale = inv_sqrt_q16(q16{int64_t(dh) * kQ16One});
    std::vector<q16> out(d_model);

    auto run_head = [&](uint32_t h) {
        auto& hk = cache.heads[h].k;
        auto& hv = cache.heads[h].v;
        std::vector<q16> qh(q.begin() + h * dh, q.begin() + (h + 1) * dh);
        std::vector<q16> kh(k.begin() + h * dh, k.begin() + (h + 1) * dh);
        rope_apply_inplace(qh, pos, tables);
        rope_apply_inplace(kh, pos, tables);
        for (uint32_t j = 0; j < dh; ++j) {
            hk[size_t(pos) * dh + j] = kh[j].raw;
            hv[size_t(pos) * dh + j] = v[size_t(h) * dh + j].raw;
        }
        std::vector<q16> scores(pos + 1);
        for (uint32_t t = 0; t <= pos; ++t) {
            int128 dot = 0;
            const int64_t* kt = hk.data() + size_t(t) * dh;
            for (uint32_t j = 0; j < dh; ++j) {
                dot += int128(qh[j].raw) * kt[j];
            }
            scores[t] = q16_mul(q16{int64_t(dot >> 16)}, inv_scale);
        }
        std::vector<q16> p = softmax_q16(scores);
        for (uint32_t j = 0; j < dh; ++j) {
            int64_t acc = 0;
            for (uint32_t t = 0; t <= pos; ++t) {
                acc += q16_mul(p[t], q16{hv[size_t(t) * dh + j]}).raw;
            }
            out[size_t(h) * dh + j].raw = acc;
        }
    };

    int workers = std::max(1, std::min<int>(threads, int(n_heads)));
    if (workers == 1) {
        for (uint32_t h = 0; h < n_heads; ++h) run_head(h);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (uint32_t h = uint32_t(w); h < n_heads; h += uint32_t(workers)) run_head(h);
            });
        }
        for (auto& t : pool) t.join();
    }
    cache.len = pos + 1;
    return out;
}

std::vector<q16> ffn_silu(std::span<const q16> x, const QuantTensor& w_gate,
                          const QuantTensor& w_up, const QuantTensor& w_down,
                          size_t chunk_size) {
    std::vector<q16> gate = dense_dispatch(w_gate, x, chunk_size);
    std::vector<q16> up = dense_dispatch(w_up, x, chunk_size);
    if (gate.size() != up.size()) throw std::invalid_argument("ffn_silu: gate/up mismatch");
    std::vector<q16> h(gate.size());
    for (size_t i = 0; i < h.size(); ++i) {
        h[i] = q16_mul(silu_q16(gate[i]), up[i]);
    }
    return dense_dispatch(w_down, h, chunk_size);
}

std::vector<q16> residual_add_clamp(std::span<const q16> a, std::span<const q16> b) {
    if (a.size() != b.size()) throw std::invalid_argument("residual_add_clamp: length mismatch");
    std::vector<q16> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        int64_t s = a[i].raw + b[i].raw;
        out[i].raw = std::clamp(s, -kActClampRaw, kActClampRaw);
    }
    return out;
}

} // namespace dim
