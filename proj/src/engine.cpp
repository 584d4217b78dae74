// SPDX-License-Identifier: Apache-2.0
#include "dim/engine.hpp"

#include <stdexcept>

namespace dim {

namespace {

std::vector<q16> embed_token(const ModelFile& m, uint32_t token) {
    const QuantTensor& e = m.tok_embd;
    std::vector<q16> x(e.cols);
    const int8_t* row = e.row(token);
    int64_t s = e.scales[token];
    for (uint32_t j = 0; j < e.cols; ++j) {
        x[j].raw = int64_t(row[j]) * s;
    }
    return x;
}

void check_generate_pre(const ModelFile& model, std::span<const uint32_t> prompt, size_t max_new) {
    if (prompt.empty()) throw std::invalid_argument("generate: empty prompt");
    if (prompt.size() + max_new > model.config.max_ctx) {
        throw ContextOverflow("generate: prompt plus continuation exceeds max_ctx");
    }
    for (uint32_t id : prompt) {
        if (id >= model.config.vocab) throw std::out_of_range("generate: prompt token out of range");
    }
}

template <typename SelectFn>
GenerationResult run_generation(const ModelFile& model, std::span<const uint32_t> prompt,
                                size_t max_new, EngineOptions opts,
                                const RopeTables* imported_tables, SelectFn&& select) {
    generation_counter().fetch_add(1, std::memory_order_relaxed);
    check_generate_pre(model, prompt, max_new);
    InferenceSession session(model, opts, imported_tables);
    std::vector<q16> logits;
    uint32_t pos = 0;
    for (uint32_t id : prompt) {
        logits = session.forward(id, pos++);
    }
    GenerationResult res;
    res.token_ids.reserve(max_new);
    while (res.token_ids.size() < max_new) {
        uint32_t next = select(logits);
        res.token_ids.push_back(next);
        if (opts.keep_logits) res.logits.push_back(logits);
        if (res.token_ids.size() == max_new) break;
        logits = session.forward(next, pos++);
    }
    res.output_hash = hash_token_ids(res.token_ids);
    return res;
}

} // namespace

InferenceSession::InferenceSession(const ModelFile& model, EngineOptions opts,
                                   const RopeTables* imported_tables)
    : model_(model), opts_(opts) {
    model.config.validate();
    if (imported_tables != nullptr) {
        if (imported_tables->half_dim != model.config.d_head() / 2 ||
            imported_tables->max_ctx < model.config.max_ctx) {
            throw std::invalid_argument("session: imported tables do not fit the model");
        }
        tables_ = *imported_tables;
    } else {
        tables_ = build_rope_tables(model.config.rope_theta, model.config.d_head(),
                                    model.config.max_ctx);
    }
    cache_.max_ctx = model.config.max_ctx;
    cache_.layers.reserve(model.config.n_layers);
    for (uint32_t i = 0; i < model.config.n_layers; ++i) {
        cache_.layers.emplace_back(model.config.n_heads, model.config.d_head(),
                                   model.config.max_ctx);
    }
}

std::vector<q16> InferenceSession::forward(uint32_t token, uint32_t pos) {
    if (token >= model_.config.vocab) throw std::out_of_range("forward: token out of range");
    if (pos >= model_.config.max_ctx) throw ContextOverflow("forward: context overflow");
    if (pos != cache_.len()) throw std::logic_error("forward: pos must equal cache length");

    std::vector<q16> x = embed_token(model_, token);
    for (uint32_t l = 0; l < model_.config.n_layers; ++l) {
        const LayerWeights& lw = model_.layers[l];
        std::vector<q16> xn = rmsnorm(x, lw.attn_norm);
        std::vector<q16> qp = dense_dispatch(lw.wq, xn, opts_.chunk);
        std::vector<q16> kp = dense_dispatch(lw.wk, xn, opts_.chunk);
        std::vector<q16> vp = dense_dispatch(lw.wv, xn, opts_.chunk);
        std::vector<q16> att =
            attention_step(qp, kp, vp, cache_.layers[l], pos, tables_, opts_.threads);
        std::vector<q16> proj = dense_dispatch(lw.wo, att, opts_.chunk);
        x = residual_add_clamp(x, proj);
        std::vector<q16> xf = rmsnorm(x, lw.ffn_norm);
        std::vector<q16> f = ffn_silu(xf, lw.w_gate, lw.w_up, lw.w_down, opts_.chunk);
        x = residual_add_clamp(x, f);
    }
    std::vector<q16> xo = rmsnorm(x, model_.final_norm);
    return dense_dispatch(model_.output, xo, opts_.chunk);
}

Digest hash_token_ids(std::span<const uint32_t> ids) {
    Blake3 h;
    for (uint32_t id : ids) {
        uint8_t le[4] = {uint8_t(id), uint8_t(id >> 8), uint8_t(id >> 16), uint8_t(id >> 24)};
        h.update(le, sizeof(le));
    }
    return h.finalize();
}

uint32_t select_greedy(std::span<const q16> logits) {
    if (logits.empty()) throw std::invalid_argument("select_greedy: empty logits");
    uint32_t best = 0;
    for (uint32_t i = 1; i < logits.size(); ++i) {
        if (logits[i].raw > logits[best].raw) best = i;
    }
    return best;
}

uint32_t sample_from_logits(std::span<const q16> logits, q16 temperature, ChaCha20Rng& rng) {
    if (temperature.raw <= 0) throw std::invalid_argument("sample: temperature must be positive");
    if (logits.empty()) throw std::invalid_argument("sample: empty logits");
    std::vector<q16> scaled(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        scaled[i].raw = int64_t((int128(logits[i].raw) << 16) / temperature.raw);
    }
    std::vector<q16> p = softmax_q16(scaled);
    int64_t total = 0;
    for (const q16& v : p) total += v.raw;
    uint64_t draw = rng.next_u32();
    int64_t threshold = int64_t((draw * uint64_t(total)) >> 32);
    int64_t cum = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        cum += p[i].raw;
        if (cum > threshold) return uint32_t(i);
    }
    return uint32_t(p.size() - 1); // unreachable: cum == total > threshold
}

GenerationResult generate_greedy(const ModelFile& model, std::span<const uint32_t> prompt,
                                 size_t max_new, EngineOptions opts,
                                 const RopeTables* imported_tables) {
    return run_generation(model, prompt, max_new, opts, imported_tables,
                          [](std::span<const q16> logits) { return select_greedy(logits); });
}

GenerationResult generate_sampled(const ModelFile& model, std::span<const uint32_t> prompt,
                                  size_t max_new, q16 temperature, EngineOptions opts) {
    if (temperature.raw <= 0) throw std::invalid_argument("sample: temperature must be positive");
    Blake3 h;
    h.update(model.bytes.data(), model.bytes.size());
    for (uint32_t id : prompt) {
        uint8_t le[4] = {uint8_t(id), uint8_t(id >> 8), uint8_t(id >> 16), uint8_t(id >> 24)};
        h.update(le, sizeof(le));
    }
    ChaCha20Rng rng(h.finalize());
    return run_generation(model, prompt, max_new, opts, nullptr,
                          [&](std::span<const q16> logits) {
                              return sample_from_logits(logits, temperature, rng);
                          });
}

std::atomic<uint64_t>& generation_counter() {
    static std::atomic<uint64_t> counter{0};
    return counter;
}

} // namespace dim
