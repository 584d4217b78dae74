// SPDX-License-Identifier: Apache-2.0
#include "dim/floatref.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dim {

namespace {

std::vector<float> dequant(const QuantTensor& t) {
    std::vector<float> out(t.data.size());
    for (uint32_t r = 0; r < t.rows; ++r) {
        double s_real = double(t.scales[r]) * 0x1.0p-16;
        for (uint32_t c = 0; c < t.cols; ++c) {
            out[size_t(r) * t.cols + c] = float(double(t.at(r, c)) * s_real);
        }
    }
    return out;
}

std::vector<float> dequant_norm(const std::vector<q16>& v) {
    std::vector<float> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = float(double(v[i].raw) * 0x1.0p-16);
    return out;
}

constexpr float kClampF = 256.0f;
constexpr float kNormEpsF = float(0x1.0p-16);

// Mirrors the integer engine's structure with f32 arithmetic; every
// reduction goes through fsum_lanes so the tree is the only variable.
class FloatSession {
  public:
    FloatSession(const FloatModel& m, LaneConfig cfg) : m_(m), cfg_(cfg) {
        const auto& c = m.config;
        kcache_.resize(c.n_layers);
        vcache_.resize(c.n_layers);
        for (auto& l : kcache_) l.assign(size_t(c.max_ctx) * c.d_model, 0.0f);
        for (auto& l : vcache_) l.assign(size_t(c.max_ctx) * c.d_model, 0.0f);
    }

    std::vector<float> forward(uint32_t token, uint32_t pos, std::vector<std::vector<float>>* snaps) {
        const auto& c = m_.config;
        if (token >= c.vocab) throw std::out_of_range("float forward: token out of range");
        if (pos >= c.max_ctx) throw ContextOverflow("float forward: context overflow");
        if (pos != len_) throw std::logic_error("float forward: pos must equal cache length");
        if (snaps) snaps->clear();

        std::vector<float> x(m_.tok_embd.begin() + size_t(token) * c.d_model,
                             m_.tok_embd.begin() + size_t(token + 1) * c.d_model);
        for (uint32_t l = 0; l < c.n_layers; ++l) {
            const auto& lw = m_.layers[l];
            std::vector<float> xn = rmsnorm_f(x, lw.attn_norm);
            std::vector<float> qp = dense_f(lw.wq, c.d_model, xn);
            std::vector<float> kp = dense_f(lw.wk, c.d_model, xn);
            std::vector<float> vp = dense_f(lw.wv, c.d_model, xn);
            std::vector<float> att = attention_f(l, qp, kp, vp, pos);
            std::vector<float> proj = dense_f(lw.wo, c.d_model, att);
            residual_clamp(x, proj);
            std::vector<float> xf = rmsnorm_f(x, lw.ffn_norm);
            std::vector<float> f = ffn_f(lw, xf);
            residual_clamp(x, f);
            if (snaps) snaps->push_back(x);
        }
        ++len_;
        std::vector<float> xo = rmsnorm_f(x, m_.final_norm);
        return dense_f(m_.output, uint32_t(c.vocab), xo);
    }

    uint32_t len() const { return len_; }

  private:
    const FloatModel& m_;
    LaneConfig cfg_;
    std::vector<std::vector<float>> kcache_, vcache_; // per layer: max_ctx * d_model
    uint32_t len_ = 0;

    std::vector<float> dense_f(const std::vector<float>& w, uint32_t rows,
                               std::span<const float> x) {
        uint32_t cols = uint32_t(x.size());
        std::vector<float> out(rows);
        std::vector<float> prod(cols);
        for (uint32_t r = 0; r < rows; ++r) {
            const float* row = w.data() + size_t(r) * cols;
            for (uint32_t j = 0; j < cols; ++j) prod[j] = row[j] * x[j];
            out[r] = fsum_lanes(prod, cfg_);
        }
        return out;
    }

    std::vector<float> rmsnorm_f(std::span<const float> x, const std::vector<float>& gamma) {
        std::vector<float> sq(x.size());
        for (size_t i = 0; i < x.size(); ++i) sq[i] = x[i] * x[i];
        float ms = fsum_lanes(sq, cfg_) / float(x.size());
        float r = 1.0f / std::sqrt(ms + kNormEpsF);
        std::vector<float> out(x.size());
        for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] * r) * gamma[i];
        return out;
    }

    void rope_f(std::span<float> x, uint32_t pos) {
        uint32_t half = m_.config.d_head() / 2;
        for (uint32_t k = 0; k < half; ++k) {
            float c = m_.rope_cos[size_t(pos) * half + k];
            float s = m_.rope_sin[size_t(pos) * half + k];
            float a = x[k];
            float b = x[k + half];
            x[k] = a * c - b * s;
            x[k + half] = a * s + b * c;
        }
    }

    std::vector<float> softmax_f(std::span<const float> scores) {
        float m = scores[0];
        for (float s : scores) m = std::max(m, s);
        std::vector<float> e(scores.size());
        for (size_t i = 0; i < scores.size(); ++i) e[i] = std::exp(scores[i] - m);
        float total = fsum_lanes(e, cfg_);
        for (auto& v : e) v /= total;
        return e;
    }

    std::vector<float> attention_f(uint32_t layer, std::vector<float>& qp, std::vector<float>& kp,
                                   const std::vector<float>& vp, uint32_t pos) {
        const auto& c = m_.config;
        uint32_t dh = c.d_head();
        float inv_scale = 1.0f / std::sqrt(float(dh));
        std::vector<float> out(c.d_model);
        std::vector<float> prod(dh);
        for (uint32_t h = 0; h < c.n_heads; ++h) {
            std::span<float> qh(qp.data() + size_t(h) * dh, dh);
            std::span<float> kh(kp.data() + size_t(h) * dh, dh);
            rope_f(qh, pos);
            rope_f(kh, pos);
            float* kc = kcache_[layer].data() + size_t(h) * dh * c.max_ctx;
            float* vc = vcache_[layer].data() + size_t(h) * dh * c.max_ctx;
            for (uint32_t j = 0; j < dh; ++j) {
                kc[size_t(pos) * dh + j] = kh[j];
                vc[size_t(pos) * dh + j] = vp[size_t(h) * dh + j];
            }
            std::vector<float> scores(pos + 1);
            for (uint32_t t = 0; t <= pos; ++t) {
                for (uint32_t j = 0; j < dh; ++j) prod[j] = qh[j] * kc[size_t(t) * dh + j];
                scores[t] = fsum_lanes(prod, cfg_) * inv_scale;
            }
            std::vector<float> p = softmax_f(scores);
            std::vector<float> terms(pos + 1);
            for (uint32_t j = 0; j < dh; ++j) {
                for (uint32_t t = 0; t <= pos; ++t) terms[t] = p[t] * vc[size_t(t) * dh + j];
                out[size_t(h) * dh + j] = fsum_lanes(terms, cfg_);
            }
        }
        return out;
    }

    std::vector<float> ffn_f(const FloatModel::Layer& lw, std::span<const float> x) {
        const auto& c = m_.config;
        std::vector<float> gate = dense_f(lw.w_gate, c.d_ffn, x);
        std::vector<float> up = dense_f(lw.w_up, c.d_ffn, x);
        std::vector<float> h(gate.size());
        for (size_t i = 0; i < h.size(); ++i) {
            float sig = 1.0f / (1.0f + std::exp(-gate[i]));
            h[i] = (gate[i] * sig) * up[i];
        }
        return dense_f(lw.w_down, c.d_model, h);
    }

    static void residual_clamp(std::vector<float>& x, const std::vector<float>& d) {
        for (size_t i = 0; i < x.size(); ++i) {
            float s = x[i] + d[i];
            x[i] = std::min(std::max(s, -kClampF), kClampF);
        }
    }
};

uint32_t argmax_f(std::span<const float> v) {
    uint32_t best = 0;
    for (uint32_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

float top2_gap_f(std::span<const float> v, uint32_t best) {
    float second = -std::numeric_limits<float>::infinity();
    for (uint32_t i = 0; i < v.size(); ++i) {
        if (i != best && v[i] > second) second = v[i];
    }
    return v[best] - second;
}

void validate_lanes(LaneConfig cfg) {
    if (cfg.lanes != 1 && cfg.lanes != 2 && cfg.lanes != 4 && cfg.lanes != 8) {
        throw std::invalid_argument("fsum_lanes: lanes must be 1, 2, 4, or 8");
    }
}

} // namespace

float fsum_lanes(std::span<const float> values, LaneConfig cfg) {
    validate_lanes(cfg);
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int lanes = cfg.lanes;
    for (size_t i = 0; i < values.size(); ++i) {
        acc[i % size_t(lanes)] += values[i];
    }
    for (int width = lanes; width > 1; width /= 2) {
        for (int k = 0; k < width / 2; ++k) {
            acc[k] = acc[2 * k] + acc[2 * k + 1];
        }
    }
    return acc[0];
}

FloatModel FloatModel::from(const ModelFile& m) {
    FloatModel f;
    f.config = m.config;
    f.tok_embd = dequant(m.tok_embd);
    f.layers.resize(m.layers.size());
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const auto& s = m.layers[i];
        auto& d = f.layers[i];
        d.attn_norm = dequant_norm(s.attn_norm);
        d.wq = dequant(s.wq);
        d.wk = dequant(s.wk);
        d.wv = dequant(s.wv);
        d.wo = dequant(s.wo);
        d.ffn_norm = dequant_norm(s.ffn_norm);
        d.w_gate = dequant(s.w_gate);
        d.w_up = dequant(s.w_up);
        d.w_down = dequant(s.w_down);
    }
    f.final_norm = dequant_norm(m.final_norm);
    f.output = dequant(m.output);
    uint32_t half = m.config.d_head() / 2;
    f.rope_cos.resize(size_t(m.config.max_ctx) * half);
    f.rope_sin.resize(size_t(m.config.max_ctx) * half);
    for (uint32_t k = 0; k < half; ++k) {
        double freq = std::pow(m.config.rope_theta, -2.0 * double(k) / double(m.config.d_head()));
        for (uint32_t pos = 0; pos < m.config.max_ctx; ++pos) {
            double angle = double(pos) * freq;
            f.rope_cos[size_t(pos) * half + k] = float(std::cos(angle));
            f.rope_sin[size_t(pos) * half + k] = float(std::sin(angle));
        }
    }
    return f;
}

FloatGenResult float_generate(const FloatModel& m, std::span<const uint32_t> prompt,
                              size_t max_new, LaneConfig cfg, bool keep_snapshots) {
    if (prompt.empty()) throw std::invalid_argument("float_generate: empty prompt");
    if (prompt.size() + max_new > m.config.max_ctx) {
        throw ContextOverflow("float_generate: prompt plus continuation exceeds max_ctx");
    }
    FloatSession session(m, cfg);
    std::vector<float> logits;
    uint32_t pos = 0;
    FloatGenResult res;
    for (uint32_t id : prompt) {
        logits = session.forward(id, pos++, keep_snapshots ? &res.layer_snapshots : nullptr);
    }
    while (res.token_ids.size() < max_new) {
        uint32_t next = argmax_f(logits);
        res.token_ids.push_back(next);
        res.top2_gap.push_back(top2_gap_f(logits, next));
        if (res.token_ids.size() == max_new) break;
        logits = session.forward(next, pos++, keep_snapshots ? &res.layer_snapshots : nullptr);
    }
    return res;
}

std::optional<size_t> first_divergence(const FloatModel& m, std::span<const uint32_t> prompt,
                                       LaneConfig a, LaneConfig b, size_t horizon) {
    if (prompt.empty()) throw std::invalid_argument("first_divergence: empty prompt");
    if (prompt.size() + horizon > m.config.max_ctx) {
        throw ContextOverflow("first_divergence: horizon exceeds max_ctx");
    }
    FloatSession sa(m, a), sb(m, b);
    std::vector<float> la, lb;
    uint32_t pos = 0;
    for (uint32_t id : prompt) {
        la = sa.forward(id, pos, nullptr);
        lb = sb.forward(id, pos, nullptr);
        ++pos;
    }
    for (size_t step = 0; step < horizon; ++step) {
        uint32_t ta = argmax_f(la);
        uint32_t tb = argmax_f(lb);
        if (ta != tb) return step;
        if (step + 1 == horizon) break;
        la = sa.forward(ta, pos, nullptr);
        lb = sb.forward(tb, pos, nullptr);
        ++pos;
    }
    return std::nullopt;
}

std::optional<size_t> first_divergence_int(const ModelFile& m, std::span<const uint32_t> prompt,
                                           EngineOptions a, EngineOptions b, size_t horizon) {
    if (prompt.empty()) throw std::invalid_argument("first_divergence_int: empty prompt");
    if (prompt.size() + horizon > m.config.max_ctx) {
        throw ContextOverflow("first_divergence_int: horizon exceeds max_ctx");
    }
    InferenceSession sa(m, a), sb(m, b);
    std::vector<q16> la, lb;
    uint32_t pos = 0;
    for (uint32_t id : prompt) {
        la = sa.forward(id, pos);
        lb = sb.forward(id, pos);
        ++pos;
    }
    for (size_t step = 0; step < horizon; ++step) {
        uint32_t ta = select_greedy(la);
        uint32_t tb = select_greedy(lb);
        if (ta != tb) return step;
        if (step + 1 == horizon) break;
        la = sa.forward(ta, pos);
        lb = sb.forward(tb, pos);
        ++pos;
    }
    return std::nullopt;
}

std::vector<double> measure_layer_divergence(const FloatModel& m,
                                             std::span<const uint32_t> input, LaneConfig a,
                                             LaneConfig b) {
    if (input.empty()) throw std::invalid_argument("measure_layer_divergence: empty input");
    FloatSession sa(m, a), sb(m, b);
    std::vector<std::vector<float>> snap_a, snap_b;
    uint32_t pos = 0;
    for (uint32_t id : input) {
        sa.forward(id, pos, &snap_a);
        sb.forward(id, pos, &snap_b);
        ++pos;
    }
    std::vector<double> l2(snap_a.size());
    for (size_t l = 0; l < snap_a.size(); ++l) {
        double sum = 0.0;
        for (size_t i = 0; i < snap_a[l].size(); ++i) {
            double d = double(snap_a[l][i]) - double(snap_b[l][i]);
            sum += d * d;
        }
        l2[l] = std::sqrt(sum);
    }
    return l2;
}

} // namespace dim
