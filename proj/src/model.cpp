// SPDX-License-Identifier: Apache-2.0
#include "dim/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dim/chacha20.hpp"
#include "wire.hpp"

namespace dim {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'M', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kKindInt8Quant = 0;
constexpr uint8_t kKindQ16Dense = 1;

struct TensorRef {
    std::string name;
    uint32_t rows;
    uint32_t cols;
    uint8_t kind;
    const QuantTensor* quant = nullptr; // kind 0
    const std::vector<q16>* dense = nullptr; // kind 1
};

struct TensorSlot {
    std::string name;
    uint32_t rows;
    uint32_t cols;
    uint8_t kind;
    QuantTensor* quant = nullptr;
    std::vector<q16>* dense = nullptr;
};

// Fixed directory order; serialization is canonical because this walk is.
template <typename Model, typename Slot>
std::vector<Slot> directory(Model& m) {
    const auto& c = m.config;
    std::vector<Slot> d;
    d.push_back({"tok_embd", c.vocab, c.d_model, kKindInt8Quant, &m.tok_embd, nullptr});
    for (uint32_t i = 0; i < c.n_layers; ++i) {
        auto& l = m.layers[i];
        std::string p = "layers." + std::to_string(i) + ".";
        d.push_back({p + "attn_norm", 1, c.d_model, kKindQ16Dense, nullptr, &l.attn_norm});
        d.push_back({p + "wq", c.d_model, c.d_model, kKindInt8Quant, &l.wq, nullptr});
        d.push_back({p + "wk", c.d_model, c.d_model, kKindInt8Quant, &l.wk, nullptr});
        d.push_back({p + "wv", c.d_model, c.d_model, kKindInt8Quant, &l.wv, nullptr});
        d.push_back({p + "wo", c.d_model, c.d_model, kKindInt8Quant, &l.wo, nullptr});
        d.push_back({p + "ffn_norm", 1, c.d_model, kKindQ16Dense, nullptr, &l.ffn_norm});
        d.push_back({p + "w_gate", c.d_ffn, c.d_model, kKindInt8Quant, &l.w_gate, nullptr});
        d.push_back({p + "w_up", c.d_ffn, c.d_model, kKindInt8Quant, &l.w_up, nullptr});
        d.push_back({p + "w_down", c.d_model, c.d_ffn, kKindInt8Quant, &l.w_down, nullptr});
    }
    d.push_back({"final_norm", 1, c.d_model, kKindQ16Dense, nullptr, &m.final_norm});
    d.push_back({"output", c.vocab, c.d_model, kKindInt8Quant, &m.output, nullptr});
    return d;
}

uint32_t isqrt_u32(uint32_t v) {
    uint32_t r = uint32_t(std::sqrt(double(v)));
    while (uint64_t(r + 1) * (r + 1) <= v) ++r;
    while (uint64_t(r) * r > v) --r;
    return r;
}

void fill_toy_tensor(QuantTensor& t, uint32_t rows, uint32_t cols, ChaCha20Rng& rng) {
    t.rows = rows;
    t.cols = cols;
    t.data.resize(size_t(rows) * cols);
    for (auto& v : t.data) v = rng.next_weight_i8();
    int64_t s = q16_from_ratio(1, 127ll * isqrt_u32(cols)).raw;
    t.scales.assign(rows, s);
}

void check_quant_invariants(const QuantTensor& t, const std::string& name) {
    if (t.data.size() != size_t(t.rows) * t.cols || t.scales.size() != t.rows) {
        throw ParseError(ParseError::Kind::invariant, name + ": inconsistent tensor sizes");
    }
    for (int8_t v : t.data) {
        if (v == -128) {
            throw ParseError(ParseError::Kind::invariant, name + ": weight value -128");
        }
    }
    for (int64_t s : t.scales) {
        if (s <= 0) throw ParseError(ParseError::Kind::invariant, name + ": non-positive scale");
    }
}

} // namespace

void ModelConfig::validate() const {
    if (n_layers < 1) throw std::invalid_argument("config: n_layers must be >= 1");
    if (n_heads < 1) throw std::invalid_argument("config: n_heads must be >= 1");
    if (d_model == 0 || d_model % n_heads != 0) {
        throw std::invalid_argument("config: d_model must be a positive multiple of n_heads");
    }
    if (d_model > 8192) throw std::invalid_argument("config: d_model exceeds 8192");
    if (d_head() % 2 != 0) throw std::invalid_argument("config: d_head must be even");
    if (d_ffn < 1) throw std::invalid_argument("config: d_ffn must be >= 1");
    if (vocab < 2) throw std::invalid_argument("config: vocab must be >= 2");
    if (max_ctx < 1) throw std::invalid_argument("config: max_ctx must be >= 1");
    if (!(rope_theta > 0.0) || !std::isfinite(rope_theta)) {
        throw std::invalid_argument("config: rope_theta must be positive and finite");
    }
}

RowQuant quantize_row(std::span<const double> row) {
    if (row.empty()) throw std::invalid_argument("quantize_row: empty row");
    double max_abs = 0.0;
    for (double v : row) max_abs = std::max(max_abs, std::fabs(v));
    RowQuant out;
    out.values.resize(row.size());
    if (max_abs == 0.0) {
        out.scale = q16{kQ16One};
        return out;
    }
    out.scale = q16{int64_t(std::llround(max_abs * 65536.0 / 127.0))};
    double s_real = max_abs / 127.0;
    for (size_t i = 0; i < row.size(); ++i) {
        long long q = std::llround(row[i] / s_real);
        if (q > 127) q = 127;
        if (q < -127) q = -127;
        out.values[i] = int8_t(q);
    }
    return out;
}

namespace {

double gauss_draw(ChaCha20Rng& rng) {
    double u1 = rng.next_unit();
    double u2 = rng.next_unit();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

QuantTensor gauss_tensor(uint32_t rows, uint32_t cols, double gain, ChaCha20Rng& rng) {
    QuantTensor t;
    t.rows = rows;
    t.cols = cols;
    t.data.reserve(size_t(rows) * cols);
    t.scales.reserve(rows);
    double sd = gain / std::sqrt(double(cols));
    std::vector<double> row(cols);
    for (uint32_t r = 0; r < rows; ++r) {
        for (auto& v : row) v = gauss_draw(rng) * sd;
        RowQuant q = quantize_row(row);
        t.scales.push_back(q.scale.raw);
        t.data.insert(t.data.end(), q.values.begin(), q.values.end());
    }
    return t;
}

} // namespace

ModelFile gen_lab_model(uint64_t seed, const ModelConfig& config, double attn_gain,
                        double body_gain) {
    config.validate();
    if (!(attn_gain > 0.0) || !(body_gain > 0.0)) {
        throw std::invalid_argument("gen_lab_model: gains must be positive");
    }
    ModelFile m;
    m.config = config;
    m.layers.resize(config.n_layers);
    ChaCha20Rng rng(seed ^ 0x5A17u);
    m.tok_embd = gauss_tensor(config.vocab, config.d_model, 1.0, rng);
    for (auto& l : m.layers) {
        l.attn_norm.assign(config.d_model, q16{kQ16One});
        l.wq = gauss_tensor(config.d_model, config.d_model, attn_gain, rng);
        l.wk = gauss_tensor(config.d_model, config.d_model, attn_gain, rng);
        l.wv = gauss_tensor(config.d_model, config.d_model, body_gain, rng);
        l.wo = gauss_tensor(config.d_model, config.d_model, body_gain, rng);
        l.ffn_norm.assign(config.d_model, q16{kQ16One});
        l.w_gate = gauss_tensor(config.d_ffn, config.d_model, body_gain, rng);
        l.w_up = gauss_tensor(config.d_ffn, config.d_model, body_gain, rng);
        l.w_down = gauss_tensor(config.d_model, config.d_ffn, body_gain, rng);
    }
    m.final_norm.assign(config.d_model, q16{kQ16One});
    m.output = gauss_tensor(config.vocab, config.d_model, 1.0, rng);
    m.bytes = serialize(m);
    m.weight_hash = blake3(m.bytes);
    return m;
}

ModelFile gen_toy_model(uint64_t seed, const ModelConfig& config) {
    config.validate();
    ModelFile m;
    m.config = config;
    m.layers.resize(config.n_layers);
    ChaCha20Rng rng(seed);

    // Tensors are filled in directory order so the stream layout is pinned.
    fill_toy_tensor(m.tok_embd, config.vocab, config.d_model, rng);
    for (auto& l : m.layers) {
        l.attn_norm.assign(config.d_model, q16{kQ16One});
        fill_toy_tensor(l.wq, config.d_model, config.d_model, rng);
        fill_toy_tensor(l.wk, config.d_model, config.d_model, rng);
        fill_toy_tensor(l.wv, config.d_model, config.d_model, rng);
        fill_toy_tensor(l.wo, config.d_model, config.d_model, rng);
        l.ffn_norm.assign(config.d_model, q16{kQ16One});
        fill_toy_tensor(l.w_gate, config.d_ffn, config.d_model, rng);
        fill_toy_tensor(l.w_up, config.d_ffn, config.d_model, rng);
        fill_toy_tensor(l.w_down, config.d_model, config.d_ffn, rng);
    }
    m.final_norm.assign(config.d_model, q16{kQ16One});
    fill_toy_tensor(m.output, config.vocab, config.d_model, rng);

    m.bytes = serialize(m);
    m.weight_hash = blake3(m.bytes);
    return m;
}

std::vector<uint8_t> serialize(const ModelFile& m) {
    m.config.validate();
    ByteWriter w;
    w.str(std::string(kMagic, 4));
    w.u32(kVersion);
    w.u32(m.config.n_layers);
    w.u32(m.config.d_model);
    w.u32(m.config.n_heads);
    w.u32(m.config.d_ffn);
    w.u32(m.config.vocab);
    w.u32(m.config.max_ctx);
    w.f64(m.config.rope_theta);

    auto dir = directory<const ModelFile, TensorRef>(m);
    w.u32(uint32_t(dir.size()));
    for (const auto& t : dir) {
        w.u16(uint16_t(t.name.size()));
        w.str(t.name);
        w.u32(t.rows);
        w.u32(t.cols);
        w.u8(t.kind);
    }
    for (const auto& t : dir) {
        if (t.kind == kKindInt8Quant) {
            for (int64_t s : t.quant->scales) w.i64(s);
            w.bytes(std::span<const uint8_t>(
                reinterpret_cast<const uint8_t*>(t.quant->data.data()), t.quant->data.size()));
        } else {
            for (const q16& v : *t.dense) w.i64(v.raw);
        }
    }
    return std::move(w.out);
}

ModelFile deserialize(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.str(4) != std::string(kMagic, 4)) {
        throw ParseError(ParseError::Kind::bad_magic, "model: bad magic");
    }
    if (r.u32() != kVersion) {
        throw ParseError(ParseError::Kind::bad_version, "model: unsupported version");
    }
    ModelFile m;
    m.config.n_layers = r.u32();
    m.config.d_model = r.u32();
    m.config.n_heads = r.u32();
    m.config.d_ffn = r.u32();
    m.config.vocab = r.u32();
    m.config.max_ctx = r.u32();
    m.config.rope_theta = r.f64();
    try {
        m.config.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(ParseError::Kind::invariant, e.what());
    }
    m.layers.resize(m.config.n_layers);

    auto dir = directory<ModelFile, TensorSlot>(m);
    uint32_t count = r.u32();
    if (count != dir.size()) {
        throw ParseError(ParseError::Kind::invariant, "model: unexpected tensor count");
    }
    for (const auto& slot : dir) {
        uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        uint32_t rows = r.u32();
        uint32_t cols = r.u32();
        uint8_t kind = r.u8();
        if (name != slot.name || rows != slot.rows || cols != slot.cols || kind != slot.kind) {
            throw ParseError(ParseError::Kind::invariant,
                             "model: directory entry mismatch at " + slot.name);
        }
    }
    for (auto& slot : dir) {
        if (slot.kind == kKindInt8Quant) {
            QuantTensor& t = *slot.quant;
            t.rows = slot.rows;
            t.cols = slot.cols;
            t.scales.resize(slot.rows);
            for (auto& s : t.scales) s = r.i64();
            auto raw = r.raw(size_t(slot.rows) * slot.cols);
            t.data.resize(raw.size());
            std::memcpy(t.data.data(), raw.data(), raw.size());
            check_quant_invariants(t, slot.name);
        } else {
            slot.dense->resize(slot.cols);
            for (auto& v : *slot.dense) v = q16{r.i64()};
        }
    }
    if (!r.done()) {
        throw ParseError(ParseError::Kind::invariant, "model: trailing bytes");
    }
    m.bytes.assign(bytes.begin(), bytes.end());
    m.weight_hash = blake3(m.bytes);
    return m;
}

Digest weight_hash(std::span<const uint8_t> model_bytes) {
    return blake3(model_bytes);
}

void save_model(const ModelFile& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("model: cannot open " + path);
    f.write(reinterpret_cast<const char*>(m.bytes.data()), std::streamsize(m.bytes.size()));
    if (!f) throw std::runtime_error("model: write failed: " + path);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
}

ModelFile load_model(const std::string& path) {
    return deserialize(read_file_bytes(path));
}

} // namespace dim
