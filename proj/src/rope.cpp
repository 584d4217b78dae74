// SPDX-License-Identifier: Apache-2.0
#include "dim/rope.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "wire.hpp"

namespace dim {

namespace {
constexpr char kMagic[4] = {'R', 'T', 'A', 'B'};
constexpr uint32_t kVersion = 1;
} // namespace

RopeTables build_rope_tables(double theta_base, uint32_t d_head, uint32_t max_ctx) {
    if (d_head == 0 || d_head % 2 != 0) throw std::invalid_argument("rope: d_head must be even");
    if (max_ctx == 0) throw std::invalid_argument("rope: max_ctx must be >= 1");
    if (!(theta_base > 0.0) || !std::isfinite(theta_base)) {
        throw std::invalid_argument("rope: theta_base must be positive and finite");
    }
    RopeTables t;
    t.max_ctx = max_ctx;
    t.half_dim = d_head / 2;
    t.theta_base = theta_base;
    t.cos_raw.resize(size_t(max_ctx) * t.half_dim);
    t.sin_raw.resize(size_t(max_ctx) * t.half_dim);
    for (uint32_t k = 0; k < t.half_dim; ++k) {
        double freq = std::pow(theta_base, -2.0 * double(k) / double(d_head));
        for (uint32_t pos = 0; pos < max_ctx; ++pos) {
            double angle = double(pos) * freq;
            size_t idx = size_t(pos) * t.half_dim + k;
            t.cos_raw[idx] = q16_from_real(std::cos(angle)).raw;
            t.sin_raw[idx] = q16_from_real(std::sin(angle)).raw;
        }
    }
    return t;
}

std::vector<uint8_t> serialize_rope_tables(const RopeTables& t) {
    ByteWriter w;
    w.str(std::string(kMagic, 4));
    w.u32(kVersion);
    w.u32(t.max_ctx);
    w.u32(t.half_dim);
    w.f64(t.theta_base);
    for (int64_t v : t.cos_raw) w.i64(v);
    for (int64_t v : t.sin_raw) w.i64(v);
    return std::move(w.out);
}

RopeTables deserialize_rope_tables(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.str(4) != std::string(kMagic, 4)) {
        throw ParseError(ParseError::Kind::bad_magic, "rope tables: bad magic");
    }
    uint32_t version = r.u32();
    if (version != kVersion) {
        throw ParseError(ParseError::Kind::bad_version, "rope tables: unsupported version");
    }
    RopeTables t;
    t.max_ctx = r.u32();
    t.half_dim = r.u32();
    t.theta_base = r.f64();
    if (t.max_ctx == 0 || t.half_dim == 0) {
        throw ParseError(ParseError::Kind::invariant, "rope tables: empty dimensions");
    }
    size_t n = size_t(t.max_ctx) * t.half_dim;
    t.cos_raw.resize(n);
    t.sin_raw.resize(n);
    for (size_t i = 0; i < n; ++i) t.cos_raw[i] = r.i64();
    for (size_t i = 0; i < n; ++i) t.sin_raw[i] = r.i64();
    if (!r.done()) {
        throw ParseError(ParseError::Kind::invariant, "rope tables: trailing bytes");
    }
    return t;
}

void save_rope_tables(const RopeTables& t, const std::string& path) {
    auto bytes = serialize_rope_tables(t);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("rope tables: cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("rope tables: write failed: " + path);
}

RopeTables load_rope_tables(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("rope tables: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_rope_tables(bytes);
}

} // namespace dim
