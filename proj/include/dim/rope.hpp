// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dim/q16.hpp"

namespace dim {

/// Precomputed rotary-embedding cosine/sine tables in Q16, indexed
/// [position][frequency index]. Position zero is the identity rotation.
struct RopeTables {
    uint32_t max_ctx = 0;
    uint32_t half_dim = 0;
    double theta_base = 10000.0;
    std::vector<int64_t> cos_raw; // max_ctx * half_dim, row-major
    std::vector<int64_t> sin_raw;

    int64_t cos_at(uint32_t pos, uint32_t k) const { return cos_raw[size_t(pos) * half_dim + k]; }
    int64_t sin_at(uint32_t pos, uint32_t k) const { return sin_raw[size_t(pos) * half_dim + k]; }

    friend bool operator==(const RopeTables&, const RopeTables&) = default;
};

/// Builds tables from angle = pos * theta_base^(-2k/d_head) evaluated in
/// double precision, rounded half-away-from-zero to Q16. d_head must be even.
RopeTables build_rope_tables(double theta_base, uint32_t d_head, uint32_t max_ctx);

/// Byte-exact binary artifact: magic "RTAB", u32 version, u32 max_ctx,
/// u32 half_dim, f64 theta_base, cos table then sin table as i64 raw values,
/// all little-endian.
std::vector<uint8_t> serialize_rope_tables(const RopeTables& t);
RopeTables deserialize_rope_tables(std::span<const uint8_t> bytes);

void save_rope_tables(const RopeTables& t, const std::string& path);
RopeTables load_rope_tables(const std::string& path);

} // namespace dim
