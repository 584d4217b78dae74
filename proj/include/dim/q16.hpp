// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

namespace dim {

using int128 = __int128;

/// Q16 fixed point: real value = raw / 65536. The universal activation type.
struct q16 {
    int64_t raw = 0;

    double to_real() const { return double(raw) * 0x1.0p-16; }
    friend bool operator==(const q16&, const q16&) = default;
};

constexpr int64_t kQ16One = 1ll << 16;

/// Round-half-away-from-zero of num * 65536 / den. Throws on den == 0.
q16 q16_from_ratio(int64_t num, int64_t den);

/// Round-half-away-from-zero of v * 65536 (used at table-build and quantize time).
q16 q16_from_real(double v);

/// (a.raw * b.raw) >> 16 with a 128-bit intermediate.
inline q16 q16_mul(q16 a, q16 b) {
    return q16{int64_t((int128(a.raw) * int128(b.raw)) >> 16)};
}

/// Newton-Raphson 1/sqrt(x): table seed by leading-bit octave, then exactly
/// three iterations of y <- y*(3 - x*y^2)/2 at Q48 internal precision, rounded
/// to Q16 half-away-from-zero. Throws on x.raw <= 0.
q16 inv_sqrt_q16(q16 x);

/// 257-entry exp table over [-8, 0]: entries[i] = round(exp(-8 + i/32) * 65536).
struct ExpLut {
    std::array<int64_t, 257> entries;
    static constexpr double kDomainLo = -8.0;
    static constexpr double kDomainHi = 0.0;

    static const ExpLut& instance();
};

/// exp(-t) for t.raw in [0, 8*65536] by table lookup with linear interpolation:
/// cell index = t.raw >> 11, fraction = t.raw & 2047, interpolation in widened
/// integers with round-half-up. Throws when t is out of range (callers clamp).
q16 exp_neg_lut(q16 t);

/// Logistic sigmoid. For x <= 0: E = exp_neg_lut(min(-x, 8)) and
/// sigma = round(E * ONE / (ONE + E)); for x > 0: ONE - sigmoid(-x), so
/// sigmoid(x) + sigmoid(-x) == ONE holds exactly for every x.
q16 sigmoid_q16(q16 x);

/// SiLU(x) = q16_mul(x, sigmoid_q16(x)).
q16 silu_q16(q16 x);

} // namespace dim
