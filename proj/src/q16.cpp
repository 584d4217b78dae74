// SPDX-License-Identifier: Apache-2.0
#include "dim/q16.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace dim {

namespace {

int64_t round_ratio_half_away(int128 num, int128 den) {
    int128 q = num / den;
    int128 rem = num % den;
    if (rem != 0) {
        int128 ad = den < 0 ? -den : den;
        int128 ar = rem < 0 ? -rem : rem;
        if (2 * ar >= ad) q += ((num < 0) != (den < 0)) ? -1 : 1;
    }
    if (q > INT64_MAX || q < INT64_MIN) throw std::overflow_error("q16: ratio out of range");
    return int64_t(q);
}

// Q48 seeds for 1/sqrt at the geometric midpoint of each raw-value octave
// [2^b, 2^(b+1)). Midpoint seeding keeps the worst relative seed error at
// 2^(1/4)-1, which three Newton iterations contract below 4e-5.
struct InvSqrtSeeds {
    std::array<int64_t, 64> q48;
    InvSqrtSeeds() {
        for (int b = 0; b < 64; ++b) {
            double x_mid = std::ldexp(1.0, b - 16) * std::sqrt(2.0);
            double s = 1.0 / std::sqrt(x_mid);
            double raw = s * 0x1.0p48;
            q48[b] = raw >= 1.0 ? int64_t(std::llround(raw)) : 1;
        }
    }
};

const InvSqrtSeeds& inv_sqrt_seeds() {
    static const InvSqrtSeeds t;
    return t;
}

} // namespace

q16 q16_from_ratio(int64_t num, int64_t den) {
    if (den == 0) throw std::invalid_argument("q16_from_ratio: zero denominator");
    return q16{round_ratio_half_away(int128(num) << 16, int128(den))};
}

q16 q16_from_real(double v) {
    return q16{int64_t(std::llround(v * 65536.0))};
}

q16 inv_sqrt_q16(q16 x) {
    if (x.raw <= 0) throw std::domain_error("inv_sqrt_q16: input must be positive");
    int b = 63 - std::countl_zero(uint64_t(x.raw));
    int128 y = inv_sqrt_seeds().q48[b];
    const int128 three48 = int128(3) << 48;
    for (int it = 0; it < 3; ++it) {
        int128 t = (y * y) >> 48;          // y^2, Q48
        int128 u = (int128(x.raw) * t) >> 16;  // x*y^2, Q48
        int128 z = three48 - u;
        y = (y * z) >> 49;                 // y*(3 - x*y^2)/2, Q48
    }
    return q16{int64_t((y + (int128(1) << 31)) >> 32)};
}

const ExpLut& ExpLut::instance() {
    static const ExpLut lut = [] {
        ExpLut t;
        for (int i = 0; i <= 256; ++i) {
            t.entries[i] = std::llround(std::exp(-8.0 + double(i) / 32.0) * 65536.0);
        }
        return t;
    }();
    return lut;
}

q16 exp_neg_lut(q16 t) {
    if (t.raw < 0 || t.raw > 8 * kQ16One) {
        throw std::domain_error("exp_neg_lut: argument outside [0, 8]");
    }
    const auto& e = ExpLut::instance().entries;
    int64_t cell = t.raw >> 11;    // 2048 raw units per cell
    int64_t frac = t.raw & 2047;
    if (cell == 256) return q16{e[0]};
    int64_t hi = e[256 - cell];      // exp at the cell's lower t
    int64_t lo = e[256 - cell - 1];  // exp at the cell's upper t
    return q16{hi - (((hi - lo) * frac + 1024) >> 11)};
}

q16 sigmoid_q16(q16 x) {
    if (x.raw > 0) return q16{kQ16One - sigmoid_q16(q16{-x.raw}).raw};
    int64_t t = x.raw <= -8 * kQ16One ? 8 * kQ16One : -x.raw;
    int64_t e = exp_neg_lut(q16{t}).raw;
    int64_t num = e << 16;
    int64_t den = kQ16One + e;
    return q16{(num + den / 2) / den};
}

q16 silu_q16(q16 x) {
    return q16_mul(x, sigmoid_q16(x));
}

} // namespace dim
