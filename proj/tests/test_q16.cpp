// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dim/chacha20.hpp"
#include "dim/q16.hpp"

using namespace dim;

TEST_CASE("q16_from_ratio") {
    CHECK(q16_from_ratio(1, 1).raw == 65536);
    CHECK(q16_from_ratio(0, 7).raw == 0);
    CHECK(q16_from_ratio(1, 127).raw == 516); // 65536/127 = 516.03...
    CHECK_THROWS_AS(q16_from_ratio(1, 0), std::invalid_argument);

    // half-away-from-zero at exact midpoints, both signs
    CHECK(q16_from_ratio(1, 131072).raw == 1);   // 0.5 -> 1
    CHECK(q16_from_ratio(-1, 131072).raw == -1); // -0.5 -> -1
    CHECK(q16_from_ratio(3, 131072).raw == 2);   // 1.5 -> 2
    CHECK(q16_from_ratio(1, 3).raw == 21845);    // 21845.33 -> down
    CHECK(q16_from_ratio(2, 3).raw == 43691);    // 43690.67 -> up
    CHECK(q16_from_ratio(-2, 3).raw == -43691);
    CHECK(q16_from_ratio(2, -3).raw == -43691);
}

TEST_CASE("q16_mul") {
    CHECK(q16_mul(q16{kQ16One}, q16{kQ16One}).raw == kQ16One);
    CHECK(q16_mul(q16{32768}, q16{32768}).raw == 16384);
    CHECK(q16_mul(q16{-65536}, q16{65536}).raw == -65536);
    // widened intermediate: values near the top of the activation envelope
    CHECK(q16_mul(q16{1ll << 40}, q16{1ll << 30}).raw == 1ll << 54);
}

TEST_CASE("inv_sqrt_q16 reference values") {
    CHECK(inv_sqrt_q16(q16{65536}).raw == 65536);
    CHECK(inv_sqrt_q16(q16{262144}).raw == 32768);
    // 1/sqrt(2): oracle = fp64, 65536/sqrt(2) = 46340.95
    int64_t r = inv_sqrt_q16(q16{131072}).raw;
    CHECK(std::fabs(double(r) - 46340.95) <= 0.0001 * 46341.0);
    CHECK_THROWS_AS(inv_sqrt_q16(q16{0}), std::domain_error);
    CHECK_THROWS_AS(inv_sqrt_q16(q16{-5}), std::domain_error);
}

TEST_CASE("inv_sqrt_q16 accuracy sweep (fast)") {
    // full 1e5-sample sweep lives in the acceptance suite
    for (int i = 0; i <= 10000; ++i) {
        double lx = -10.0 + 34.0 * double(i) / 10000.0;
        int64_t raw = std::llround(std::pow(2.0, lx) * 65536.0);
        if (raw < 1) raw = 1;
        double ref = 65536.0 / std::sqrt(double(raw) / 65536.0);
        double err = std::fabs(double(inv_sqrt_q16(q16{raw}).raw) - ref);
        REQUIRE(err <= 1e-4 * ref + 0.51);
    }
}

TEST_CASE("exp_neg_lut reference values and bounds") {
    CHECK(exp_neg_lut(q16{0}).raw == kQ16One);
    // e^-8 * 65536 = 21.99
    CHECK(std::llabs(exp_neg_lut(q16{8 * kQ16One}).raw - 22) <= 1);
    // e^-1 * 65536 = 24109.35
    CHECK(std::llabs(exp_neg_lut(q16{kQ16One}).raw - 24109) <= 2);
    CHECK_THROWS_AS(exp_neg_lut(q16{-1}), std::domain_error);
    CHECK_THROWS_AS(exp_neg_lut(q16{8 * kQ16One + 1}), std::domain_error);
}

TEST_CASE("exp table entries are monotone and pinned at the ends") {
    const auto& e = ExpLut::instance().entries;
    CHECK(e[0] == 22);
    CHECK(e[256] == kQ16One);
    for (int i = 1; i <= 256; ++i) REQUIRE(e[i] >= e[i - 1]);
}

TEST_CASE("exp_neg_lut is monotone non-increasing in t") {
    int64_t prev = exp_neg_lut(q16{0}).raw;
    for (int64_t t = 1; t <= 8 * kQ16One; t += 97) {
        int64_t cur = exp_neg_lut(q16{t}).raw;
        REQUIRE(cur <= prev);
        prev = cur;
    }
    ChaCha20Rng rng(11);
    for (int i = 0; i < 5000; ++i) {
        int64_t a = int64_t(rng.next_u32() % (8 * kQ16One + 1));
        int64_t b = int64_t(rng.next_u32() % (8 * kQ16One + 1));
        if (a > b) std::swap(a, b);
        REQUIRE(exp_neg_lut(q16{a}).raw >= exp_neg_lut(q16{b}).raw);
    }
}

TEST_CASE("sigmoid reference values") {
    CHECK(sigmoid_q16(q16{0}).raw == 32768);
    CHECK(sigmoid_q16(q16{8 * kQ16One}).raw ==
          kQ16One - sigmoid_q16(q16{-8 * kQ16One}).raw);
    // oracle: fp64 sigma(-1) * 65536 = 17625.58
    double ref = 65536.0 / (1.0 + std::exp(1.0));
    CHECK(std::fabs(double(sigmoid_q16(q16{-kQ16One}).raw) - ref) <= 3e-4 * ref);
}

TEST_CASE("sigmoid symmetry is exact for every input") {
    ChaCha20Rng rng(12);
    for (int i = 0; i < 20000; ++i) {
        int64_t x = int64_t(rng.next_u64() % (600ull * kQ16One)) - 300ll * kQ16One;
        REQUIRE(sigmoid_q16(q16{x}).raw + sigmoid_q16(q16{-x}).raw == kQ16One);
    }
    // saturating magnitudes clamp but keep the identity
    CHECK(sigmoid_q16(q16{INT64_MIN / 4}).raw + sigmoid_q16(q16{-(INT64_MIN / 4)}).raw == kQ16One);
}

TEST_CASE("silu reference values") {
    CHECK(silu_q16(q16{0}).raw == 0);
    // oracle: fp64 8*sigma(8)*65536 = 524112.4
    double ref_pos = 8.0 / (1.0 + std::exp(-8.0)) * 65536.0;
    CHECK(std::fabs(double(silu_q16(q16{8 * kQ16One}).raw) - ref_pos) <= 3e-4 * ref_pos);
    // oracle: fp64 -8*sigma(-8)*65536 = -175.8; absolute band near zero
    double ref_neg = -8.0 / (1.0 + std::exp(8.0)) * 65536.0;
    CHECK(std::fabs(double(silu_q16(q16{-8 * kQ16One}).raw) - ref_neg) <= 3.0);
}

TEST_CASE("silu stays inside the construction envelope (fast sweep)") {
    for (int sign = -1; sign <= 1; sign += 2) {
        for (int i = 0; i <= 20000; ++i) {
            double lx = -10.0 + 13.0 * double(i) / 20000.0;
            int64_t raw = std::llround(sign * std::pow(2.0, lx) * 65536.0);
            if (raw == 0) continue;
            double xr = double(raw) / 65536.0;
            double ref = xr / (1.0 + std::exp(-xr)) * 65536.0;
            double err = std::fabs(double(silu_q16(q16{raw}).raw) - ref);
            REQUIRE(err <= std::max(3e-4 * std::fabs(ref), 3.0 * std::fabs(xr) + 2.0));
        }
    }
}

TEST_CASE("integer summation is order and chunking independent") {
    ChaCha20Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = 1 + rng.next_u32() % 64;
        std::vector<int64_t> vals(n);
        for (auto& v : vals) v = int64_t(rng.next_u64() % (1ull << 40)) - (1ll << 39);
        int64_t forward = 0;
        for (int64_t v : vals) forward += v;
        // random permutation
        std::vector<int64_t> shuffled = vals;
        for (size_t i = n; i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.next_u32() % i]);
        int64_t permuted = 0;
        for (int64_t v : shuffled) permuted += v;
        // random chunking
        int64_t chunked = 0;
        size_t off = 0;
        while (off < n) {
            size_t take = std::min<size_t>(1 + rng.next_u32() % 7, n - off);
            int64_t part = 0;
            for (size_t j = off; j < off + take; ++j) part += vals[j];
            chunked += part;
            off += take;
        }
        REQUIRE(forward == permuted);
        REQUIRE(forward == chunked);
    }
}

TEST_CASE("operations are bit-stable across repeated evaluation") {
    ChaCha20Rng rng(14);
    for (int i = 0; i < 1000; ++i) {
        int64_t x = int64_t(rng.next_u64() % (1ull << 44)) + 1;
        CHECK(inv_sqrt_q16(q16{x}).raw == inv_sqrt_q16(q16{x}).raw);
        int64_t s = int64_t(rng.next_u64() % (512ull * kQ16One)) - 256ll * kQ16One;
        CHECK(silu_q16(q16{s}).raw == silu_q16(q16{s}).raw);
    }
}
